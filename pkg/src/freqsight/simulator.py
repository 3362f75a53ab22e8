"""Synthetic phase-based workloads with known ground-truth resource time
shares, used to verify the indicator math end to end, plus the runtime
scale model for predicting performance at other cluster sizes.

A workload is a sequence of phases. Per phase, compute time is
``cpu_work / cpu_freq + mem_stall_s`` (memory stall time does not change
with frequency or I/O upgrades), I/O time is the disk plus network time
for the scheme's tiers, and the two interleave through one overlap knob:
``o * max(compute, io) + (1 - o) * (compute + io)``. o=0 is fully serial,
o=1 fully overlapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateFitError, InvalidInputError
from .model import (
    ExperimentDesign,
    ResourceScheme,
    RunRecord,
    match_value,
    required_cells,
    supported_indicators,
)


@dataclass(frozen=True)
class PhaseSpec:
    """One workload phase.

    ``cpu_work`` is in GHz-seconds (time at frequency f is cpu_work / f),
    ``disk_time_s`` maps disk tier labels to seconds, ``net_time_s`` maps
    bandwidths in Gbps to seconds. ``overlap`` is the fraction of I/O that
    can hide behind computation.
    """

    cpu_work: float = 0.0
    mem_stall_s: float = 0.0
    disk_time_s: Mapping[str, float] = field(default_factory=dict)
    net_time_s: Mapping[float, float] = field(default_factory=dict)
    overlap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "disk_time_s", dict(self.disk_time_s))
        object.__setattr__(self, "net_time_s", dict(self.net_time_s))
        if self.cpu_work < 0 or self.mem_stall_s < 0:
            raise InvalidInputError("phase times must be >= 0")
        if any(v < 0 for v in self.disk_time_s.values()) or any(
            v < 0 for v in self.net_time_s.values()
        ):
            raise InvalidInputError("phase times must be >= 0")
        if not 0.0 <= self.overlap <= 1.0:
            raise InvalidInputError(f"overlap must be within [0, 1], got {self.overlap}")

    def disk_time(self, tier: str) -> float:
        try:
            return self.disk_time_s[tier]
        except KeyError:
            raise InvalidInputError(f"phase has no disk time for tier {tier!r}") from None

    def net_time(self, bw: float) -> float:
        if bw in self.net_time_s:
            return self.net_time_s[bw]
        key = match_value(self.net_time_s.keys(), bw)
        if key is None:
            raise InvalidInputError(f"phase has no network time for bandwidth {bw:g} Gbps")
        return self.net_time_s[key]


@dataclass(frozen=True)
class WorkloadModel:
    """Ordered phases plus an identifier; the oracle container."""

    workload_id: str
    phases: tuple[PhaseSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise InvalidInputError("workload must contain at least one phase")


def simulate_rt(workload: WorkloadModel, scheme: ResourceScheme) -> float:
    """Deterministic running time of the workload under one scheme."""
    total = 0.0
    for phase in workload.phases:
        compute = phase.cpu_work / scheme.cpu_freq + phase.mem_stall_s
        io = phase.disk_time(scheme.disk_tier) + phase.net_time(scheme.network_bw)
        o = phase.overlap
        total += o * max(compute, io) + (1.0 - o) * (compute + io)
    return total


@dataclass(frozen=True)
class ResourceShares:
    """Standalone time per resource divided by the simulated runtime.

    For fully serial workloads the four shares sum to exactly 1. With
    overlap, standalone attribution double-counts hidden I/O and the sum
    may exceed 1; ``overlapped`` marks that case.
    """

    cpu: float
    memory: float
    disk: float
    network: float
    overlapped: bool = False

    @property
    def total(self) -> float:
        return self.cpu + self.memory + self.disk + self.network

    def as_dict(self) -> dict[str, float]:
        return {"cpu": self.cpu, "memory": self.memory, "disk": self.disk, "network": self.network}

    def dominant(self, margin: float = 0.0) -> Optional[str]:
        """The resource whose share exceeds every other by at least
        ``margin``, or None if there is no such resource."""
        items = sorted(self.as_dict().items(), key=lambda kv: -kv[1])
        if items[0][1] - items[1][1] >= margin:
            return items[0][0]
        return None


def ground_truth_shares(workload: WorkloadModel, scheme: ResourceScheme) -> ResourceShares:
    """Known resource time shares at one scheme, the oracle the indicator
    math is verified against."""
    rt = simulate_rt(workload, scheme)
    cpu = sum(p.cpu_work / scheme.cpu_freq for p in workload.phases)
    memory = sum(p.mem_stall_s for p in workload.phases)
    disk = sum(p.disk_time(scheme.disk_tier) for p in workload.phases)
    network = sum(p.net_time(scheme.network_bw) for p in workload.phases)
    overlapped = any(p.overlap > 0 for p in workload.phases)
    return ResourceShares(
        cpu=cpu / rt,
        memory=memory / rt,
        disk=disk / rt,
        network=network / rt,
        overlapped=overlapped,
    )


RESOURCES = ("cpu", "memory", "disk", "network")


@dataclass(frozen=True)
class WorkloadParams:
    """Knobs for the random workload generator.

    ``share_targets`` gives desired serial-time fractions per resource
    (missing resources split the remainder); achieved baseline shares land
    within ``tolerance`` of the targets for serial workloads.
    ``upgraded_io_residual`` is the fraction of baseline I/O time that
    survives an upgrade (0 means upgrades eliminate the I/O entirely).
    """

    design: ExperimentDesign
    n_phases: tuple[int, int] = (1, 4)
    share_targets: Optional[Mapping[str, float]] = None
    tolerance: float = 0.05
    overlap: tuple[float, float] = (0.0, 0.0)
    total_runtime_s: tuple[float, float] = (60.0, 600.0)
    upgraded_io_residual: float = 0.0


def _resolve_shares(rng: np.random.Generator, params: WorkloadParams) -> dict[str, float]:
    targets = dict(params.share_targets or {})
    unknown = set(targets) - set(RESOURCES)
    if unknown:
        raise InvalidInputError(f"unknown share targets: {sorted(unknown)}")
    if any(v < 0 for v in targets.values()):
        raise InvalidInputError("share targets must be >= 0")
    specified_sum = sum(targets.values())
    if specified_sum > 1.0 + 1e-9:
        raise InvalidInputError(
            f"share targets sum to {specified_sum:g} > 1; infeasible for a serial workload"
        )
    free = [r for r in RESOURCES if r not in targets]
    if not free:
        if abs(specified_sum - 1.0) > max(params.tolerance, 1e-9):
            raise InvalidInputError(
                f"share targets sum to {specified_sum:g}; must be within "
                f"{params.tolerance:g} of 1 when all four resources are targeted"
            )
        return {r: v / specified_sum for r, v in targets.items()}
    # Jitter within half the tolerance so distinct seeds give distinct
    # mixes while staying inside the promised band.
    shares = {}
    for r, v in targets.items():
        jitter = rng.uniform(-params.tolerance / 2, params.tolerance / 2)
        shares[r] = min(max(v + jitter, 0.0), 1.0)
    remainder = 1.0 - sum(shares.values())
    if remainder < 0:
        scale = 1.0 + remainder / sum(shares.values())
        shares = {r: v * scale for r, v in shares.items()}
        remainder = 0.0
    weights = rng.dirichlet(np.ones(len(free)))
    for r, w in zip(free, weights):
        shares[r] = remainder * w
    return {r: shares[r] for r in RESOURCES}


def gen_random_workload(seed: int, params: WorkloadParams) -> WorkloadModel:
    """Deterministic random workload whose serial-time composition matches
    the share targets; the same seed always yields the same model."""
    rng = np.random.default_rng(seed)
    design = params.design
    base = design.baseline
    shares = _resolve_shares(rng, params)
    lo, hi = params.n_phases
    if lo < 1 or hi < lo:
        raise InvalidInputError(f"invalid n_phases range {params.n_phases}")
    n = int(rng.integers(lo, hi + 1))
    total = float(rng.uniform(*params.total_runtime_s))
    totals = {r: shares[r] * total for r in RESOURCES}
    splits = {r: rng.dirichlet(np.ones(n)) for r in RESOURCES}
    overlaps = rng.uniform(params.overlap[0], params.overlap[1], size=n)
    residual = params.upgraded_io_residual

    phases = []
    for i in range(n):
        disk_t = float(totals["disk"] * splits["disk"][i])
        net_t = float(totals["network"] * splits["network"][i])
        disk_map = {base.disk_tier: disk_t}
        disk_map.update({d: disk_t * residual for d in design.disk_tiers})
        net_map = {base.network_bw: net_t}
        net_map.update({bw: net_t * residual for bw in design.network_bws})
        phases.append(PhaseSpec(
            cpu_work=float(totals["cpu"] * splits["cpu"][i] * base.cpu_freq),
            mem_stall_s=float(totals["memory"] * splits["memory"][i]),
            disk_time_s=disk_map,
            net_time_s=net_map,
            overlap=float(overlaps[i]),
        ))
    return WorkloadModel(workload_id=f"synthetic-{seed}", phases=tuple(phases))


def add_noise(rt: float, sigma_rel: float, seed) -> float:
    """Multiplicative measurement noise: ``rt * (1 + eps)`` with eps drawn
    zero-mean at relative stddev ``sigma_rel``, redrawn if the result
    would be non-positive. ``seed`` may be an int or a Generator."""
    if sigma_rel < 0:
        raise InvalidInputError(f"sigma_rel must be >= 0, got {sigma_rel}")
    if sigma_rel == 0.0:
        return rt
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sigma_rel)
    while eps <= -1.0:
        eps = rng.normal(0.0, sigma_rel)
    return float(rt * (1.0 + eps))


def simulate_records(
    workload: WorkloadModel,
    design: ExperimentDesign,
    modes: Optional[Iterable[str]] = None,
    replicates: Optional[int] = None,
    sigma_rel: float = 0.0,
    seed: int = 0,
    indicators: Optional[Iterable[str]] = None,
    warmups: bool = True,
) -> list[RunRecord]:
    """Synthetic run records covering every cell the design's indicators
    need, with warmup records ahead of memory-mode measurements.

    Both modes replay the same workload dynamics; model a mode pair with
    two workload models if they should differ.
    """
    reps = replicates if replicates is not None else design.replicates
    inds = tuple(indicators) if indicators is not None else supported_indicators(design)
    rng = np.random.default_rng(seed)
    records = []
    for (mode, scheme) in required_cells(design, inds, modes=modes):
        true_rt = simulate_rt(workload, scheme)
        for rep in range(1, reps + 1):
            if warmups and mode == "memory":
                records.append(RunRecord(
                    workload_id=workload.workload_id, mode=mode, scheme=scheme,
                    replicate=rep, runtime_s=add_noise(true_rt, sigma_rel, rng),
                    warmup=True,
                ))
            records.append(RunRecord(
                workload_id=workload.workload_id, mode=mode, scheme=scheme,
                replicate=rep, runtime_s=add_noise(true_rt, sigma_rel, rng),
            ))
    return records


@dataclass(frozen=True)
class ScaleModel:
    """Nonnegative coefficients of the runtime scale model
    ``t1 * scale / machines + t2 * ln(machines) + t3 * machines + t4``.

    Each term is a time cost, hence the nonnegativity; the logarithm is
    natural (a base change only rescales t2).
    """

    theta1: float
    theta2: float
    theta3: float
    theta4: float
    residual_norm: float = 0.0

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3", "theta4"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")

    @property
    def thetas(self) -> tuple[float, float, float, float]:
        return (self.theta1, self.theta2, self.theta3, self.theta4)


def _features(scale: float, machines: float) -> list[float]:
    return [scale / machines, math.log(machines), machines, 1.0]


def fit_scale_model(observations: Sequence[tuple[float, float, float]]) -> ScaleModel:
    """Nonnegative least-squares fit of runtime against
    [scale/machines, ln(machines), machines, 1].

    Needs at least 4 observations over at least 2 distinct machine counts;
    a rank-deficient feature matrix has no unique nonnegative solution and
    raises a degenerate-fit error naming the deficiency.
    """
    obs = [(float(s), float(m), float(rt)) for (s, m, rt) in observations]
    if len(obs) < 4:
        raise InvalidInputError(f"need at least 4 observations, got {len(obs)}")
    for (s, m, rt) in obs:
        if m < 1 or s <= 0 or rt <= 0:
            raise InvalidInputError(
                f"observation (scale={s:g}, machines={m:g}, rt={rt:g}) out of domain"
            )
    machine_counts = {m for (_, m, _) in obs}
    if len(machine_counts) < 2:
        raise DegenerateFitError(
            "all observations share a single machine count; the machine-dependent "
            "terms cannot be separated and no unique nonnegative fit exists"
        )
    x = np.array([_features(s, m) for (s, m, _) in obs])
    y = np.array([rt for (_, _, rt) in obs])
    rank = np.linalg.matrix_rank(x)
    if rank < 4:
        raise DegenerateFitError(
            f"feature matrix rank {rank} < 4; the observations do not separate the "
            "four model terms, so no unique nonnegative fit exists (vary both "
            "scale and machine count)"
        )
    from scipy.optimize import nnls

    theta, rnorm = nnls(x, y)
    return ScaleModel(*[float(t) for t in theta], residual_norm=float(rnorm))


def predict_rt(model: ScaleModel, scale: float, machines: float) -> float:
    """Forward evaluation of the scale model."""
    if machines < 1:
        raise InvalidInputError(f"machines must be >= 1, got {machines}")
    if scale <= 0:
        raise InvalidInputError(f"scale must be > 0, got {scale}")
    t1, t2, t3, t4 = model.thetas
    return t1 * scale / machines + t2 * math.log(machines) + t3 * machines + t4
