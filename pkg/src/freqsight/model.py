"""Core domain types: resource schemes, experiment designs, run records,
and the aggregated runtime matrix all other modules consume.

A *resource scheme* is one point in the (cpu frequency, memory tier,
disk tier, network bandwidth) configuration space. An *experiment design*
fixes the baseline scheme plus the alternative frequencies and I/O
upgrades to measure against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .errors import InvalidInputError

# Running modes: reading input from distributed storage vs from an
# in-memory cache (the latter needs an uncounted warmup run).
MODE_DISK = "disk"
MODE_MEMORY = "memory"
MODES = (MODE_DISK, MODE_MEMORY)

# Indicator names, in canonical reporting order.
CRI = "CRI"
MRI = "MRI"
DRI = "DRI"
NRI = "NRI"
INDICATORS = (CRI, MRI, DRI, NRI)

PAIR_BEST_ONLY = "best-pair-only"
PAIR_FULL_CROSS = "full-cross-product"
PAIR_POLICIES = (PAIR_BEST_ONLY, PAIR_FULL_CROSS)

# Measured governors may report e.g. 2.400001 GHz for a nominal 2.4; values
# within this relative tolerance match a design cell, anything else is
# rejected rather than snapped.
FREQ_MATCH_RTOL = 1e-6

DEFAULT_DISK_TIER_ORDER = ("HDD", "SSD", "RAMDISK")


def match_value(values: Iterable[float], x: float, rtol: float = FREQ_MATCH_RTOL) -> Optional[float]:
    """Return the canonical entry of ``values`` matching ``x`` within
    relative tolerance, or None."""
    for v in values:
        if math.isclose(v, x, rel_tol=rtol, abs_tol=0.0):
            return v
    return None


@dataclass(frozen=True)
class ResourceScheme:
    """One resource configuration under which runtimes are measured.

    ``cpu_freq`` is in GHz, ``network_bw`` in Gbps; ``memory_tier`` and
    ``disk_tier`` are labels whose performance order the experiment design
    declares.
    """

    cpu_freq: float
    memory_tier: str
    disk_tier: str
    network_bw: float

    def __post_init__(self):
        if not self.cpu_freq > 0:
            raise InvalidInputError(f"cpu_freq must be > 0, got {self.cpu_freq}")
        if not self.network_bw > 0:
            raise InvalidInputError(f"network_bw must be > 0, got {self.network_bw}")

    def with_freq(self, cpu_freq: float) -> "ResourceScheme":
        return replace(self, cpu_freq=cpu_freq)

    def with_io(self, disk_tier: str, network_bw: float) -> "ResourceScheme":
        return replace(self, disk_tier=disk_tier, network_bw=network_bw)

    def label(self) -> str:
        return (
            f"{self.cpu_freq:g}GHz/{self.memory_tier}/"
            f"{self.disk_tier}/{self.network_bw:g}Gbps"
        )


@dataclass(frozen=True)
class Violation:
    """One broken design rule, naming the offending field."""

    field: str
    rule: str

    def __str__(self):
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class ExperimentDesign:
    """Baseline scheme plus the alternative resource sets to measure.

    ``cpu_freqs`` are the scaled frequencies (all strictly above the
    baseline frequency, ascending); ``disk_tiers`` and ``network_bws``
    are the I/O upgrades. ``pair_policy`` selects which (disk, network)
    combinations the memory indicator maximizes over. ``disk_tier_order``
    declares the total performance order of tier labels, slowest first,
    because labels alone carry no speed information.
    """

    baseline: ResourceScheme
    cpu_freqs: tuple[float, ...]
    disk_tiers: tuple[str, ...] = ()
    network_bws: tuple[float, ...] = ()
    replicates: int = 3
    modes: tuple[str, ...] = MODES
    pair_policy: str = PAIR_BEST_ONLY
    disk_tier_order: tuple[str, ...] = DEFAULT_DISK_TIER_ORDER

    def __post_init__(self):
        object.__setattr__(self, "cpu_freqs", tuple(self.cpu_freqs))
        object.__setattr__(self, "disk_tiers", tuple(self.disk_tiers))
        object.__setattr__(self, "network_bws", tuple(self.network_bws))
        object.__setattr__(self, "disk_tier_order", tuple(self.disk_tier_order))
        # Canonicalize known modes to (disk, memory) order, keep unknowns
        # for validate_design to flag.
        seen = []
        for m in self.modes:
            if m not in seen:
                seen.append(m)
        known = [m for m in MODES if m in seen]
        unknown = [m for m in seen if m not in MODES]
        object.__setattr__(self, "modes", tuple(known + unknown))

    @property
    def all_freqs(self) -> tuple[float, ...]:
        """Baseline frequency followed by the scaled frequencies."""
        return (self.baseline.cpu_freq,) + self.cpu_freqs

    def tier_rank(self, tier: str) -> int:
        try:
            return self.disk_tier_order.index(tier)
        except ValueError:
            raise InvalidInputError(
                f"disk tier {tier!r} is not in the declared order {self.disk_tier_order}"
            ) from None

    def match_freq(self, freq: float) -> Optional[float]:
        return match_value(self.all_freqs, freq)

    def match_bw(self, bw: float) -> Optional[float]:
        return match_value((self.baseline.network_bw,) + self.network_bws, bw)

    def best_pair(self) -> Optional[tuple[str, float]]:
        """Highest-ranked disk tier with the largest bandwidth, or None if
        either upgrade set is empty."""
        if not self.disk_tiers or not self.network_bws:
            return None
        best_tier = max(self.disk_tiers, key=self.tier_rank)
        return (best_tier, max(self.network_bws))

    def selected_pairs(self) -> tuple[tuple[str, float], ...]:
        """The (disk, network) combinations chosen by ``pair_policy``."""
        if self.pair_policy == PAIR_FULL_CROSS:
            return tuple((d, n) for d in self.disk_tiers for n in self.network_bws)
        best = self.best_pair()
        return (best,) if best is not None else ()


def validate_design(design: ExperimentDesign) -> list[Violation]:
    """Check every design invariant; returns an empty list iff all hold."""
    out: list[Violation] = []
    base = design.baseline

    if not design.cpu_freqs:
        out.append(Violation("cpu_freqs", "must contain at least one frequency"))
    for prev, cur in zip(design.cpu_freqs, design.cpu_freqs[1:]):
        if not cur > prev:
            out.append(Violation("cpu_freqs", "must be strictly ascending"))
            break
    for f in design.cpu_freqs:
        # Equality would zero the linear-scaling bound 1 - base/f.
        if f <= base.cpu_freq or math.isclose(f, base.cpu_freq, rel_tol=FREQ_MATCH_RTOL):
            out.append(Violation("cpu_freqs", f"frequency {f:g} must exceed baseline {base.cpu_freq:g}"))

    if design.disk_tiers:
        if base.disk_tier not in design.disk_tier_order:
            out.append(Violation(
                "disk_tier_order",
                f"baseline tier {base.disk_tier!r} missing from declared order",
            ))
        else:
            base_rank = design.disk_tier_order.index(base.disk_tier)
            for d in design.disk_tiers:
                if d not in design.disk_tier_order:
                    out.append(Violation("disk_tiers", f"tier {d!r} missing from declared order"))
                elif design.disk_tier_order.index(d) <= base_rank:
                    out.append(Violation("disk_tiers", f"tier {d!r} must outrank baseline {base.disk_tier!r}"))

    for n in design.network_bws:
        if not n > base.network_bw:
            out.append(Violation("network_bws", f"bandwidth {n:g} must exceed baseline {base.network_bw:g}"))

    if design.replicates < 1:
        out.append(Violation("replicates", "replicates >= 1"))

    if not design.modes:
        out.append(Violation("modes", "at least one running mode required"))
    for m in design.modes:
        if m not in MODES:
            out.append(Violation("modes", f"unknown mode {m!r}; expected one of {MODES}"))

    if design.pair_policy not in PAIR_POLICIES:
        out.append(Violation("pair_policy", f"must be one of {PAIR_POLICIES}"))

    return out


def supported_indicators(design: ExperimentDesign) -> tuple[str, ...]:
    """Indicators the design provides alternative resources for."""
    out = [CRI]
    if design.disk_tiers:
        out.append(DRI)
    if design.network_bws:
        out.append(NRI)
    if design.selected_pairs():
        out.append(MRI)
    return tuple(i for i in INDICATORS if i in out)


def hardware_configs(design: ExperimentDesign, indicators: Iterable[str]) -> list[tuple[str, float]]:
    """(disk, network) columns the requested indicators consume, in plan
    order: baseline config, disk upgrades, network upgrades, pairs."""
    wanted = set(indicators)
    unknown = wanted - set(INDICATORS)
    if unknown:
        raise InvalidInputError(f"unknown indicators: {sorted(unknown)}")
    base = design.baseline
    configs: list[tuple[str, float]] = []

    def add(cfg):
        if cfg not in configs:
            configs.append(cfg)

    if wanted & {CRI, DRI, NRI}:
        add((base.disk_tier, base.network_bw))
    if DRI in wanted:
        for d in design.disk_tiers:
            add((d, base.network_bw))
    if NRI in wanted:
        for n in design.network_bws:
            add((base.disk_tier, n))
    if MRI in wanted:
        for pair in design.selected_pairs():
            add(pair)
    return configs


def required_cells(
    design: ExperimentDesign,
    indicators: Iterable[str],
    modes: Optional[Iterable[str]] = None,
) -> list[tuple[str, ResourceScheme]]:
    """Exactly the (mode, scheme) cells whose runtimes the requested
    indicator equations consume, in deterministic order (mode, then
    hardware config, then frequency ascending).

    Requesting more indicators never removes cells.
    """
    configs = hardware_configs(design, indicators)
    use_modes = tuple(modes) if modes is not None else design.modes
    cells: list[tuple[str, ResourceScheme]] = []
    for mode in use_modes:
        for (d, n) in configs:
            for f in design.all_freqs:
                cells.append((mode, ResourceScheme(f, design.baseline.memory_tier, d, n)))
    return cells


@dataclass(frozen=True)
class UtilizationSummary:
    """Mean resource utilizations in percent; diagnosis input only, never
    part of the indicator math."""

    cpu_util_pct: float
    disk_bw_util_pct: float
    net_bw_util_pct: float

    def __post_init__(self):
        for name in ("cpu_util_pct", "disk_bw_util_pct", "net_bw_util_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise InvalidInputError(f"{name} must be within [0, 100], got {v}")


@dataclass(frozen=True)
class RunRecord:
    """One timed execution of a workload under one scheme.

    ``warmup`` marks the uncounted first run in memory mode; warmup
    records are never aggregated into the runtime matrix.
    """

    workload_id: str
    mode: str
    scheme: ResourceScheme
    replicate: int
    runtime_s: float
    utilization: Optional[UtilizationSummary] = None
    warmup: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.runtime_s > 0:
            raise InvalidInputError(f"runtime_s must be > 0, got {self.runtime_s}")
        if self.replicate < 1:
            raise InvalidInputError(f"replicate index must be >= 1, got {self.replicate}")


@dataclass(frozen=True)
class CellStats:
    """Aggregate of the non-warmup replicates for one matrix cell."""

    mean_runtime_s: float
    stddev_s: float
    n_samples: int


CellKey = tuple[str, str, ResourceScheme]  # (workload_id, mode, scheme)


@dataclass(frozen=True)
class RuntimeMatrix:
    """Mean running time per (workload, mode, scheme) cell.

    Immutable after construction; built by a single aggregation pass over
    validated run records (see ``freqsight.report.aggregate``).
    """

    cells: Mapping[CellKey, CellStats] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "cells", dict(self.cells))

    def stats(self, workload_id: str, mode: str, scheme: ResourceScheme) -> Optional[CellStats]:
        return self.cells.get((workload_id, mode, scheme))

    def runtime(self, workload_id: str, mode: str, scheme: ResourceScheme) -> Optional[float]:
        st = self.stats(workload_id, mode, scheme)
        return None if st is None else st.mean_runtime_s

    def workloads(self) -> tuple[str, ...]:
        return tuple(sorted({k[0] for k in self.cells}))

    def modes_for(self, workload_id: str) -> tuple[str, ...]:
        present = {k[1] for k in self.cells if k[0] == workload_id}
        return tuple(m for m in MODES if m in present)

    def missing_cells(
        self,
        design: ExperimentDesign,
        workload_id: str,
        mode: str,
        indicators: Iterable[str],
    ) -> list[tuple[str, ResourceScheme]]:
        return [
            (m, s)
            for (m, s) in required_cells(design, indicators, modes=(mode,))
            if (workload_id, m, s) not in self.cells
        ]

    def scaled(self, k: float) -> "RuntimeMatrix":
        """New matrix with every runtime multiplied by ``k`` (> 0)."""
        if not k > 0:
            raise InvalidInputError(f"scale factor must be > 0, got {k}")
        return RuntimeMatrix({
            key: CellStats(st.mean_runtime_s * k, st.stddev_s * k, st.n_samples)
            for key, st in self.cells.items()
        })
