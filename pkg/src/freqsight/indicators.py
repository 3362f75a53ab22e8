"""Comparable resource-impact indicators computed from runtime ratios.

The four indicators share one metric so they can be ranked against each
other directly:

* CPU impact: how close the runtime reduction from raising the CPU
  frequency comes to its linear-scaling bound, averaged over the scaled
  frequencies.
* disk / network impact: the largest increase of the CPU indicator
  obtained by upgrading the disk / network while holding everything else
  fixed.
* memory impact: one minus the best CPU indicator achievable with both
  I/O resources upgraded; the residual non-CPU impact.

All values live in [0, 1] after clamping; every clamp raises a flag so
measurement noise is visible rather than silently corrected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional

from .errors import IncompleteMatrixError, InvalidInputError
from .model import (
    CRI,
    DRI,
    MRI,
    NRI,
    INDICATORS,
    ExperimentDesign,
    RuntimeMatrix,
    UtilizationSummary,
    supported_indicators,
)

# Fixed tie-break order; also the resource each indicator speaks for.
RESOURCE_ORDER = ("cpu", "memory", "disk", "network")
RESOURCE_FOR_INDICATOR = {CRI: "cpu", MRI: "memory", DRI: "disk", NRI: "network"}
INDICATOR_FOR_RESOURCE = {r: i for i, r in RESOURCE_FOR_INDICATOR.items()}


class Flag(str, Enum):
    """Quality flags attached to indicator values."""

    #: a frequency increase made the workload slower; term clamped to 0
    CLAMPED_NEGATIVE_CPI = "clamped_negative_cpi"
    #: a value exceeded its theoretical range (superlinear speedup or
    #: noisy upgrade column) and was bounded
    CLAMPED_INDICATOR = "clamped_indicator"
    #: required matrix cells were absent; the indicator is unavailable
    INCOMPLETE_MATRIX = "incomplete_matrix"


FLAG_LEGEND = {
    Flag.CLAMPED_NEGATIVE_CPI.value: "negative improvement term clamped to 0 (slowdown under higher frequency)",
    Flag.CLAMPED_INDICATOR.value: "value beyond its theoretical range was bounded (superlinear or noisy upgrade)",
    Flag.INCOMPLETE_MATRIX.value: "required matrix cells missing; indicator reported absent",
}


class IndicatorValue(NamedTuple):
    value: float
    flags: frozenset


def cpi(rt_base: float, rt_scaled: float) -> float:
    """Fractional runtime reduction from raising the CPU frequency.

    Returns ``1 - rt_scaled / rt_base`` unclamped; callers must flag
    negative results (a slowdown signals a measurement anomaly).
    """
    if not rt_base > 0 or not rt_scaled > 0:
        raise InvalidInputError(
            f"runtimes must be > 0, got base={rt_base}, scaled={rt_scaled}"
        )
    return 1.0 - rt_scaled / rt_base


def cri(baseline_rt: float, scaled_rts: Mapping[float, float], base_freq: float) -> IndicatorValue:
    """CPU relative impact: mean over frequencies of the runtime reduction
    normalized by its linear-scaling bound ``1 - base_freq / freq``.

    1 means fully CPU-bound (linear speedup), 0 means frequency has no
    effect. Negative reduction terms clamp to 0, per-frequency ratios
    above 1 clamp to 1; both set flags.
    """
    if not scaled_rts:
        raise InvalidInputError("scaled_rts must contain at least one frequency")
    if not baseline_rt > 0:
        raise InvalidInputError(f"baseline_rt must be > 0, got {baseline_rt}")
    flags = set()
    total = 0.0
    for freq in sorted(scaled_rts):
        if freq <= base_freq or math.isclose(freq, base_freq, rel_tol=1e-6):
            raise InvalidInputError(
                f"scaled frequency {freq:g} must exceed baseline {base_freq:g}"
            )
        improvement = cpi(baseline_rt, scaled_rts[freq])
        if improvement < 0.0:
            improvement = 0.0
            flags.add(Flag.CLAMPED_NEGATIVE_CPI)
        term = improvement / (1.0 - base_freq / freq)
        if term > 1.0:
            term = 1.0
            flags.add(Flag.CLAMPED_INDICATOR)
        total += term
    return IndicatorValue(total / len(scaled_rts), frozenset(flags))


def _column_cri(
    matrix: RuntimeMatrix,
    design: ExperimentDesign,
    workload_id: str,
    mode: str,
    disk_tier: str,
    network_bw: float,
) -> IndicatorValue:
    """CPU indicator computed from one hardware column of the matrix."""
    base = design.baseline
    scheme_at = lambda f: base.with_freq(f).with_io(disk_tier, network_bw)
    missing = [
        (mode, scheme_at(f))
        for f in design.all_freqs
        if matrix.runtime(workload_id, mode, scheme_at(f)) is None
    ]
    if missing:
        names = ", ".join(s.label() for _, s in missing)
        raise IncompleteMatrixError(
            f"matrix is missing cells for ({workload_id}, {mode}): {names}",
            missing=missing,
        )
    baseline_rt = matrix.runtime(workload_id, mode, scheme_at(base.cpu_freq))
    scaled = {f: matrix.runtime(workload_id, mode, scheme_at(f)) for f in design.cpu_freqs}
    return cri(baseline_rt, scaled, base.cpu_freq)


def _max_cri_increment(
    matrix: RuntimeMatrix,
    design: ExperimentDesign,
    workload_id: str,
    mode: str,
    configs: Iterable[tuple[str, float]],
    what: str,
) -> IndicatorValue:
    """max over upgrade columns of (upgraded CPU indicator - baseline CPU
    indicator), clamped below at 0."""
    configs = list(configs)
    if not configs:
        raise InvalidInputError(f"design declares no alternative {what}")
    base_col = _column_cri(
        matrix, design, workload_id, mode,
        design.baseline.disk_tier, design.baseline.network_bw,
    )
    flags = set(base_col.flags)
    best = None
    for (d, n) in configs:
        col = _column_cri(matrix, design, workload_id, mode, d, n)
        flags |= col.flags
        gain = col.value - base_col.value
        best = gain if best is None else max(best, gain)
    if best < 0.0:
        best = 0.0
        flags.add(Flag.CLAMPED_INDICATOR)
    return IndicatorValue(best, frozenset(flags))


def dri(matrix: RuntimeMatrix, design: ExperimentDesign, workload_id: str, mode: str) -> IndicatorValue:
    """Disk relative impact: largest CPU-indicator increase from a disk
    upgrade with baseline network."""
    configs = [(d, design.baseline.network_bw) for d in design.disk_tiers]
    return _max_cri_increment(matrix, design, workload_id, mode, configs, "disk tiers")


def nri(matrix: RuntimeMatrix, design: ExperimentDesign, workload_id: str, mode: str) -> IndicatorValue:
    """Network relative impact: largest CPU-indicator increase from a
    network upgrade with baseline disk."""
    configs = [(design.baseline.disk_tier, n) for n in design.network_bws]
    return _max_cri_increment(matrix, design, workload_id, mode, configs, "network bandwidths")


def mri(matrix: RuntimeMatrix, design: ExperimentDesign, workload_id: str, mode: str) -> IndicatorValue:
    """Memory relative impact: one minus the best CPU indicator over the
    upgraded (disk, network) pairs selected by the pair policy."""
    pairs = design.selected_pairs()
    if not pairs:
        raise InvalidInputError("design declares no (disk, network) upgrade pair")
    flags = set()
    best = None
    for (d, n) in pairs:
        col = _column_cri(matrix, design, workload_id, mode, d, n)
        flags |= col.flags
        best = col.value if best is None else max(best, col.value)
    return IndicatorValue(1.0 - best, frozenset(flags))


@dataclass(frozen=True)
class IndicatorSet:
    """The comparable indicator values for one (workload, mode).

    Absent values (None) mean the matrix or design could not support the
    indicator; absent is not zero. The four values need not sum to 1:
    upgrading both I/O resources at once is not the sum of upgrading each
    separately.
    """

    workload_id: str
    mode: str
    cri: Optional[float] = None
    mri: Optional[float] = None
    dri: Optional[float] = None
    nri: Optional[float] = None
    flags: frozenset = frozenset()

    def value(self, indicator: str) -> Optional[float]:
        return getattr(self, indicator.lower())

    def present(self) -> dict[str, float]:
        """resource name -> value, for the indicators that are available."""
        out = {}
        for ind in INDICATORS:
            v = self.value(ind)
            if v is not None:
                out[RESOURCE_FOR_INDICATOR[ind]] = v
        return out

    def absent(self) -> tuple[str, ...]:
        return tuple(i for i in INDICATORS if self.value(i) is None)


_COMPUTE = {CRI: None, DRI: dri, NRI: nri, MRI: mri}


def compute_all(
    matrix: RuntimeMatrix,
    design: ExperimentDesign,
    workload_id: str,
    mode: str,
    indicators: Optional[Iterable[str]] = None,
) -> IndicatorSet:
    """Bundle the requested indicators (default: all the design supports)
    into one set with the union of their flags.

    Indicators whose matrix cells are missing are reported absent with the
    incomplete-matrix flag rather than zero.
    """
    if indicators is None:
        requested = supported_indicators(design)
    else:
        requested = tuple(indicators)
        unknown = set(requested) - set(INDICATORS)
        if unknown:
            raise InvalidInputError(f"unknown indicators: {sorted(unknown)}")
        unsupported = set(requested) - set(supported_indicators(design))
        if unsupported:
            raise InvalidInputError(
                f"design provides no alternative resources for: {sorted(unsupported)}"
            )
    values: dict[str, Optional[float]] = {i: None for i in INDICATORS}
    flags = set()
    for ind in requested:
        try:
            if ind == CRI:
                result = _column_cri(
                    matrix, design, workload_id, mode,
                    design.baseline.disk_tier, design.baseline.network_bw,
                )
            else:
                result = _COMPUTE[ind](matrix, design, workload_id, mode)
        except IncompleteMatrixError:
            flags.add(Flag.INCOMPLETE_MATRIX)
            continue
        values[ind] = result.value
        flags |= result.flags
    return IndicatorSet(
        workload_id=workload_id,
        mode=mode,
        cri=values[CRI],
        mri=values[MRI],
        dri=values[DRI],
        nri=values[NRI],
        flags=frozenset(flags),
    )


@dataclass(frozen=True)
class Ranking:
    """Indicators sorted descending; exact-value ties break by the fixed
    resource order and are also reported as groups."""

    order: tuple[tuple[str, float], ...]
    ties: tuple[tuple[str, ...], ...] = ()

    @property
    def bottleneck(self) -> str:
        return self.order[0][0]


def rank_bottleneck(ind: IndicatorSet) -> Ranking:
    """Sort the present indicators by value; the greatest is the
    bottleneck. Ranking runs on the present subset only."""
    present = ind.present()
    if not present:
        raise InvalidInputError(
            f"no indicator values present for ({ind.workload_id}, {ind.mode})"
        )
    ordered = sorted(
        present.items(),
        key=lambda kv: (-kv[1], RESOURCE_ORDER.index(kv[0])),
    )
    groups: dict[float, list[str]] = {}
    for resource, value in ordered:
        groups.setdefault(value, []).append(resource)
    ties = tuple(tuple(g) for g in groups.values() if len(g) > 1)
    return Ranking(order=tuple(ordered), ties=ties)


@dataclass(frozen=True)
class Thresholds:
    """Cut points for the utilization-combined diagnosis heuristics."""

    util_high: float = 60.0
    util_low: float = 30.0
    ri_high: float = 0.5
    ri_low: float = 0.3


@dataclass(frozen=True)
class DiagnosisCode:
    code: str
    explanation: str
    values: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class DiagnosisReport:
    """Heuristic findings from combining indicators with utilizations;
    every code cites the values that triggered it."""

    codes: tuple[DiagnosisCode, ...]
    thresholds: Thresholds
    notes: tuple[str, ...] = ()


def diagnose(
    ind: IndicatorSet,
    util: Optional[UtilizationSummary],
    thresholds: Optional[Thresholds] = None,
) -> DiagnosisReport:
    """Combine indicator values with measured utilizations.

    High CPU use with a low CPU indicator points at memory stalls
    inflating the utilization; low CPU use with a high CPU indicator
    points at idle cores (scheduling imbalance). The disk rules read
    bandwidth use against the disk indicator to judge I/O overlap.
    """
    t = thresholds or Thresholds()
    if util is None:
        return DiagnosisReport((), t, notes=("no utilization data; diagnosis skipped",))
    codes = []
    notes = []

    def fire(code, explanation, **values):
        codes.append(DiagnosisCode(code, explanation, tuple(sorted(values.items()))))

    if ind.cri is None:
        notes.append("CPU indicator absent; CPU rules skipped")
    else:
        if util.cpu_util_pct >= t.util_high and ind.cri <= t.ri_low:
            fire(
                "HIGH_CPUUTIL_LOW_CRI",
                "possible weak memory management / memory stalls inflate CPU utilization",
                cpu_util_pct=util.cpu_util_pct, cri=ind.cri,
            )
        if util.cpu_util_pct <= t.util_low and ind.cri >= t.ri_high:
            fire(
                "LOW_CPUUTIL_HIGH_CRI",
                "CPU cores not fully used (scheduling imbalance)",
                cpu_util_pct=util.cpu_util_pct, cri=ind.cri,
            )
    if ind.dri is None:
        notes.append("disk indicator absent; disk rules skipped")
    else:
        if util.disk_bw_util_pct >= t.util_high and ind.dri <= t.ri_low:
            fire(
                "HIGH_DISKUTIL_LOW_DRI",
                "good I/O overlap, little disk blocked time",
                disk_bw_util_pct=util.disk_bw_util_pct, dri=ind.dri,
            )
        if util.disk_bw_util_pct <= t.util_low and ind.dri >= t.ri_high:
            fire(
                "LOW_DISKUTIL_HIGH_DRI",
                "weak I/O overlap; consider longer tasks or merged I/O",
                disk_bw_util_pct=util.disk_bw_util_pct, dri=ind.dri,
            )
    return DiagnosisReport(tuple(codes), t, notes=tuple(notes))
