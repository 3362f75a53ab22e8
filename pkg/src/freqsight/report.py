"""File formats, record aggregation, and report emission.

All machine formats keep full float precision and are byte-stable for a
fixed input; the text table rounds to 2 decimals for display.

Run records CSV schema (header is fixed and checked bit-exact)::

    workload,mode,cpu_freq_ghz,memory_tier,disk_tier,network_gbps,replicate,runtime_s,warmup

Utilization CSV uses the same key columns with
``cpu_util_pct,disk_bw_util_pct,net_bw_util_pct`` in place of
``runtime_s,warmup``.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InvalidInputError, ParseError, UnmatchedRecordError
from .indicators import (
    FLAG_LEGEND,
    DiagnosisCode,
    DiagnosisReport,
    Flag,
    IndicatorSet,
    Ranking,
    Thresholds,
    diagnose,
    compute_all,
    rank_bottleneck,
)
from .model import (
    INDICATORS,
    CellStats,
    ExperimentDesign,
    ResourceScheme,
    RunRecord,
    RuntimeMatrix,
    UtilizationSummary,
    required_cells,
    supported_indicators,
)
from .orchestrator import Action, PlanStep, RunPlan
from .simulator import PhaseSpec, WorkloadModel

RUNS_CSV_HEADER = [
    "workload", "mode", "cpu_freq_ghz", "memory_tier", "disk_tier",
    "network_gbps", "replicate", "runtime_s", "warmup",
]
UTIL_CSV_HEADER = [
    "workload", "mode", "cpu_freq_ghz", "memory_tier", "disk_tier",
    "network_gbps", "replicate", "cpu_util_pct", "disk_bw_util_pct", "net_bw_util_pct",
]
REPORT_CSV_HEADER = ["workload", "mode", "cri", "mri", "dri", "nri", "flags"]

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# JSON document envelope


def write_json_document(payload: Mapping, path) -> None:
    Path(path).write_text(dumps_document(payload))


def dumps_document(payload: Mapping) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def read_json_document(path, kind: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: cannot read JSON document: {e}") from e
    if not isinstance(payload, dict) or payload.get("kind") != kind:
        raise ParseError(f"{path}: expected a {kind!r} document")
    if payload.get("version") != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported document version {payload.get('version')!r}")
    return payload


# ---------------------------------------------------------------------------
# Scheme / design / record serialization


def scheme_to_dict(s: ResourceScheme) -> dict:
    return {
        "cpu_freq_ghz": s.cpu_freq,
        "memory_tier": s.memory_tier,
        "disk_tier": s.disk_tier,
        "network_gbps": s.network_bw,
    }


def scheme_from_dict(d: Mapping) -> ResourceScheme:
    return ResourceScheme(
        cpu_freq=float(d["cpu_freq_ghz"]),
        memory_tier=str(d["memory_tier"]),
        disk_tier=str(d["disk_tier"]),
        network_bw=float(d["network_gbps"]),
    )


def design_to_dict(design: ExperimentDesign) -> dict:
    return {
        "baseline": scheme_to_dict(design.baseline),
        "cpu_freqs": list(design.cpu_freqs),
        "disk_tiers": list(design.disk_tiers),
        "network_bws": list(design.network_bws),
        "replicates": design.replicates,
        "modes": list(design.modes),
        "pair_policy": design.pair_policy,
        "disk_tier_order": list(design.disk_tier_order),
    }


def design_from_dict(d: Mapping) -> ExperimentDesign:
    try:
        return ExperimentDesign(
            baseline=scheme_from_dict(d["baseline"]),
            cpu_freqs=tuple(float(f) for f in d["cpu_freqs"]),
            disk_tiers=tuple(str(t) for t in d.get("disk_tiers", ())),
            network_bws=tuple(float(b) for b in d.get("network_bws", ())),
            replicates=int(d.get("replicates", 3)),
            modes=tuple(d.get("modes", ("disk", "memory"))),
            pair_policy=str(d.get("pair_policy", "best-pair-only")),
            disk_tier_order=tuple(d.get("disk_tier_order", ("HDD", "SSD", "RAMDISK"))),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed design document: {e}") from e


def record_to_dict(r: RunRecord) -> dict:
    out = {
        "workload": r.workload_id,
        "mode": r.mode,
        **scheme_to_dict(r.scheme),
        "replicate": r.replicate,
        "runtime_s": r.runtime_s,
        "warmup": r.warmup,
    }
    if r.utilization is not None:
        out["utilization"] = {
            "cpu_util_pct": r.utilization.cpu_util_pct,
            "disk_bw_util_pct": r.utilization.disk_bw_util_pct,
            "net_bw_util_pct": r.utilization.net_bw_util_pct,
        }
    return out


def record_from_dict(d: Mapping, where: str) -> RunRecord:
    try:
        util = None
        if d.get("utilization") is not None:
            u = d["utilization"]
            util = UtilizationSummary(
                cpu_util_pct=float(u["cpu_util_pct"]),
                disk_bw_util_pct=float(u["disk_bw_util_pct"]),
                net_bw_util_pct=float(u["net_bw_util_pct"]),
            )
        return RunRecord(
            workload_id=str(d["workload"]),
            mode=str(d["mode"]),
            scheme=scheme_from_dict(d),
            replicate=int(d["replicate"]),
            runtime_s=float(d["runtime_s"]),
            utilization=util,
            warmup=bool(d.get("warmup", False)),
        )
    except (KeyError, TypeError, ValueError, InvalidInputError) as e:
        raise ParseError(f"{where}: {e}") from e


def records_to_document(records: Iterable[RunRecord]) -> dict:
    return {
        "kind": "run-records",
        "version": FORMAT_VERSION,
        "records": [record_to_dict(r) for r in records],
    }


# ---------------------------------------------------------------------------
# Parsing


def _parse_warmup(token: str, where: str) -> bool:
    t = token.strip().lower()
    if t in ("", "0", "false", "no"):
        return False
    if t in ("1", "true", "yes"):
        return True
    raise ParseError(f"{where}: cannot parse warmup value {token!r}")


def parse_runs(path, format: Optional[str] = None) -> list[RunRecord]:
    """Read run records from CSV or a run-records JSON document.

    Any malformed row (including a non-positive runtime) aborts the parse
    with its location; partial input never flows downstream.
    """
    fmt = format or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        payload = read_json_document(path, "run-records")
        return [
            record_from_dict(d, f"{path}: record {i}")
            for i, d in enumerate(payload.get("records", []))
        ]
    if fmt != "csv":
        raise InvalidInputError(f"unknown format {fmt!r}; expected csv or json")

    records = []
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if header != RUNS_CSV_HEADER:
        raise ParseError(
            f"{path}:1: header mismatch; expected {','.join(RUNS_CSV_HEADER)!r}"
        )
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        where = f"{path}:{lineno}"
        if len(row) != len(RUNS_CSV_HEADER):
            raise ParseError(f"{where}: expected {len(RUNS_CSV_HEADER)} fields, got {len(row)}")
        try:
            scheme = ResourceScheme(
                cpu_freq=float(row[2]),
                memory_tier=row[3],
                disk_tier=row[4],
                network_bw=float(row[5]),
            )
            record = RunRecord(
                workload_id=row[0],
                mode=row[1],
                scheme=scheme,
                replicate=int(row[6]),
                runtime_s=float(row[7]),
                warmup=_parse_warmup(row[8], where),
            )
        except ParseError:
            raise
        except (ValueError, InvalidInputError) as e:
            raise ParseError(f"{where}: {e}") from e
        records.append(record)
    return records


def write_records_csv(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_CSV_HEADER)
        for r in records:
            writer.writerow([
                r.workload_id, r.mode, repr(float(r.scheme.cpu_freq)), r.scheme.memory_tier,
                r.scheme.disk_tier, repr(float(r.scheme.network_bw)), r.replicate,
                repr(float(r.runtime_s)), "true" if r.warmup else "false",
            ])


UtilKey = tuple[str, str, float, str, str, float, int]


def parse_utilization(path) -> dict[UtilKey, UtilizationSummary]:
    """Read the optional utilization CSV keyed like the runs CSV."""
    out: dict[UtilKey, UtilizationSummary] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if header != UTIL_CSV_HEADER:
        raise ParseError(f"{path}:1: header mismatch; expected {','.join(UTIL_CSV_HEADER)!r}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        where = f"{path}:{lineno}"
        if len(row) != len(UTIL_CSV_HEADER):
            raise ParseError(f"{where}: expected {len(UTIL_CSV_HEADER)} fields, got {len(row)}")
        try:
            key = (row[0], row[1], float(row[2]), row[3], row[4], float(row[5]), int(row[6]))
            out[key] = UtilizationSummary(
                cpu_util_pct=float(row[7]),
                disk_bw_util_pct=float(row[8]),
                net_bw_util_pct=float(row[9]),
            )
        except (ValueError, InvalidInputError) as e:
            raise ParseError(f"{where}: {e}") from e
    return out


def attach_utilization(records: Sequence[RunRecord], table: Mapping[UtilKey, UtilizationSummary]) -> list[RunRecord]:
    """Return records with matching utilization rows attached."""
    from dataclasses import replace

    out = []
    for r in records:
        key = (r.workload_id, r.mode, r.scheme.cpu_freq, r.scheme.memory_tier,
               r.scheme.disk_tier, r.scheme.network_bw, r.replicate)
        util = table.get(key)
        out.append(replace(r, utilization=util) if util is not None else r)
    return out


# ---------------------------------------------------------------------------
# Aggregation


def _allowed_schemes(design: ExperimentDesign) -> set[ResourceScheme]:
    return {s for (_, s) in required_cells(design, supported_indicators(design), modes=("disk",))}


def match_record_cell(
    design: ExperimentDesign,
    record: RunRecord,
    allowed: Optional[set[ResourceScheme]] = None,
) -> Optional[tuple[str, ResourceScheme]]:
    """Canonical design cell for a record, or None if it matches no cell.

    Frequencies and bandwidths match within relative tolerance 1e-6 and
    aggregate under the design's canonical value; out-of-tolerance records
    are rejected, never snapped.
    """
    if record.mode not in design.modes:
        return None
    if record.scheme.memory_tier != design.baseline.memory_tier:
        return None
    freq = design.match_freq(record.scheme.cpu_freq)
    bw = design.match_bw(record.scheme.network_bw)
    if freq is None or bw is None:
        return None
    scheme = ResourceScheme(freq, design.baseline.memory_tier, record.scheme.disk_tier, bw)
    if scheme not in (allowed if allowed is not None else _allowed_schemes(design)):
        return None
    return (record.mode, scheme)


def aggregate(records: Sequence[RunRecord], design: ExperimentDesign) -> RuntimeMatrix:
    """Fold validated records into the runtime matrix.

    Cell means average exactly the non-warmup replicates; warmup records
    must still match a design cell but never contribute. Records matching
    no cell raise an unmatched-record error listing them all.
    """
    allowed = _allowed_schemes(design)
    samples: dict[tuple, list[float]] = {}
    unmatched: list[RunRecord] = []
    for record in records:
        cell = match_record_cell(design, record, allowed)
        if cell is None:
            unmatched.append(record)
            continue
        if record.warmup:
            continue
        samples.setdefault((record.workload_id,) + cell, []).append(record.runtime_s)
    if unmatched:
        lines = "; ".join(
            f"{r.workload_id}/{r.mode}/{r.scheme.label()} rep {r.replicate}"
            for r in unmatched[:10]
        )
        more = "" if len(unmatched) <= 10 else f" (+{len(unmatched) - 10} more)"
        raise UnmatchedRecordError(
            f"{len(unmatched)} record(s) match no design cell: {lines}{more}",
            records=unmatched,
        )
    cells = {
        key: CellStats(
            mean_runtime_s=statistics.fmean(values),
            stddev_s=statistics.pstdev(values),
            n_samples=len(values),
        )
        for key, values in samples.items()
    }
    return RuntimeMatrix(cells)


def utilization_by_pair(records: Sequence[RunRecord], design: ExperimentDesign) -> dict[tuple[str, str], UtilizationSummary]:
    """Mean utilization per (workload, mode) over the non-warmup records
    at the baseline hardware configuration (the setting the diagnosis
    heuristics reason about)."""
    base = design.baseline
    grouped: dict[tuple[str, str], list[UtilizationSummary]] = {}
    for r in records:
        if r.warmup or r.utilization is None:
            continue
        if r.scheme.disk_tier != base.disk_tier or r.scheme.network_bw != base.network_bw:
            continue
        grouped.setdefault((r.workload_id, r.mode), []).append(r.utilization)
    return {
        key: UtilizationSummary(
            cpu_util_pct=statistics.fmean(u.cpu_util_pct for u in utils),
            disk_bw_util_pct=statistics.fmean(u.disk_bw_util_pct for u in utils),
            net_bw_util_pct=statistics.fmean(u.net_bw_util_pct for u in utils),
        )
        for key, utils in grouped.items()
    }


# ---------------------------------------------------------------------------
# Report document


@dataclass(frozen=True)
class CellReport:
    workload_id: str
    mode: str
    scheme: ResourceScheme
    n_samples: int
    mean_runtime_s: float
    stddev_s: float
    under_replicated: bool


@dataclass(frozen=True)
class CompletenessSummary:
    """Every cell a reported value traces back to, plus the holes."""

    cells: tuple[CellReport, ...]
    missing: tuple[tuple[str, str, ResourceScheme], ...]

    @property
    def under_replicated(self) -> tuple[CellReport, ...]:
        return tuple(c for c in self.cells if c.under_replicated)


@dataclass(frozen=True)
class ReportEntry:
    indicators: IndicatorSet
    ranking: Optional[Ranking] = None
    diagnosis: Optional[DiagnosisReport] = None


@dataclass(frozen=True)
class ReportDocument:
    design: ExperimentDesign
    entries: tuple[ReportEntry, ...]
    completeness: CompletenessSummary
    flags_legend: Mapping[str, str]

    def entry(self, workload_id: str, mode: str) -> Optional[ReportEntry]:
        for e in self.entries:
            if e.indicators.workload_id == workload_id and e.indicators.mode == mode:
                return e
        return None

    def incomplete(self) -> bool:
        return bool(self.completeness.missing) or any(
            e.indicators.absent() for e in self.entries
        )


def build_report(
    records: Sequence[RunRecord],
    design: ExperimentDesign,
    thresholds: Optional[Thresholds] = None,
    with_diagnosis: bool = True,
) -> ReportDocument:
    """parse -> aggregate -> indicators -> ranking/diagnosis, bundled."""
    matrix = aggregate(records, design)
    utils = utilization_by_pair(records, design) if with_diagnosis else {}
    entries = []
    cells: list[CellReport] = []
    missing: list[tuple[str, str, ResourceScheme]] = []
    supported = supported_indicators(design)
    for workload_id in matrix.workloads():
        present_modes = [m for m in design.modes if m in matrix.modes_for(workload_id)]
        for mode in present_modes:
            ind = compute_all(matrix, design, workload_id, mode)
            ranking = rank_bottleneck(ind) if ind.present() else None
            diagnosis = None
            if with_diagnosis:
                diagnosis = diagnose(ind, utils.get((workload_id, mode)), thresholds)
            entries.append(ReportEntry(indicators=ind, ranking=ranking, diagnosis=diagnosis))
            for (m, scheme) in required_cells(design, supported, modes=(mode,)):
                stats = matrix.stats(workload_id, m, scheme)
                if stats is None:
                    missing.append((workload_id, m, scheme))
                else:
                    cells.append(CellReport(
                        workload_id=workload_id, mode=m, scheme=scheme,
                        n_samples=stats.n_samples,
                        mean_runtime_s=stats.mean_runtime_s,
                        stddev_s=stats.stddev_s,
                        under_replicated=stats.n_samples < design.replicates,
                    ))
    return ReportDocument(
        design=design,
        entries=tuple(entries),
        completeness=CompletenessSummary(cells=tuple(cells), missing=tuple(missing)),
        flags_legend=dict(FLAG_LEGEND),
    )


def indicator_average(entries: Sequence[ReportEntry], mode: str, indicator: str) -> Optional[float]:
    """Uniform mean over workloads of one indicator in one mode; None when
    no workload has the value."""
    values = [
        e.indicators.value(indicator)
        for e in entries
        if e.indicators.mode == mode and e.indicators.value(indicator) is not None
    ]
    return statistics.fmean(values) if values else None


# ---------------------------------------------------------------------------
# Report serialization


def _indicator_set_to_dict(s: IndicatorSet) -> dict:
    return {
        "workload": s.workload_id,
        "mode": s.mode,
        "cri": s.cri,
        "mri": s.mri,
        "dri": s.dri,
        "nri": s.nri,
        "flags": sorted(f.value for f in s.flags),
    }


def _indicator_set_from_dict(d: Mapping) -> IndicatorSet:
    return IndicatorSet(
        workload_id=d["workload"],
        mode=d["mode"],
        cri=d.get("cri"),
        mri=d.get("mri"),
        dri=d.get("dri"),
        nri=d.get("nri"),
        flags=frozenset(Flag(f) for f in d.get("flags", [])),
    )


def report_to_document(doc: ReportDocument) -> dict:
    entries = []
    for e in doc.entries:
        entry = {"indicators": _indicator_set_to_dict(e.indicators)}
        entry["ranking"] = None if e.ranking is None else {
            "order": [[r, v] for (r, v) in e.ranking.order],
            "ties": [list(g) for g in e.ranking.ties],
        }
        entry["diagnosis"] = None if e.diagnosis is None else {
            "codes": [
                {
                    "code": c.code,
                    "explanation": c.explanation,
                    "values": [[k, v] for (k, v) in c.values],
                }
                for c in e.diagnosis.codes
            ],
            "thresholds": {
                "util_high": e.diagnosis.thresholds.util_high,
                "util_low": e.diagnosis.thresholds.util_low,
                "ri_high": e.diagnosis.thresholds.ri_high,
                "ri_low": e.diagnosis.thresholds.ri_low,
            },
            "notes": list(e.diagnosis.notes),
        }
        entries.append(entry)
    return {
        "kind": "report",
        "version": FORMAT_VERSION,
        "design": design_to_dict(doc.design),
        "entries": entries,
        "completeness": {
            "cells": [
                {
                    "workload": c.workload_id,
                    "mode": c.mode,
                    "scheme": scheme_to_dict(c.scheme),
                    "n_samples": c.n_samples,
                    "mean_runtime_s": c.mean_runtime_s,
                    "stddev_s": c.stddev_s,
                    "under_replicated": c.under_replicated,
                }
                for c in doc.completeness.cells
            ],
            "missing": [
                {"workload": w, "mode": m, "scheme": scheme_to_dict(s)}
                for (w, m, s) in doc.completeness.missing
            ],
        },
        "flags_legend": dict(doc.flags_legend),
    }


def report_from_document(payload: Mapping) -> ReportDocument:
    entries = []
    for e in payload["entries"]:
        ranking = None
        if e.get("ranking") is not None:
            ranking = Ranking(
                order=tuple((r, v) for (r, v) in e["ranking"]["order"]),
                ties=tuple(tuple(g) for g in e["ranking"]["ties"]),
            )
        diagnosis = None
        if e.get("diagnosis") is not None:
            d = e["diagnosis"]
            diagnosis = DiagnosisReport(
                codes=tuple(
                    DiagnosisCode(
                        code=c["code"],
                        explanation=c["explanation"],
                        values=tuple((k, v) for (k, v) in c["values"]),
                    )
                    for c in d["codes"]
                ),
                thresholds=Thresholds(**d["thresholds"]),
                notes=tuple(d["notes"]),
            )
        entries.append(ReportEntry(
            indicators=_indicator_set_from_dict(e["indicators"]),
            ranking=ranking,
            diagnosis=diagnosis,
        ))
    comp = payload["completeness"]
    return ReportDocument(
        design=design_from_dict(payload["design"]),
        entries=tuple(entries),
        completeness=CompletenessSummary(
            cells=tuple(
                CellReport(
                    workload_id=c["workload"],
                    mode=c["mode"],
                    scheme=scheme_from_dict(c["scheme"]),
                    n_samples=c["n_samples"],
                    mean_runtime_s=c["mean_runtime_s"],
                    stddev_s=c["stddev_s"],
                    under_replicated=c["under_replicated"],
                )
                for c in comp["cells"]
            ),
            missing=tuple(
                (m["workload"], m["mode"], scheme_from_dict(m["scheme"]))
                for m in comp["missing"]
            ),
        ),
        flags_legend=dict(payload["flags_legend"]),
    )


# ---------------------------------------------------------------------------
# Rendering


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def render_text(doc: ReportDocument) -> str:
    design = doc.design
    workloads = sorted({e.indicators.workload_id for e in doc.entries})
    lines = []
    lines.append("resource relative impact report")
    lines.append("=" * 31)
    lines.append(f"baseline: {design.baseline.label()}")
    lines.append(
        "scaled frequencies (GHz): " + ", ".join(f"{f:g}" for f in design.cpu_freqs)
    )
    lines.append(
        "disk upgrades: " + (", ".join(design.disk_tiers) or "-")
        + " | network upgrades (Gbps): "
        + (", ".join(f"{b:g}" for b in design.network_bws) or "-")
    )
    lines.append(
        f"replicates: {design.replicates} | modes: {', '.join(design.modes)}"
        f" | pair policy: {design.pair_policy}"
    )
    lines.append("")

    wl_width = max([len(w) for w in workloads] + [4])
    header = f"{'indicator':<9}  {'mode':<7}"
    for w in workloads:
        header += f"  {w:>{wl_width}}"
    header += f"  {'avg':>{wl_width}}"
    lines.append(header)
    lines.append("-" * len(header))
    by_pair = {(e.indicators.workload_id, e.indicators.mode): e for e in doc.entries}
    for indicator in INDICATORS:
        for mode in design.modes:
            row = f"{indicator:<9}  {mode:<7}"
            for w in workloads:
                e = by_pair.get((w, mode))
                v = e.indicators.value(indicator) if e else None
                row += f"  {_fmt(v):>{wl_width}}"
            avg = indicator_average(doc.entries, mode, indicator)
            row += f"  {_fmt(avg):>{wl_width}}"
            lines.append(row)
    lines.append("")

    lines.append("bottleneck ranking")
    for e in doc.entries:
        if e.ranking is None:
            continue
        pretty = " > ".join(f"{r} ({v:.2f})" for (r, v) in e.ranking.order)
        tie = ""
        if e.ranking.ties:
            tie = " | ties: " + "; ".join("=".join(g) for g in e.ranking.ties)
        lines.append(f"  {e.indicators.workload_id}/{e.indicators.mode}: {pretty}{tie}")

    diagnosed = [e for e in doc.entries if e.diagnosis is not None]
    if diagnosed:
        lines.append("diagnosis")
        for e in diagnosed:
            pair = f"{e.indicators.workload_id}/{e.indicators.mode}"
            if not e.diagnosis.codes and not e.diagnosis.notes:
                lines.append(f"  {pair}: no findings")
            for c in e.diagnosis.codes:
                vals = ", ".join(f"{k}={v:g}" for (k, v) in c.values)
                lines.append(f"  {pair}: {c.code}: {c.explanation} [{vals}]")
            for note in e.diagnosis.notes:
                lines.append(f"  {pair}: note: {note}")

    flagged = [e for e in doc.entries if e.indicators.flags]
    if flagged:
        lines.append("flags")
        for e in flagged:
            names = ", ".join(sorted(f.value for f in e.indicators.flags))
            lines.append(f"  {e.indicators.workload_id}/{e.indicators.mode}: {names}")

    comp = doc.completeness
    lines.append(
        f"completeness: {len(comp.cells)} cells present, "
        f"{len(comp.under_replicated)} under-replicated, {len(comp.missing)} missing"
    )
    for c in comp.under_replicated:
        lines.append(
            f"  under-replicated: {c.workload_id}/{c.mode}/{c.scheme.label()} "
            f"({c.n_samples}/{doc.design.replicates} replicates)"
        )
    for (w, m, s) in comp.missing:
        lines.append(f"  missing: {w}/{m}/{s.label()}")
    return "\n".join(lines) + "\n"


def render_csv(doc: ReportDocument) -> str:
    """Indicator values as one CSV row per (workload, mode), full
    precision; parse back with ``indicator_sets_from_csv``."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(REPORT_CSV_HEADER)
    for e in doc.entries:
        s = e.indicators
        writer.writerow([
            s.workload_id, s.mode,
            *("" if v is None else repr(float(v)) for v in (s.cri, s.mri, s.dri, s.nri)),
            "|".join(sorted(f.value for f in s.flags)),
        ])
    return buf.getvalue()


def indicator_sets_from_csv(text: str) -> list[IndicatorSet]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != REPORT_CSV_HEADER:
        raise ParseError(f"report CSV header mismatch; expected {','.join(REPORT_CSV_HEADER)!r}")
    out = []
    for row in reader:
        if not row:
            continue
        values = [None if cell == "" else float(cell) for cell in row[2:6]]
        flags = frozenset(Flag(f) for f in row[6].split("|") if f)
        out.append(IndicatorSet(
            workload_id=row[0], mode=row[1],
            cri=values[0], mri=values[1], dri=values[2], nri=values[3],
            flags=flags,
        ))
    return out


def render_report(doc: ReportDocument, format: str = "text") -> str:
    """Serialize the report; text rounds to 2 decimals, csv and json keep
    full precision and round-trip."""
    if format == "text":
        return render_text(doc)
    if format == "csv":
        return render_csv(doc)
    if format == "json":
        return dumps_document(report_to_document(doc))
    raise InvalidInputError(f"unknown report format {format!r}")


def emit_plot_data(indicator_sets: Sequence[IndicatorSet], group_by: str = "mode") -> dict:
    """Grouped bar-series document (label, group, value) for external
    plotting tools; values echo the indicator sets exactly."""
    if not indicator_sets:
        raise InvalidInputError("need at least one indicator set")
    if group_by not in ("mode", "workload", "indicator"):
        raise InvalidInputError(f"unknown grouping {group_by!r}")
    series = []
    for s in indicator_sets:
        for ind in INDICATORS:
            v = s.value(ind)
            if v is None:
                continue
            attrs = {"workload": s.workload_id, "mode": s.mode, "indicator": ind}
            group = attrs.pop(group_by)
            series.append({
                "label": "/".join(attrs[k] for k in sorted(attrs)),
                "group": group,
                "value": v,
                "workload": s.workload_id,
                "mode": s.mode,
                "indicator": ind,
            })
    return {"kind": "plot-data", "version": FORMAT_VERSION, "series": series}


# ---------------------------------------------------------------------------
# Workload model / plan documents


def workload_to_document(w: WorkloadModel) -> dict:
    return {
        "kind": "workload-model",
        "version": FORMAT_VERSION,
        "workload": {
            "id": w.workload_id,
            "phases": [
                {
                    "cpu_work": p.cpu_work,
                    "mem_stall_s": p.mem_stall_s,
                    "disk_time_s": dict(p.disk_time_s),
                    "net_time_s": {repr(bw): t for bw, t in p.net_time_s.items()},
                    "overlap": p.overlap,
                }
                for p in w.phases
            ],
        },
    }


def workload_from_document(payload: Mapping) -> WorkloadModel:
    try:
        w = payload["workload"]
        phases = tuple(
            PhaseSpec(
                cpu_work=float(p.get("cpu_work", 0.0)),
                mem_stall_s=float(p.get("mem_stall_s", 0.0)),
                disk_time_s={str(k): float(v) for k, v in p.get("disk_time_s", {}).items()},
                net_time_s={float(k): float(v) for k, v in p.get("net_time_s", {}).items()},
                overlap=float(p.get("overlap", 0.0)),
            )
            for p in w["phases"]
        )
        return WorkloadModel(workload_id=str(w["id"]), phases=phases)
    except (KeyError, TypeError, ValueError, InvalidInputError) as e:
        raise ParseError(f"malformed workload-model document: {e}") from e


def plan_to_document(plan: RunPlan) -> dict:
    return {
        "kind": "run-plan",
        "version": FORMAT_VERSION,
        "design": design_to_dict(plan.design),
        "steps": [
            {
                "action": s.action.value,
                "scheme": scheme_to_dict(s.scheme),
                "workload": s.workload_id,
                "mode": s.mode,
                "replicate": s.replicate,
            }
            for s in plan.steps
        ],
    }


def plan_from_document(payload: Mapping) -> RunPlan:
    try:
        design = design_from_dict(payload["design"])
        steps = tuple(
            PlanStep(
                action=Action(s["action"]),
                scheme=scheme_from_dict(s["scheme"]),
                workload_id=s.get("workload"),
                mode=s.get("mode"),
                replicate=s.get("replicate"),
            )
            for s in payload["steps"]
        )
        return RunPlan(design=design, steps=steps)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed run-plan document: {e}") from e


def parse_scale_observations(path) -> list[tuple[float, float, float]]:
    """CSV of ``scale,machines,runtime_s`` rows for the scale-model fit."""
    header_expect = ["scale", "machines", "runtime_s"]
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if header != header_expect:
        raise ParseError(f"{path}:1: header mismatch; expected {','.join(header_expect)!r}")
    obs = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            obs.append((float(row[0]), float(row[1]), float(row[2])))
        except (ValueError, IndexError) as e:
            raise ParseError(f"{path}:{lineno}: {e}") from e
    return obs
