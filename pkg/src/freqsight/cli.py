"""Command-line surface.

One config document carries the experiment design and runner settings;
flags override config values. Exit codes: 0 success, 1 validation
failure, 2 incomplete matrix, 3 execution failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .cpufreq import (
    CPUFREQ_ROOT_ENV,
    DEFAULT_SYSFS_ROOT,
    MockFrequencyController,
    SysfsFrequencyController,
)
from .errors import (
    FreqsightError,
    IncompleteMatrixError,
    InvalidInputError,
    ParseError,
)
from .indicators import Thresholds
from .model import ExperimentDesign, validate_design
from .orchestrator import (
    DEFAULT_CACHE_DROP_COMMAND,
    Action,
    ShellExecutor,
    build_run_matrix,
    execute_plan,
)
from .report import (
    attach_utilization,
    build_report,
    design_from_dict,
    dumps_document,
    emit_plot_data,
    parse_runs,
    parse_scale_observations,
    parse_utilization,
    plan_from_document,
    plan_to_document,
    read_json_document,
    records_to_document,
    render_report,
    report_from_document,
    report_to_document,
    workload_from_document,
    write_json_document,
    write_records_csv,
)
from .simulator import fit_scale_model, predict_rt, simulate_records

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INCOMPLETE = 2
EXIT_EXECUTION = 3


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: cannot read config: {e}") from e
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return payload


def _design_from_config(config: dict, args) -> ExperimentDesign:
    if "design" not in config:
        raise InvalidInputError("config file must contain a 'design' section")
    design = design_from_dict(config["design"])
    overrides = {}
    if getattr(args, "replicates", None) is not None:
        overrides["replicates"] = args.replicates
    if getattr(args, "modes", None):
        overrides["modes"] = tuple(args.modes)
    if getattr(args, "pair_policy", None) is not None:
        overrides["pair_policy"] = args.pair_policy
    if overrides:
        from dataclasses import replace

        design = replace(design, **overrides)
    return design


def _check_design(design: ExperimentDesign) -> bool:
    violations = validate_design(design)
    for v in violations:
        print(f"design violation: {v}", file=sys.stderr)
    return not violations


def _write_or_print(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_plan(args) -> int:
    config = _load_config(args.config)
    design = _design_from_config(config, args)
    if not _check_design(design):
        return EXIT_VALIDATION
    plan = build_run_matrix(
        design,
        workloads=args.workloads,
        modes=tuple(args.modes) if args.modes else None,
        clear_between_replicates=args.clear_between_replicates,
    )
    write_json_document(plan_to_document(plan), args.out)
    print(
        f"plan written to {args.out}: {len(plan.steps)} steps, "
        f"{len(plan.measured_steps())} measured runs, "
        f"{len(plan.warmup_steps())} warmup runs"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_config(args.config)
    run_cfg = config.get("run", {})
    plan = plan_from_document(read_json_document(args.plan, "run-plan"))

    if args.mock_frequencies:
        controller = MockFrequencyController(plan.design.all_freqs)
    else:
        root = (
            args.cpufreq_root
            or os.environ.get(CPUFREQ_ROOT_ENV)
            or run_cfg.get("cpufreq_root")
            or DEFAULT_SYSFS_ROOT
        )
        controller = SysfsFrequencyController(root=root)

    templates = run_cfg.get("command_templates", {})
    needs_commands = any(
        s.action in (Action.RUN_WORKLOAD, Action.WARMUP_RUN) for s in plan.steps
    )
    if needs_commands and not templates:
        print("config run.command_templates is required to execute workloads", file=sys.stderr)
        return EXIT_VALIDATION
    executor = ShellExecutor(
        command_templates=templates,
        cache_drop_command=run_cfg.get("cache_drop_command", DEFAULT_CACHE_DROP_COMMAND),
        interactive=args.interactive or bool(run_cfg.get("interactive", False)),
        hardware_change_command=run_cfg.get("hardware_change_command"),
    )
    result = execute_plan(plan, executor, controller, start=args.start)
    write_records_csv(result.records, args.out)
    print(f"{len(result.records)} record(s) written to {args.out}")
    if not result.completed:
        f = result.failure
        print(
            f"plan halted at step {f.step_index} ({f.kind}): {f.message}\n"
            f"resume with --start {f.step_index}",
            file=sys.stderr,
        )
        if f.output:
            print(f.output, file=sys.stderr)
        return EXIT_EXECUTION
    return EXIT_OK


def cmd_ingest(args) -> int:
    records = []
    for path in args.runs:
        records.extend(parse_runs(path, format=args.format))
    if args.utilization:
        records = attach_utilization(records, parse_utilization(args.utilization))
    write_json_document(records_to_document(records), args.out)
    print(f"{len(records)} record(s) ingested to {args.out}")
    return EXIT_OK


def cmd_compute(args) -> int:
    config = _load_config(args.config)
    design = _design_from_config(config, args)
    if not _check_design(design):
        return EXIT_VALIDATION
    records = parse_runs(args.records)
    if args.utilization:
        records = attach_utilization(records, parse_utilization(args.utilization))
    thresholds = Thresholds(
        util_high=args.util_high, util_low=args.util_low,
        ri_high=args.ri_high, ri_low=args.ri_low,
    )
    doc = build_report(records, design, thresholds=thresholds)
    write_json_document(report_to_document(doc), args.out)
    print(f"report written to {args.out}")
    if doc.incomplete():
        print(
            f"matrix incomplete: {len(doc.completeness.missing)} missing cell(s); "
            "some indicators are absent",
            file=sys.stderr,
        )
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    design = _design_from_config(config, args)
    if not _check_design(design):
        return EXIT_VALIDATION
    workload = workload_from_document(read_json_document(args.workload, "workload-model"))
    records = simulate_records(
        workload,
        design,
        modes=tuple(args.modes) if args.modes else None,
        replicates=args.replicates,
        sigma_rel=args.sigma,
        seed=args.seed,
        warmups=not args.no_warmups,
    )
    write_records_csv(records, args.out)
    print(f"{len(records)} synthetic record(s) written to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    observations = parse_scale_observations(args.observations)
    model = fit_scale_model(observations)
    print(f"theta1 (scale/machines): {model.theta1!r}")
    print(f"theta2 (ln machines):    {model.theta2!r}")
    print(f"theta3 (machines):       {model.theta3!r}")
    print(f"theta4 (fixed):          {model.theta4!r}")
    print(f"residual norm:           {model.residual_norm!r}")
    if args.predict:
        scale, machines = args.predict
        print(f"predicted runtime at scale={scale:g}, machines={machines:g}: "
              f"{predict_rt(model, scale, machines)!r}")
    return EXIT_OK


def cmd_report(args) -> int:
    doc = report_from_document(read_json_document(args.report, "report"))
    if args.plot_data:
        payload = emit_plot_data([e.indicators for e in doc.entries], group_by=args.group_by)
        _write_or_print(dumps_document(payload), args.out)
    else:
        _write_or_print(render_report(doc, format=args.format), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqsight",
        description="Resource-bottleneck indicators from CPU-frequency-scaling runtimes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_design_overrides(p):
        p.add_argument("--config", required=True, help="config JSON with a 'design' section")
        p.add_argument("--replicates", type=int, help="override design.replicates")
        p.add_argument("--modes", nargs="+", help="override design.modes")
        p.add_argument("--pair-policy", dest="pair_policy",
                       choices=["best-pair-only", "full-cross-product"],
                       help="override design.pair_policy")

    p = sub.add_parser("plan", help="build an ordered run plan from the design")
    add_design_overrides(p)
    p.add_argument("--workloads", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clear-between-replicates", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="execute a plan and collect run records")
    p.add_argument("--plan", required=True)
    p.add_argument("--config", help="config JSON with a 'run' section")
    p.add_argument("--out", required=True, help="records CSV to write")
    p.add_argument("--start", type=int, default=0, help="resume cursor")
    p.add_argument("--cpufreq-root", dest="cpufreq_root",
                   help=f"frequency interface root (also {CPUFREQ_ROOT_ENV})")
    p.add_argument("--mock-frequencies", action="store_true",
                   help="use the in-memory frequency controller")
    p.add_argument("--interactive", action="store_true",
                   help="allow pauses for hardware changes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="validate run files into a record store")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--utilization")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("compute", help="records -> indicator report")
    add_design_overrides(p)
    p.add_argument("--records", required=True)
    p.add_argument("--utilization")
    p.add_argument("--out", required=True)
    p.add_argument("--util-high", type=float, default=60.0)
    p.add_argument("--util-low", type=float, default=30.0)
    p.add_argument("--ri-high", type=float, default=0.5)
    p.add_argument("--ri-low", type=float, default=0.3)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("simulate", help="workload model -> synthetic records")
    add_design_overrides(p)
    p.add_argument("--workload", required=True, help="workload-model JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0, help="relative noise stddev")
    p.add_argument("--no-warmups", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the runtime scale model")
    p.add_argument("--observations", required=True, help="CSV of scale,machines,runtime_s")
    p.add_argument("--predict", nargs=2, type=float, metavar=("SCALE", "MACHINES"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="render a report document")
    p.add_argument("--report", required=True, help="report JSON from compute")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--plot-data", action="store_true", help="emit grouped bar series instead")
    p.add_argument("--group-by", choices=["mode", "workload", "indicator"], default="mode")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IncompleteMatrixError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except FreqsightError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
