"""Run-plan construction and sequential execution.

Plans are ordered hardware-config-major so a human swaps disks or retunes
the network as rarely as possible; tier changes appear as interactive
annotate steps because the tool cannot swap hardware itself. Memory-mode
measurements are preceded by an uncounted warmup run that populates the
cache, and the OS page cache is dropped after every measurement group.
"""

from __future__ import annotations

import shlex
import subprocess
import sys
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .cpufreq import FrequencyController, set_cpu_frequency
from .errors import (
    FreqsightError,
    FrequencyControlError,
    InvalidInputError,
    PauseRequiredError,
    TaintedRunError,
    UnsupportedFrequencyError,
    WorkloadCommandError,
)
from .model import (
    ExperimentDesign,
    MODE_MEMORY,
    ResourceScheme,
    RunRecord,
    hardware_configs,
    supported_indicators,
    validate_design,
)

# Cache-drop command for a common x86_64 Linux setup; override per site.
DEFAULT_CACHE_DROP_COMMAND = "sync && echo 3 > /proc/sys/vm/drop_caches"


class Action(str, Enum):
    SET_FREQUENCY = "set_frequency"
    ANNOTATE_SCHEME = "annotate_scheme"
    CLEAR_CACHE = "clear_cache"
    RUN_WORKLOAD = "run_workload"
    WARMUP_RUN = "warmup_run"


@dataclass(frozen=True)
class PlanStep:
    action: Action
    scheme: ResourceScheme
    workload_id: Optional[str] = None
    mode: Optional[str] = None
    replicate: Optional[int] = None


@dataclass(frozen=True)
class RunPlan:
    design: ExperimentDesign
    steps: tuple[PlanStep, ...]

    def measured_steps(self) -> tuple[PlanStep, ...]:
        return tuple(s for s in self.steps if s.action is Action.RUN_WORKLOAD)

    def warmup_steps(self) -> tuple[PlanStep, ...]:
        return tuple(s for s in self.steps if s.action is Action.WARMUP_RUN)


def build_run_matrix(
    design: ExperimentDesign,
    workloads: Sequence[str],
    modes: Optional[Iterable[str]] = None,
    indicators: Optional[Iterable[str]] = None,
    clear_between_replicates: bool = False,
) -> RunPlan:
    """Ordered plan covering required cells x replicates x workloads.

    Order: hardware config (baseline first, minimizing swap pauses), then
    frequency ascending, then workload, then mode, then replicate.
    """
    violations = validate_design(design)
    if violations:
        raise InvalidInputError(
            "invalid design: " + "; ".join(str(v) for v in violations)
        )
    use_modes = tuple(modes) if modes is not None else design.modes
    inds = tuple(indicators) if indicators is not None else supported_indicators(design)
    base = design.baseline
    steps: list[PlanStep] = []
    if not workloads:
        return RunPlan(design, ())

    prev_config = (base.disk_tier, base.network_bw)
    for (disk, net) in hardware_configs(design, inds):
        config_scheme = base.with_io(disk, net)
        if (disk, net) != prev_config:
            steps.append(PlanStep(Action.ANNOTATE_SCHEME, config_scheme))
        prev_config = (disk, net)
        for freq in design.all_freqs:
            scheme = config_scheme.with_freq(freq)
            steps.append(PlanStep(Action.SET_FREQUENCY, scheme))
            for workload_id in workloads:
                for mode in use_modes:
                    for rep in range(1, design.replicates + 1):
                        if mode == MODE_MEMORY:
                            steps.append(PlanStep(Action.WARMUP_RUN, scheme, workload_id, mode, rep))
                        steps.append(PlanStep(Action.RUN_WORKLOAD, scheme, workload_id, mode, rep))
                        if clear_between_replicates and rep < design.replicates:
                            steps.append(PlanStep(Action.CLEAR_CACHE, scheme, workload_id, mode, rep))
                    steps.append(PlanStep(Action.CLEAR_CACHE, scheme, workload_id, mode))
    return RunPlan(design, tuple(steps))


@dataclass(frozen=True)
class StepFailure:
    step_index: int
    kind: str  # frequency | pause_required | command_failed | cache_clear
    message: str
    output: str = ""


@dataclass(frozen=True)
class PlanExecution:
    """Outcome of a (possibly partial) plan run.

    ``cursor`` is the index of the step that failed and where a resumed
    execution should restart; None once the plan completed.
    """

    records: tuple[RunRecord, ...]
    cursor: Optional[int] = None
    failure: Optional[StepFailure] = None
    log: tuple[str, ...] = ()

    @property
    def completed(self) -> bool:
        return self.cursor is None


class ScriptedExecutor:
    """Mock executor replaying scripted durations; raises any exception
    placed in the script instead of a duration."""

    def __init__(self, script: Union[Sequence[Union[float, Exception]],
                                     Callable[[str, str, ResourceScheme], float]],
                 interactive: bool = False, fail_cache_clear: bool = False):
        self._script = script
        self._cursor = 0
        self.interactive = interactive
        self.fail_cache_clear = fail_cache_clear
        self.actions: list[str] = []

    def run_workload(self, workload_id: str, mode: str, scheme: ResourceScheme) -> float:
        if callable(self._script):
            duration = self._script(workload_id, mode, scheme)
        else:
            if self._cursor >= len(self._script):
                raise WorkloadCommandError("scripted executor ran out of durations")
            duration = self._script[self._cursor]
            self._cursor += 1
        if isinstance(duration, Exception):
            raise duration
        self.actions.append(f"run {workload_id} {mode} {scheme.label()} -> {duration:g}s")
        return float(duration)

    def clear_cache(self) -> None:
        if self.fail_cache_clear:
            raise TaintedRunError("scripted privilege failure while dropping caches")
        self.actions.append("clear_cache")

    def confirm(self, message: str, scheme: ResourceScheme) -> None:
        if not self.interactive:
            raise PauseRequiredError(
                f"interactive confirmation required but session is non-interactive: {message}"
            )
        self.actions.append(f"confirmed: {message}")


class ShellExecutor:
    """Runs workloads through shell command templates and measures
    wall-clock time around them.

    Templates may reference {workload_id}, {mode}, {scheme.cpu_freq},
    {scheme.disk_tier}, {scheme.network_bw} and {scheme.memory_tier}.
    Hardware changes pause for operator confirmation unless
    ``hardware_change_command`` scripts them (e.g. a traffic-shaping
    command for network bandwidth changes).
    """

    def __init__(
        self,
        command_templates: Mapping[str, str],
        cache_drop_command: Optional[str] = DEFAULT_CACHE_DROP_COMMAND,
        interactive: bool = False,
        hardware_change_command: Optional[str] = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.command_templates = dict(command_templates)
        self.cache_drop_command = cache_drop_command
        self.interactive = interactive
        self.hardware_change_command = hardware_change_command
        self._clock = clock
        self.actions: list[str] = []

    def _run_shell(self, command: str) -> subprocess.CompletedProcess:
        return subprocess.run(
            command, shell=True, capture_output=True, text=True,
        )

    def run_workload(self, workload_id: str, mode: str, scheme: ResourceScheme) -> float:
        template = self.command_templates.get(workload_id)
        if template is None:
            raise WorkloadCommandError(f"no command template configured for workload {workload_id!r}")
        command = template.format(workload_id=workload_id, mode=mode, scheme=scheme)
        start = self._clock()
        proc = self._run_shell(command)
        elapsed = self._clock() - start
        if proc.returncode != 0:
            raise WorkloadCommandError(
                f"workload command exited {proc.returncode}: {shlex.quote(command)}",
                output=(proc.stdout or "") + (proc.stderr or ""),
            )
        self.actions.append(f"run {workload_id} {mode} {scheme.label()} -> {elapsed:.3f}s")
        return elapsed

    def clear_cache(self) -> None:
        if not self.cache_drop_command:
            raise TaintedRunError("no cache-drop command configured")
        proc = self._run_shell(self.cache_drop_command)
        if proc.returncode != 0:
            raise TaintedRunError(
                f"cache-drop command exited {proc.returncode}; measurements around "
                f"this point are tainted: {(proc.stdout or '') + (proc.stderr or '')}"
            )
        self.actions.append("clear_cache")

    def confirm(self, message: str, scheme: ResourceScheme) -> None:
        if self.hardware_change_command:
            proc = self._run_shell(self.hardware_change_command.format(scheme=scheme))
            if proc.returncode != 0:
                raise PauseRequiredError(
                    f"hardware-change command exited {proc.returncode} for: {message}\n"
                    f"{(proc.stdout or '') + (proc.stderr or '')}"
                )
            self.actions.append(f"applied: {message}")
            return
        if not self.interactive or not sys.stdin or not sys.stdin.isatty():
            raise PauseRequiredError(
                f"interactive confirmation required but session is non-interactive: {message}"
            )
        input(f"{message}\npress Enter once the hardware change is in place... ")
        self.actions.append(f"confirmed: {message}")


def clear_page_cache(executor) -> None:
    """Drop the OS buffer cache through the executor's privilege hook.

    A failure marks the run tainted instead of silently continuing.
    """
    executor.clear_cache()


def execute_plan(
    plan: RunPlan,
    executor,
    controller: FrequencyController,
    start: int = 0,
) -> PlanExecution:
    """Execute steps strictly in order from ``start``.

    On any step failure the plan halts and the partial records come back
    with a resumption cursor pointing at the failed step.
    """
    records: list[RunRecord] = []
    log: list[str] = []

    def halt(index: int, kind: str, exc: FreqsightError) -> PlanExecution:
        output = getattr(exc, "output", "")
        log.append(f"step {index}: FAILED ({kind}): {exc}")
        return PlanExecution(
            records=tuple(records),
            cursor=index,
            failure=StepFailure(index, kind, str(exc), output=output),
            log=tuple(log),
        )

    for index in range(start, len(plan.steps)):
        step = plan.steps[index]
        if step.action is Action.SET_FREQUENCY:
            try:
                set_cpu_frequency(controller, step.scheme.cpu_freq)
            except (UnsupportedFrequencyError, FrequencyControlError) as e:
                return halt(index, "frequency", e)
            log.append(f"step {index}: set_frequency {step.scheme.cpu_freq:g} GHz")
        elif step.action is Action.ANNOTATE_SCHEME:
            message = (
                f"hardware change: disk={step.scheme.disk_tier}, "
                f"network={step.scheme.network_bw:g} Gbps"
            )
            try:
                executor.confirm(message, step.scheme)
            except PauseRequiredError as e:
                return halt(index, "pause_required", e)
            log.append(f"step {index}: annotate_scheme {step.scheme.label()}")
        elif step.action is Action.CLEAR_CACHE:
            try:
                clear_page_cache(executor)
            except TaintedRunError as e:
                return halt(index, "cache_clear", e)
            log.append(f"step {index}: clear_cache")
        else:
            try:
                runtime = executor.run_workload(step.workload_id, step.mode, step.scheme)
            except WorkloadCommandError as e:
                return halt(index, "command_failed", e)
            record = RunRecord(
                workload_id=step.workload_id,
                mode=step.mode,
                scheme=step.scheme,
                replicate=step.replicate,
                runtime_s=runtime,
                warmup=step.action is Action.WARMUP_RUN,
            )
            records.append(record)
            log.append(
                f"step {index}: {step.action.value} {step.workload_id} {step.mode} "
                f"rep {step.replicate} -> {runtime:g}s"
            )
    return PlanExecution(records=tuple(records), log=tuple(log))
