"""freqsight: resource-bottleneck indicators for data-processing systems,
built from running times measured under CPU frequency scaling and I/O
upgrades, with an experiment orchestrator and a synthetic-workload
verification oracle."""

__version__ = "0.1.0"

from .errors import (
    DegenerateFitError,
    FreqsightError,
    FrequencyControlError,
    IncompleteMatrixError,
    InvalidInputError,
    ParseError,
    PauseRequiredError,
    TaintedRunError,
    UnmatchedRecordError,
    UnsupportedFrequencyError,
    WorkloadCommandError,
)
from .model import (
    CRI,
    DRI,
    INDICATORS,
    MRI,
    MODES,
    NRI,
    CellStats,
    ExperimentDesign,
    ResourceScheme,
    RunRecord,
    RuntimeMatrix,
    UtilizationSummary,
    Violation,
    required_cells,
    supported_indicators,
    validate_design,
)
from .indicators import (
    DiagnosisReport,
    Flag,
    IndicatorSet,
    IndicatorValue,
    Ranking,
    Thresholds,
    compute_all,
    cpi,
    cri,
    diagnose,
    dri,
    mri,
    nri,
    rank_bottleneck,
)
from .simulator import (
    PhaseSpec,
    ResourceShares,
    ScaleModel,
    WorkloadModel,
    WorkloadParams,
    add_noise,
    fit_scale_model,
    gen_random_workload,
    ground_truth_shares,
    predict_rt,
    simulate_records,
    simulate_rt,
)
from .cpufreq import (
    FrequencyController,
    MockFrequencyController,
    SysfsFrequencyController,
    set_cpu_frequency,
)
from .orchestrator import (
    Action,
    PlanExecution,
    PlanStep,
    RunPlan,
    ScriptedExecutor,
    ShellExecutor,
    StepFailure,
    build_run_matrix,
    clear_page_cache,
    execute_plan,
)
from .report import (
    ReportDocument,
    aggregate,
    build_report,
    emit_plot_data,
    parse_runs,
    render_report,
)
