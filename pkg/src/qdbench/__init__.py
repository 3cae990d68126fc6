"""Quality-diversity optimization library and benchmark harness."""

from .archive import ArchiveDim, ArchiveSpec, Elite, GridArchive, InsertOutcome, InsertStatus
from .cma import CmaEs
from .emitters import (
    EvaluatedSolution,
    GaussianEmitter,
    GaussianEmitterCfg,
    ImprovementEmitter,
    ImprovementEmitterCfg,
    RandomEmitter,
    RandomEmitterCfg,
)
from .errors import EvaluationFault, ProtocolError, UsageError
from .problems import (
    EvaluationResult,
    ExternalEvaluator,
    ProblemDef,
    SampleTable,
    get_problem,
    grid_sphere_problem,
    list_problem_ids,
    paper_problem,
    peaks_problem,
    tabular_load,
    tabular_predict,
)
from .reporting import (
    AggregateReport,
    IterationRecord,
    RunReport,
    aggregate,
    read_metrics_csv,
    render_heatmap,
    write_metrics_csv,
)
from .scheduler import OptimizerSpec, RunSpec, preset, run
from .search_space import (
    ParamDef,
    SearchSpace,
    clip_unit,
    identity_space,
    ranger_space,
    xgboost_space,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport", "ArchiveDim", "ArchiveSpec", "CmaEs", "Elite",
    "EvaluatedSolution", "EvaluationFault", "EvaluationResult",
    "ExternalEvaluator", "GaussianEmitter", "GaussianEmitterCfg", "GridArchive",
    "ImprovementEmitter", "ImprovementEmitterCfg", "InsertOutcome",
    "InsertStatus", "IterationRecord", "OptimizerSpec", "ParamDef",
    "ProblemDef", "ProtocolError", "RandomEmitter", "RandomEmitterCfg",
    "RunReport", "RunSpec", "SampleTable", "SearchSpace", "UsageError",
    "aggregate", "clip_unit", "get_problem", "grid_sphere_problem",
    "identity_space", "list_problem_ids", "paper_problem", "peaks_problem",
    "preset", "ranger_space", "read_metrics_csv", "render_heatmap", "run",
    "tabular_load", "tabular_predict", "write_metrics_csv", "xgboost_space",
]
