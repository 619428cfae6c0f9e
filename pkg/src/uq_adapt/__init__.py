"""Adaptive uncertainty quantification: kernel PCA + Ordinary Kriging surrogates grown level by level."""

from .clustering import ClusterResult, align_labels, cluster_shares, kmeans
from .driver import (
    LevelRecord,
    RunState,
    UQReport,
    check_convergence,
    qoi_average,
    resume,
    run_adaptive,
    run_level,
    snapshot,
    uq_report,
)
from .evaluator import BenchmarkSpec, EvaluationRecord, builtin_benchmark, evaluate_batch, mode_oracle
from .param_space import (
    ConfigError,
    ParamSpace,
    RunConfig,
    benchmark_config,
    norm_cdf,
    norm_ppf,
    parse_config,
    serialize_config,
    to_physical,
)
from .reduction import KernelDescriptor, ReducedModel, backward_map, fit_kpca, kernel_eval, project, select_kernel
from .sampling import halton_block, halton_point, mc_block, saltelli_design
from .sensitivity import SobolResult, first_order, second_order, sobol_analysis, total_order
from .surrogate import (
    KrigingModel,
    SurrogateBank,
    Variogram,
    empirical_variogram,
    fit_ok,
    fit_spherical,
    predict,
    predict_bank,
)

__version__ = "0.1.0"
