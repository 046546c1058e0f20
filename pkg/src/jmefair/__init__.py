"""Joint multisided exposure fairness: metrics, policies, and training."""

from .analysis import (
    SystemInstance,
    TradeoffCurve,
    auc_tradeoff,
    correlation_matrix,
    kendall_tau,
    min_max_normalize,
    paired_t_test,
)
from .exposure import (
    BrowsingModel,
    Catalog,
    ExposureMatrix,
    deviations,
    exposure_at_rank,
    exposure_of_ranking,
    random_exposure,
    target_exposure,
)
from .metrics import (
    METRICS,
    GroupMap,
    MetricReport,
    ag_f,
    ai_f,
    collapse,
    decompose,
    gg_f,
    gi_f,
    ig_f,
    ii_f,
)
from .policy import PLPolicy, deterministic_exposure, expected_exposure_mc, pl_sample
from .trainer import MFModel, TrainerConfig, grad_check, ndcg_at_k, train

__version__ = "0.1.0"
