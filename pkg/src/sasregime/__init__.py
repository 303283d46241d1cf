"""Sequential advantage selection of prescriptive variables for treatment regimes."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    Dataset,
    FittedQModel,
    GenerativeSpec,
    Observational,
    Randomized,
    RegimeReport,
    SelectionTrace,
    Step,
    VariableSet,
    validate_dataset,
)
from .regression import fit_q_model, ols_fit, predict_q  # noqa: E402
from .selection import s_score_all, sas_select, sequential_advantage, solution_path  # noqa: E402
from .evaluation import Regime, error_rate, ipw_value, mc_value, regime_from_q, tdr_tp  # noqa: E402
from .comparators import lasso_alearning_fit, lasso_regime  # noqa: E402
from .simgen import generate, scenario, true_regime  # noqa: E402

__all__ = [
    "Dataset", "FittedQModel", "GenerativeSpec", "Observational", "Randomized",
    "RegimeReport", "SelectionTrace", "Step", "VariableSet", "validate_dataset",
    "fit_q_model", "ols_fit", "predict_q",
    "s_score_all", "sas_select", "sequential_advantage", "solution_path",
    "Regime", "error_rate", "ipw_value", "mc_value", "regime_from_q", "tdr_tp",
    "lasso_alearning_fit", "lasso_regime",
    "generate", "scenario", "true_regime",
]
