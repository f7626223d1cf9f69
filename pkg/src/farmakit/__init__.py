"""farmakit: functional ARMA models, FPCA reduction and vector prediction.

Curves live in a finite Fourier basis; operators are K x K matrices acting on
basis coordinates. The forecasting route projects onto ``d`` functional
principal components, predicts the score vector with a VARMA best linear
predictor and maps the result back to a curve.
"""

__version__ = "0.1.0"

from ._accel import NUMBA_AVAILABLE, NUMBA_ENABLED
from .exceptions import (
    BasisMismatchError,
    FarmakitError,
    NonStationaryError,
    NotCausalError,
    RankDeficientError,
)
from .fnspace import (
    BasisSpec,
    FunctionSample,
    FunctionSeries,
    evaluate,
    inner_product,
    minute_grid,
    norm,
    smooth_series,
    smooth_to_basis,
)
from .hsop import KernelOperator, check_contraction, hs_norm, op_norm, state_space_lift
from .fpca import EigenSystem, ScoreSeries, compute_scores, cpv_select, eigendecompose, estimate_covariance, fpca
from .varma import (
    PredictorWeights,
    VarmaModel,
    brute_force_blp,
    durbin_levinson_predict,
    fit_varma,
    innovations_predict,
)
from .farma import FarmaModel, causal_solution, load_model, project_model, save_model, simulate
from .forecast import ErrorTable, ForecastConfig, algorithm1, bound_experiment, gamma_bound, rolling_cv

__all__ = [
    "__version__",
    "NUMBA_AVAILABLE",
    "NUMBA_ENABLED",
    "FarmakitError",
    "BasisMismatchError",
    "RankDeficientError",
    "NotCausalError",
    "NonStationaryError",
    "BasisSpec",
    "FunctionSample",
    "FunctionSeries",
    "evaluate",
    "inner_product",
    "minute_grid",
    "norm",
    "smooth_series",
    "smooth_to_basis",
    "KernelOperator",
    "check_contraction",
    "hs_norm",
    "op_norm",
    "state_space_lift",
    "EigenSystem",
    "ScoreSeries",
    "compute_scores",
    "cpv_select",
    "eigendecompose",
    "estimate_covariance",
    "fpca",
    "PredictorWeights",
    "VarmaModel",
    "brute_force_blp",
    "durbin_levinson_predict",
    "fit_varma",
    "innovations_predict",
    "FarmaModel",
    "causal_solution",
    "load_model",
    "project_model",
    "save_model",
    "simulate",
    "ErrorTable",
    "ForecastConfig",
    "algorithm1",
    "bound_experiment",
    "gamma_bound",
    "rolling_cv",
]
