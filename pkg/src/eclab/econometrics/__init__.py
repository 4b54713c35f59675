"""Regression estimators: OLS, logit and 2SLS with econometric standard errors."""

from .iv import InstrumentResult, TwoStageLeastSquares, build_similarity_instrument, tsls
from .linear import OLS, ols
from .logit import Logit, logit
from .paper_models import ResultBundle, merge_country_table, run_paper_models
from .results import IvResult, RegressionResult, stars
from .spec import ModelSpec

__all__ = [
    "InstrumentResult",
    "IvResult",
    "Logit",
    "ModelSpec",
    "OLS",
    "RegressionResult",
    "ResultBundle",
    "TwoStageLeastSquares",
    "build_similarity_instrument",
    "logit",
    "merge_country_table",
    "ols",
    "run_paper_models",
    "stars",
    "tsls",
]
