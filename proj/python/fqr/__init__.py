"""Penalized quantile regression with functional covariates and random intercepts."""

from ._core import (
    Dataset,
    FitResult,
    ModelSpec,
    NumericalError,
    SimTruth,
    SmoothingParams,
    ValidationError,
    __version__,
    bootstrap,
    check_loss,
    compare_models,
    curve_from_coefficients,
    default_bandwidth,
    fit,
    fpca_smooth,
    ingest,
    load_fit,
    model_based_se,
    oracle_qreg,
    predict_quantile,
    quantile_difference,
    save_fit,
    simulate,
    smooth_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
