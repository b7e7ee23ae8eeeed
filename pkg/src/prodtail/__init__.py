"""prodtail: heavy-tailed distribution toolkit for firm productivity panels.

Fits and compares Levy alpha-stable and asymmetric exponential power (AEP)
models on grouped firm-year data, tests moments for infiniteness, reports
tail-aware dispersion metrics, and reproduces the subsample-std scaling
experiment.
"""

__version__ = "0.1.0"

from .aep import AEPParams, aep_cdf, aep_fit_lmoments, aep_pdf, aep_quantile, aep_sample
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateSampleError,
    InvalidParameterError,
    NumericalError,
    ProdtailError,
    SampleSizeError,
)
from .gof import aic, empirical_density, kfold_cv, soofi_id
from .mcculloch import (
    FitResult,
    McCullochGrid,
    QuantileSummary,
    bootstrap_se,
    build_grid,
    fit_mle,
    fit_quantile,
)
from .moment_test import MomentTestConfig, MomentTestResult, trapani_test
from .scaling import subsample_std_curve, theoretical_exponent, typical_max
from .stable import StableParams, cdf, char_fn, pdf, quantile, sample, tail_prob_asymptotic

__all__ = [
    "__version__",
    "AEPParams", "aep_cdf", "aep_fit_lmoments", "aep_pdf", "aep_quantile", "aep_sample",
    "ProdtailError", "InvalidParameterError", "NumericalError", "ConvergenceError",
    "SampleSizeError", "DegenerateSampleError", "DataError",
    "aic", "empirical_density", "kfold_cv", "soofi_id",
    "FitResult", "McCullochGrid", "QuantileSummary", "bootstrap_se", "build_grid",
    "fit_mle", "fit_quantile",
    "MomentTestConfig", "MomentTestResult", "trapani_test",
    "subsample_std_curve", "theoretical_exponent", "typical_max",
    "StableParams", "cdf", "char_fn", "pdf", "quantile", "sample", "tail_prob_asymptotic",
]
