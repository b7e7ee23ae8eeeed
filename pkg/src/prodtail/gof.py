"""Goodness-of-fit and model comparison.

Information distinguishability (100 * exp(-KL) between a binned empirical
density and a model), AIC, relative likelihoods per data point, and
repeated K-fold cross-validation of out-of-sample log-likelihood.

The binned KL uses an equal-width histogram over the trimmed range and
integrates the model per bin (CDF differences) so wide bins stay
well-defined; both densities are renormalized over the same range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateSampleError, InvalidParameterError, NumericalError, SampleSizeError

__all__ = [
    "EmpiricalDensity",
    "GofReport",
    "CvResult",
    "empirical_density",
    "soofi_id",
    "aic",
    "relative_likelihood_aic",
    "relative_likelihood_cv",
    "kfold_cv",
]

DEFAULT_TRIM = 0.0025
DEFAULT_BINS = 500
DEFAULT_MIN_N = 1000

# A fitter maps a training sample to a model exposing vectorized logpdf/cdf.
Fitter = Callable[[np.ndarray], "FittedModel"]


class FittedModel:
    """Minimal duck type for comparison: callables for logpdf and cdf."""

    def __init__(self, logpdf: Callable[[np.ndarray], np.ndarray],
                 cdf: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self.logpdf = logpdf
        self.cdf = cdf
        self.label = label


@dataclass(frozen=True)
class EmpiricalDensity:
    edges: np.ndarray      # bin edges, len bins+1
    density: np.ndarray    # renormalized to integrate to 1 over the edges
    n_used: int            # observations inside the trimmed range

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def probabilities(self) -> np.ndarray:
        return self.density * self.widths


def _trim_range(values: np.ndarray, trim: float) -> tuple[float, float]:
    values = np.sort(values)
    k = int(values.size * trim)
    kept = values[k: values.size - k] if k > 0 else values
    if kept.size < 2 or kept[0] == kept[-1]:
        raise DegenerateSampleError("trimmed sample has no spread")
    return float(kept[0]), float(kept[-1])


def empirical_density(values: np.ndarray, trim: float = DEFAULT_TRIM,
                      bins: int = DEFAULT_BINS, min_n: int = DEFAULT_MIN_N) -> EmpiricalDensity:
    """Equal-width histogram density over the trimmed range.

    The top and bottom `trim` fraction of observations are cut (order
    statistics) before binning; the histogram is normalized to integrate to
    one over the remaining range.
    """
    values = np.asarray(values, dtype=float)
    if values.size < min_n:
        raise SampleSizeError(f"need at least {min_n} observations, got {values.size}")
    lo, hi = _trim_range(values, trim)
    inside = values[(values >= lo) & (values <= hi)]
    counts, edges = np.histogram(inside, bins=bins, range=(lo, hi))
    widths = np.diff(edges)
    density = counts / (counts.sum() * widths)
    return EmpiricalDensity(edges=edges, density=density, n_used=int(inside.size))


def soofi_id(values: np.ndarray, model_cdf: Callable[[np.ndarray], np.ndarray],
             trim: float = DEFAULT_TRIM, bins: int = DEFAULT_BINS,
             min_n: int = DEFAULT_MIN_N) -> float:
    """Information distinguishability on a 0-100 scale: 100 * exp(-KL(p || q)).

    p is the binned empirical density; q is the model integrated per bin and
    renormalized over the trimmed range.  100 means the model reproduces the
    binned empirical distribution exactly.  If the model assigns zero mass to
    an occupied bin the divergence is infinite and the score is 0.
    """
    emp = empirical_density(values, trim=trim, bins=bins, min_n=min_n)
    cdf_vals = np.asarray(model_cdf(emp.edges), dtype=float)
    bin_q = np.diff(cdf_vals)
    total_q = cdf_vals[-1] - cdf_vals[0]
    if total_q <= 0.0:
        warnings.warn("model has no mass on the trimmed range; ID = 0")
        return 0.0
    q = bin_q / total_q
    p = emp.probabilities
    occupied = p > 0.0
    if np.any(q[occupied] <= 0.0):
        warnings.warn("model assigns zero mass to an occupied bin; ID = 0")
        return 0.0
    kl = float(np.sum(p[occupied] * np.log(p[occupied] / q[occupied])))
    return 100.0 * math.exp(-kl)


def aic(loglik: float, k_params: int) -> float:
    """Akaike information criterion: 2k - 2*loglik."""
    return 2.0 * k_params - 2.0 * loglik


def relative_likelihood_aic(aic_main: float, aic_ref: float, n: int) -> float:
    """exp((AIC_main - AIC_ref) / (2n)); < 1 when the main model is better."""
    return math.exp((aic_main - aic_ref) / (2.0 * n))


def relative_likelihood_cv(cv_main: float, cv_ref: float, n: int) -> float:
    """exp((CV_ref - CV_main) / n) on total holdout log-likelihoods;
    < 1 when the main model predicts better."""
    return math.exp((cv_ref - cv_main) / n)


@dataclass(frozen=True)
class GofReport:
    soofi_id: float
    aic: float
    mean_loglik: float   # in-sample, per observation
    cv_loglik: float     # holdout mean per observation
    n: int
    k_params: int = 4

    def to_dict(self) -> dict:
        return {
            "soofi_id": self.soofi_id,
            "aic": self.aic,
            "mean_loglik": self.mean_loglik,
            "cv_loglik": self.cv_loglik,
            "n": self.n,
            "k_params": self.k_params,
        }


@dataclass(frozen=True)
class CvResult:
    """Repeated K-fold cross-validation summary for a set of models."""

    cv_loglik: dict[str, float]       # holdout mean log-likelihood per observation
    cv_total: dict[str, float]        # per-repetition total, averaged over repetitions
    n: int
    k: int
    reps: int
    skipped_folds: int

    def relative_likelihood(self, main: str, ref: str) -> float:
        return relative_likelihood_cv(self.cv_total[main], self.cv_total[ref], self.n)


def kfold_cv(values: np.ndarray, fitters: Mapping[str, Fitter], k: int = 10,
             reps: int = 10, seed: int = 0,
             max_failure_share: float = 0.10) -> CvResult:
    """Repeated random K-fold CV of holdout log-likelihood for each fitter.

    Each repetition draws an independent random K-partition; every model is
    fit on K-1 folds and scored on the holdout.  A fold where a fitter fails
    is skipped for all models (and counted); more than `max_failure_share`
    skipped folds is an error.  Deterministic for a given seed.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 10 * k:
        raise SampleSizeError(f"need at least {10 * k} observations for k={k}")
    rng = np.random.default_rng(seed)
    totals = {name: 0.0 for name in fitters}
    counts = {name: 0 for name in fitters}
    per_rep_totals = {name: [] for name in fitters}
    skipped = 0
    for _ in range(reps):
        perm = rng.permutation(n)
        folds = np.array_split(perm, k)
        rep_tot = {name: 0.0 for name in fitters}
        rep_cnt = 0
        for fold in folds:
            holdout = values[fold]
            train = values[np.setdiff1d(perm, fold, assume_unique=True)]
            models = {}
            try:
                for name, fitter in fitters.items():
                    models[name] = fitter(train)
            except (DegenerateSampleError, NumericalError, SampleSizeError, InvalidParameterError):
                skipped += 1
                continue
            for name, model in models.items():
                ll = float(np.sum(model.logpdf(holdout)))
                rep_tot[name] += ll
                totals[name] += ll
                counts[name] += holdout.size
            rep_cnt += holdout.size
        for name in fitters:
            if rep_cnt:
                per_rep_totals[name].append(rep_tot[name] * (n / rep_cnt))
    if skipped > max_failure_share * k * reps:
        raise NumericalError(f"{skipped}/{k * reps} folds skipped (> {max_failure_share:.0%})")
    cv_mean = {name: totals[name] / counts[name] for name in fitters}
    cv_total = {name: float(np.mean(per_rep_totals[name])) for name in fitters}
    return CvResult(cv_loglik=cv_mean, cv_total=cv_total, n=n, k=k, reps=reps,
                    skipped_folds=skipped)
