"""Quantile-based estimation of stable parameters, with MLE refinement.

The estimator maps five sample quantiles through tabulated functions of
(alpha, beta):

    phi1 = max((x95 - x05) / (x75 - x25), 2.439)
    phi2 = (x95 + x05 - 2*x50) / (x95 - x05)
    phi3 = (x75 - x25) / gamma
    phi4 = (delta - x50) / gamma        # location relation, see note

(phi1, phi2) are inverted to (alpha, beta) by bilinear interpolation on a
numerically generated grid; gamma and delta are then recovered from phi3
and phi4.  The grid is built from this package's own quantile function
rather than transcribed from published tables, and can be cached to disk.

Note on phi4: the textbook location relation carries an extra
beta*tan(pi*alpha/2) term that cancels exactly when the same convention is
used for tabulation and inversion.  The grid stores the cancelled
(continuous-at-alpha=1) form; delta_hat = x50 + gamma_hat * phi4(alpha, beta).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import stable
from .errors import (
    ConvergenceError,
    DegenerateSampleError,
    InvalidParameterError,
    NumericalError,
    SampleSizeError,
)
from .stable import StableParams

__all__ = [
    "QuantileSummary",
    "McCullochGrid",
    "FitResult",
    "build_grid",
    "fit_quantile",
    "fit_mle",
    "bootstrap_se",
    "PHI1_FLOOR",
]

# Smallest value of (x95-x05)/(x75-x25) over the family; reached at alpha=2.
PHI1_FLOOR = 2.439

# Quantile levels used throughout.
_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)

# Empirical quantiles use the median-unbiased rule everywhere for
# cross-module consistency.
QUANTILE_METHOD = "median_unbiased"

_GRID_VERSION = "1"

DEFAULT_ALPHA_AXIS = np.round(np.arange(0.5, 2.0001, 0.1), 10)
DEFAULT_BETA_AXIS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])

DEFAULT_MIN_N_QUANTILE = 1000
DEFAULT_MIN_N_MLE = 500


@dataclass(frozen=True)
class QuantileSummary:
    """The five quantiles that determine a stable fit, plus the sample size."""

    q05: float
    q25: float
    q50: float
    q75: float
    q95: float
    n: int

    def __post_init__(self):
        if not (self.q05 <= self.q25 <= self.q50 <= self.q75 <= self.q95):
            raise InvalidParameterError("quantiles must be nondecreasing")
        if self.n < 1:
            raise InvalidParameterError("n must be >= 1")

    @classmethod
    def from_sample(cls, values: np.ndarray) -> "QuantileSummary":
        values = np.asarray(values, dtype=float)
        qs = np.quantile(values, _LEVELS, method=QUANTILE_METHOD)
        return cls(*map(float, qs), n=values.size)


@dataclass(frozen=True)
class FitResult:
    params: StableParams
    se: tuple[float, float, float, float] | None
    method: str  # "quantile" | "mle"
    n: int
    seed: int | None = None
    converged: bool = True

    def with_se(self, se: Sequence[float]) -> "FitResult":
        return replace(self, se=tuple(float(v) for v in se))


class McCullochGrid:
    """Tabulated phi1..phi4 on an (alpha, beta >= 0) grid; negative beta by symmetry."""

    def __init__(self, alpha_axis, beta_axis, phi1, phi2, phi3, phi4):
        self.alpha_axis = np.asarray(alpha_axis, dtype=float)
        self.beta_axis = np.asarray(beta_axis, dtype=float)
        self.phi1 = np.asarray(phi1, dtype=float)
        self.phi2 = np.asarray(phi2, dtype=float)
        self.phi3 = np.asarray(phi3, dtype=float)
        self.phi4 = np.asarray(phi4, dtype=float)
        na, nb = self.alpha_axis.size, self.beta_axis.size
        for name in ("phi1", "phi2", "phi3", "phi4"):
            if getattr(self, name).shape != (na, nb):
                raise InvalidParameterError(f"{name} must have shape ({na}, {nb})")

    # -- bilinear machinery ------------------------------------------------

    def _locate(self, axis: np.ndarray, v: float) -> tuple[int, float]:
        v = min(max(v, axis[0]), axis[-1])
        i = int(np.searchsorted(axis, v, side="right") - 1)
        i = min(max(i, 0), axis.size - 2)
        t = (v - axis[i]) / (axis[i + 1] - axis[i])
        return i, t

    def _interp(self, table: np.ndarray, alpha: float, beta: float, odd: bool) -> float:
        sign = 1.0
        if beta < 0:
            beta = -beta
            if odd:
                sign = -1.0
        i, u = self._locate(self.alpha_axis, alpha)
        j, v = self._locate(self.beta_axis, beta)
        f = (
            table[i, j] * (1 - u) * (1 - v)
            + table[i + 1, j] * u * (1 - v)
            + table[i, j + 1] * (1 - u) * v
            + table[i + 1, j + 1] * u * v
        )
        return sign * f

    def phi1_at(self, alpha: float, beta: float) -> float:
        return self._interp(self.phi1, alpha, beta, odd=False)

    def phi2_at(self, alpha: float, beta: float) -> float:
        return self._interp(self.phi2, alpha, beta, odd=True)

    def phi3_at(self, alpha: float, beta: float) -> float:
        return self._interp(self.phi3, alpha, beta, odd=False)

    def phi4_at(self, alpha: float, beta: float) -> float:
        return self._interp(self.phi4, alpha, beta, odd=True)

    def invert(self, phi1: float, phi2: float) -> tuple[float, float]:
        """Map sample (phi1, phi2) to (alpha, beta); clamps to the grid hull."""
        sign = 1.0 if phi2 >= 0 else -1.0
        s = abs(phi2)
        if phi1 <= self.phi1[-1, 0] + 1e-12:
            return float(self.alpha_axis[-1]), 0.0

        def beta_for(alpha: float) -> float:
            # invert phi2 along beta at fixed alpha (linear between beta nodes)
            i, u = self._locate(self.alpha_axis, alpha)
            prof = self.phi2[i] * (1 - u) + self.phi2[i + 1] * u
            if s >= prof[-1]:
                return float(self.beta_axis[-1])
            j = int(np.searchsorted(prof, s, side="right") - 1)
            j = min(max(j, 0), prof.size - 2)
            dp = prof[j + 1] - prof[j]
            t = 0.0 if dp == 0 else (s - prof[j]) / dp
            return float(self.beta_axis[j] + t * (self.beta_axis[j + 1] - self.beta_axis[j]))

        def gap(alpha: float) -> float:
            return self.phi1_at(alpha, beta_for(alpha)) - phi1

        a_lo, a_hi = float(self.alpha_axis[0]), float(self.alpha_axis[-1])
        if gap(a_lo) <= 0.0:  # heavier than the grid covers
            alpha = a_lo
        elif gap(a_hi) >= 0.0:
            alpha = a_hi
        else:
            alpha = float(optimize.brentq(gap, a_lo, a_hi, xtol=1e-12, rtol=8.9e-16))
        beta = beta_for(alpha)
        return alpha, sign * beta

    # -- persistence ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        buf.write(f"# mcculloch-grid-version: {_GRID_VERSION}\n")
        buf.write("# phi4 holds (delta - x50)/gamma (continuous-at-alpha-1 form)\n")
        buf.write("alpha,beta,phi1,phi2,phi3,phi4\n")
        for i, a in enumerate(self.alpha_axis):
            for j, b in enumerate(self.beta_axis):
                cells = (a, b, self.phi1[i, j], self.phi2[i, j], self.phi3[i, j], self.phi4[i, j])
                buf.write(",".join(repr(float(c)) for c in cells) + "\n")
        path.write_text(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "McCullochGrid":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# mcculloch-grid-version:"):
            raise InvalidParameterError(f"{path} is not a grid cache file")
        version = lines[0].split(":", 1)[1].strip()
        if version != _GRID_VERSION:
            raise InvalidParameterError(
                f"grid cache version {version} != expected {_GRID_VERSION}"
            )
        rows = [ln.split(",") for ln in lines if ln and not ln.startswith(("#", "alpha"))]
        data = np.array([[float(v) for v in r] for r in rows])
        alphas = np.unique(data[:, 0])
        betas = np.unique(data[:, 1])
        tables = [
            data[:, k].reshape(alphas.size, betas.size) for k in range(2, 6)
        ]
        return cls(alphas, betas, *tables)


def _node_quantiles(alpha: float, beta: float) -> tuple[float, ...]:
    p = StableParams(alpha, beta, 1.0, 0.0)
    if beta == 0.0:
        x75 = stable.quantile(p, 0.75)
        x95 = stable.quantile(p, 0.95)
        return (-x95, -x75, 0.0, x75, x95)
    return tuple(stable.quantile(p, q) for q in _LEVELS)


def build_grid(
    alpha_axis: np.ndarray | None = None,
    beta_axis: np.ndarray | None = None,
    cache_path: str | Path | None = None,
) -> McCullochGrid:
    """Tabulate phi1..phi4 from theoretical quantiles; optionally cache to disk.

    If cache_path exists it is loaded instead of rebuilt (axes in the file
    win).  Axes must cover alpha in [0.5, 2] and beta in [0, 1]; negative
    beta is obtained by symmetry at lookup time.
    """
    if cache_path is not None and Path(cache_path).exists():
        return McCullochGrid.load(cache_path)
    alphas = DEFAULT_ALPHA_AXIS if alpha_axis is None else np.asarray(alpha_axis, float)
    betas = DEFAULT_BETA_AXIS if beta_axis is None else np.asarray(beta_axis, float)
    if alphas[0] > 0.5 or alphas[-1] < 2.0 or betas[0] > 0.0 or betas[-1] < 1.0:
        raise InvalidParameterError("axes must cover alpha in [0.5, 2] and beta in [0, 1]")
    shape = (alphas.size, betas.size)
    phi1 = np.empty(shape)
    phi2 = np.empty(shape)
    phi3 = np.empty(shape)
    phi4 = np.empty(shape)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            x05, x25, x50, x75, x95 = _node_quantiles(float(a), float(b))
            phi1[i, j] = max((x95 - x05) / (x75 - x25), PHI1_FLOOR)
            phi2[i, j] = (x95 + x05 - 2.0 * x50) / (x95 - x05)
            phi3[i, j] = x75 - x25
            phi4[i, j] = -x50
    grid = McCullochGrid(alphas, betas, phi1, phi2, phi3, phi4)
    if cache_path is not None:
        grid.save(cache_path)
    return grid


def likelihood_safe(params: StableParams, beta_margin: float = 1e-3) -> StableParams:
    """Move a boundary skewness estimate to the open interval.

    The quantile inversion clamps beta to [-1, 1]; exactly at the boundary
    one tail of the density decays faster than any power and observed points
    on that side get log-density -inf.  A clamped estimate means "beta near
    the boundary", so likelihood evaluations use the interior neighbor.
    """
    b = params.beta
    if abs(b) < 1.0 - beta_margin:
        return params
    b = math.copysign(1.0 - beta_margin, b)
    return StableParams(params.alpha, b, params.gamma, params.delta)


def fit_quantile(
    values: np.ndarray,
    grid: McCullochGrid,
    min_n: int = DEFAULT_MIN_N_QUANTILE,
) -> FitResult:
    """Quantile-method fit of the four stable parameters."""
    values = np.asarray(values, dtype=float)
    if values.size < min_n:
        raise SampleSizeError(f"need at least {min_n} observations, got {values.size}")
    qs = QuantileSummary.from_sample(values)
    return fit_from_quantiles(qs, grid)


def fit_from_quantiles(qs: QuantileSummary, grid: McCullochGrid) -> FitResult:
    """Fit from a precomputed five-quantile summary (supports released statistics)."""
    iqr = qs.q75 - qs.q25
    span = qs.q95 - qs.q05
    if iqr <= 0.0 or span <= 0.0:
        raise DegenerateSampleError("q75 == q25 (or q95 == q05): no usable spread")
    phi1 = max(span / iqr, PHI1_FLOOR)
    phi2 = (qs.q95 + qs.q05 - 2.0 * qs.q50) / span
    alpha, beta = grid.invert(phi1, phi2)
    alpha = min(alpha, 2.0)
    beta = min(max(beta, -1.0), 1.0)
    gamma = iqr / grid.phi3_at(alpha, beta)
    delta = qs.q50 + gamma * grid.phi4_at(alpha, beta)
    return FitResult(
        params=StableParams(alpha, beta, gamma, delta),
        se=None,
        method="quantile",
        n=qs.n,
    )


# ---------------------------------------------------------------------------
# maximum likelihood refinement
# ---------------------------------------------------------------------------

_ALPHA_LO = 0.5  # matches the grid's coverage


def _to_unconstrained(p: StableParams) -> np.ndarray:
    a01 = (p.alpha - _ALPHA_LO) / (2.0 - _ALPHA_LO)
    a01 = min(max(a01, 1e-6), 1.0 - 1e-9)
    b01 = (p.beta + 1.0) / 2.0
    b01 = min(max(b01, 1e-9), 1.0 - 1e-9)
    return np.array([
        math.log(a01 / (1.0 - a01)),
        math.log(b01 / (1.0 - b01)),
        math.log(p.gamma),
        p.delta,
    ])


def _from_unconstrained(v: np.ndarray) -> StableParams:
    a01 = 1.0 / (1.0 + math.exp(-v[0]))
    b01 = 1.0 / (1.0 + math.exp(-v[1]))
    alpha = _ALPHA_LO + (2.0 - _ALPHA_LO) * a01
    beta = 2.0 * b01 - 1.0
    return StableParams(alpha, beta, math.exp(v[2]), float(v[3]))


def fit_mle(
    values: np.ndarray,
    init: StableParams,
    min_n: int = DEFAULT_MIN_N_MLE,
    maxiter: int = 400,
) -> FitResult:
    """Maximize the summed log density from a quantile-method starting point.

    Derivative-free simplex search in an unconstrained reparameterization
    (logit for alpha and beta, log for gamma).  Returns the best point seen;
    `converged` is False when the iteration budget is exhausted first.
    """
    values = np.asarray(values, dtype=float)
    if values.size < min_n:
        raise SampleSizeError(f"need at least {min_n} observations, got {values.size}")

    def nll(v: np.ndarray) -> float:
        try:
            p = _from_unconstrained(v)
        except (InvalidParameterError, OverflowError):
            return math.inf
        return -float(np.sum(stable.logpdf(p, values)))

    x0 = _to_unconstrained(init)
    f0 = nll(x0)
    # quantile init is already root-n consistent: a tight starting simplex
    # saves most of the simplex walk
    simplex = np.vstack([x0] + [x0 + 0.05 * np.eye(4)[i] for i in range(4)])
    res = optimize.minimize(
        nll,
        x0,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 2e-4, "fatol": 0.02,
                 "initial_simplex": simplex, "adaptive": True},
    )
    best_x, best_f = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
    return FitResult(
        params=_from_unconstrained(best_x),
        se=None,
        method="mle",
        n=values.size,
        converged=bool(res.success or res.fun <= f0),
    )


def bootstrap_se(
    values: np.ndarray,
    fitter: Callable[[np.ndarray], FitResult],
    reps: int = 1000,
    seed: int = 0,
    max_failure_share: float = 0.10,
) -> np.ndarray:
    """Resampling standard errors of the four parameters.

    Draws `reps` with-replacement resamples, refits each, and returns the
    per-parameter standard deviation.  Failed replicates are dropped and
    counted; more than `max_failure_share` of them is an error.
    """
    values = np.asarray(values, dtype=float)
    if reps < 2:
        raise InvalidParameterError(f"reps must be >= 2, got {reps}")
    rng = np.random.default_rng(seed)
    n = values.size
    estimates = []
    failures = 0
    for _ in range(reps):
        idx = rng.integers(0, n, size=n)
        try:
            fit = fitter(values[idx])
        except (DegenerateSampleError, ConvergenceError, NumericalError):
            failures += 1
            continue
        p = fit.params
        estimates.append((p.alpha, p.beta, p.gamma, p.delta))
    if failures > max_failure_share * reps:
        raise NumericalError(
            f"{failures}/{reps} bootstrap replicates failed (> {max_failure_share:.0%})"
        )
    arr = np.asarray(estimates)
    return arr.std(axis=0, ddof=1)
