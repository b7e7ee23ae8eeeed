"""Sample-standard-deviation scaling with sample size.

For data with power-law tails of exponent alpha < 2 the sample standard
deviation grows like N^(1/alpha - 1/2): the typical sample maximum grows
like N^(1/alpha) and its square dominates the sum of squares.  This module
measures that curve on repeated subsamples and provides the theoretical
overlay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stable
from .errors import InvalidParameterError
from .stable import StableParams

__all__ = [
    "theoretical_exponent",
    "typical_max",
    "SubsampleStdRow",
    "subsample_std_curve",
    "loglog_slope",
    "theory_curve",
]


def theoretical_exponent(alpha: float) -> float:
    """Growth exponent of the sample std with sample size: 1/alpha - 1/2."""
    if not (0.0 < alpha <= 2.0):
        raise InvalidParameterError(f"alpha must be in (0, 2], got {alpha}")
    return 1.0 / alpha - 0.5


def typical_max(alpha: float, n: int) -> float:
    """Scale of the largest of n draws, up to a constant: n^(1/alpha)."""
    if not (0.0 < alpha <= 2.0):
        raise InvalidParameterError(f"alpha must be in (0, 2], got {alpha}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return float(n) ** (1.0 / alpha)


@dataclass(frozen=True)
class SubsampleStdRow:
    n: int
    mean_std: float
    q05_std: float
    q95_std: float


def subsample_std_curve(
    data: np.ndarray,
    sizes: list[int],
    reps: int = 20000,
    seed: int = 0,
    replace: bool = False,
) -> list[SubsampleStdRow]:
    """Mean and 5%/95% quantiles of the sample std over repeated subsamples.

    Subsamples are drawn without replacement by default (set replace=True
    for bootstrap-style draws).  Deterministic for a given seed.
    """
    data = np.asarray(data, dtype=float)
    m = data.size
    if max(sizes) > m:
        raise InvalidParameterError(f"largest size {max(sizes)} exceeds data length {m}")
    if min(sizes) < 2:
        raise InvalidParameterError("sizes must be >= 2 to compute a std")
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        stds = np.empty(reps)
        for k in range(reps):
            if replace:
                idx = rng.integers(0, m, size=n)
            else:
                idx = rng.choice(m, size=n, replace=False, shuffle=False)
            stds[k] = data[idx].std(ddof=1)
        q05, q95 = np.quantile(stds, [0.05, 0.95])
        rows.append(SubsampleStdRow(int(n), float(stds.mean()), float(q05), float(q95)))
    return rows


def loglog_slope(sizes: np.ndarray, values: np.ndarray, skip_smallest: int = 2) -> float:
    """Least-squares slope of log(values) vs log(sizes).

    The smallest sizes sit in a transient regime, so `skip_smallest` of them
    are excluded (the growth law is asymptotic).
    """
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(sizes)
    sizes, values = sizes[order], values[order]
    if skip_smallest:
        sizes, values = sizes[skip_smallest:], values[skip_smallest:]
    if sizes.size < 2:
        raise InvalidParameterError("need at least 2 sizes after skipping the transient")
    slope, _ = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(slope)


def theory_curve(
    alpha: float,
    params: StableParams,
    sizes: list[int],
    reps: int = 200,
    ref_size: int = 20000,
    seed: int = 0,
) -> np.ndarray:
    """Theoretical std curve C * N^(1/alpha - 1/2) over `sizes`.

    The intercept C is calibrated by simulating i.i.d. samples of size
    `ref_size` at the fitted parameters and averaging their std.
    """
    expo = theoretical_exponent(alpha)
    rng = np.random.default_rng(seed)
    stds = np.empty(reps)
    for k in range(reps):
        draw = stable.sample(params, ref_size, int(rng.integers(0, 2**63 - 1)))
        stds[k] = draw.std(ddof=1)
    anchor = float(stds.mean())
    sizes_arr = np.asarray(sizes, dtype=float)
    return anchor * (sizes_arr / ref_size) ** expo
