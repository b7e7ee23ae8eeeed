"""Levy alpha-stable distribution in the S0 parameterization.

Characteristic function, density, CDF, quantile and sampling for the
four-parameter family (alpha, beta, gamma, delta).  The density and CDF
are computed by adaptive quadrature of the Fourier inversion integral,
with a switch to the power-law tail expansion far from the body.  Closed
forms are used for the Gaussian (alpha=2) and Cauchy (alpha=1, beta=0)
members.

All distribution functions reduce to the standardized variable
z = (x - delta) / gamma; in S0 the family is an exact location-scale
family for every alpha, including alpha = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError, InvalidParameterError

__all__ = [
    "StableParams",
    "char_fn",
    "pdf",
    "logpdf",
    "cdf",
    "quantile",
    "sample",
    "tail_prob_asymptotic",
]

# |alpha - 1| below this is snapped to exactly 1 to avoid the
# tan(pi*alpha/2) blow-up; S0 is continuous there so the snap is safe.
_ALPHA_ONE_SNAP = 1e-6

# Integrate the inversion integral out to where |cf| < exp(-_LOG_CF_CUTOFF).
_LOG_CF_CUTOFF = 41.5

# Absolute tolerances for the scalar quadratures.
_PDF_EPSABS = 1e-12
_CDF_EPSABS = 1e-12

# Candidate |z| values probed when locating the quadrature -> tail-series
# hand-over point.
_TAIL_PROBES = (
    6.0, 9.0, 13.0, 20.0, 30.0, 45.0, 70.0, 105.0, 160.0, 240.0,
    360.0, 540.0, 810.0, 1215.0, 1825.0, 2740.0, 4100.0,
)

# Above this oscillation count the scalar adaptive quadrature is replaced
# by the vectorized phase-adapted panel rule.
_PANEL_CYCLES = 400.0


@dataclass(frozen=True)
class StableParams:
    """Parameters of a Levy alpha-stable law in S0.

    alpha : tail exponent in (0, 2]
    beta  : skewness in [-1, 1]
    gamma : scale, > 0 (units of the modeled variable)
    delta : location (same units as gamma)
    """

    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        a, b, g, d = self.alpha, self.beta, self.gamma, self.delta
        if not (0.0 < a <= 2.0) or not math.isfinite(a):
            raise InvalidParameterError(f"alpha must be in (0, 2], got {a}")
        if not (-1.0 <= b <= 1.0) or not math.isfinite(b):
            raise InvalidParameterError(f"beta must be in [-1, 1], got {b}")
        if not (g > 0.0) or not math.isfinite(g):
            raise InvalidParameterError(f"gamma must be positive and finite, got {g}")
        if not math.isfinite(d):
            raise InvalidParameterError(f"delta must be finite, got {d}")
        if a != 1.0 and abs(a - 1.0) < _ALPHA_ONE_SNAP:
            object.__setattr__(self, "alpha", 1.0)

    def standardized(self) -> "StableParams":
        return StableParams(self.alpha, self.beta, 1.0, 0.0)


def _skew_slope(alpha: float, beta: float) -> float:
    """beta * tan(pi*alpha/2), the coefficient entering the S0 phase."""
    return beta * math.tan(math.pi * alpha / 2.0)


def _t_upper(alpha: float) -> float:
    return _LOG_CF_CUTOFF ** (1.0 / alpha)


def char_fn(p: StableParams, t: float) -> complex:
    """Characteristic function E[exp(itX)] of the S0 law at real t."""
    a, b, g, d = p.alpha, p.beta, p.gamma, p.delta
    if t == 0.0:
        return complex(1.0, 0.0)
    at = abs(t)
    sgn = 1.0 if t > 0 else -1.0
    if a == 1.0:
        inner = complex(1.0, b * (2.0 / math.pi) * sgn * math.log(g * at))
        expo = -g * at * inner + 1j * d * t
    else:
        inner = complex(1.0, b * math.tan(math.pi * a / 2.0) * sgn * ((g * at) ** (1.0 - a) - 1.0))
        expo = -((g * at) ** a) * inner + 1j * d * t
    return complex(np.exp(expo))


# ---------------------------------------------------------------------------
# power-law tail expansion
# ---------------------------------------------------------------------------

def _tail_constant(alpha: float) -> float:
    """c_alpha in P(Z > z) ~ c_alpha (1+beta) z^(-alpha)."""
    return math.sin(math.pi * alpha / 2.0) * math.gamma(alpha) / math.pi


def _tail_series(zs: np.ndarray, alpha: float, beta: float, sf: bool,
                 kmax: int = 80) -> tuple[np.ndarray, np.ndarray]:
    """Right-tail expansion of the standardized density (sf=False) or survival
    function (sf=True), with a per-point truncation-error estimate.

    The expansion variable is w = z + beta*tan(pi*alpha/2); term k carries
    w^-(alpha*k [+1]).  Convergent for alpha < 1, asymptotic for alpha > 1
    (summation stops at the smallest term).  alpha = 1 uses the single
    leading term with an O(log z / z) error estimate.
    """
    zs = np.asarray(zs, dtype=float)
    if alpha == 1.0:
        val = (1.0 + beta) / math.pi * (zs ** (-2.0) if not sf else 1.0 / zs)
        err = np.abs(val) * (np.log(np.maximum(zs, 2.0)) + 2.0) / np.maximum(zs, 2.0)
        return val, err
    b = _skew_slope(alpha, beta)
    w = zs + b
    val = np.zeros_like(zs)
    err = np.full_like(zs, np.inf)
    bad = w < 2.0
    if bad.all():
        return val, err
    logw = np.log(np.where(bad, 2.0, w))
    log_r = 0.5 * math.log1p(b * b)
    theta = math.atan(b)
    prev_mag = np.full_like(zs, np.inf)
    done = bad.copy()
    for k in range(1, kmax + 1):
        ak = alpha * k
        if sf:
            log_mag = math.lgamma(ak) - math.lgamma(k + 1) + k * log_r - ak * logw
        else:
            log_mag = math.lgamma(ak + 1.0) - math.lgamma(k + 1) + k * log_r - (ak + 1.0) * logw
        mag = np.exp(log_mag)
        growing = mag >= prev_mag
        newly_done = growing & ~done
        err[newly_done] = mag[newly_done]
        done |= newly_done
        active = ~done
        if not active.any():
            break
        sgn = 1.0 if k % 2 == 1 else -1.0
        term = sgn * mag * math.sin(k * theta + math.pi * ak / 2.0) / math.pi
        val[active] += term[active]
        prev_mag = np.where(active, mag, prev_mag)
        small = active & (mag < 1e-18)
        err[small] = mag[small]
        done |= small
    still = ~done
    err[still] = prev_mag[still]
    err[bad] = np.inf
    return val, err


def _tail_pdf0(z: float, alpha: float, beta: float) -> float:
    v, _ = _tail_series(np.array([z]), alpha, beta, sf=False)
    return float(v[0])


def _tail_sf0(z: float, alpha: float, beta: float) -> float:
    v, _ = _tail_series(np.array([z]), alpha, beta, sf=True)
    return float(v[0])


def _leading_tail_sf0(z: float, alpha: float, beta: float) -> float:
    return _tail_constant(alpha) * (1.0 + beta) * z ** (-alpha)


# ---------------------------------------------------------------------------
# standardized density / CDF by inversion of the characteristic function
# ---------------------------------------------------------------------------

def _phase_fn(z: float, alpha: float, beta: float):
    """Return psi(t) with exp(-t^alpha) cos(psi(t)) the inversion kernel, t > 0."""
    if alpha == 1.0:
        c = 2.0 * beta / math.pi
        return lambda t: z * t + c * t * np.log(t)
    b = _skew_slope(alpha, beta)
    return lambda t: z * t + b * (t - t ** alpha)


def _cycles(z: float, alpha: float, beta: float) -> float:
    b = abs(_skew_slope(alpha, beta)) if alpha != 1.0 else abs(beta)
    return (abs(z) + min(b, 1e3) + 1.0) * _t_upper(alpha) / (2.0 * math.pi)


def _panel_nodes(alpha: float, beta: float, zmax: float,
                 deep: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights resolving the inversion integrand for |z| <= zmax.

    Panel edges follow the accumulated phase of the integrand (a few radians
    per panel) plus geometric refinement near t = 0.  `deep` extends the
    geometric ladder far enough to resolve the t^(alpha-1) endpoint
    singularity of the Gil-Pelaez integrand (alpha < 1) to ~1e-13; the
    density integrand only has the milder exp(-t^alpha) cusp.
    """
    T = _t_upper(alpha)
    probes = np.geomspace(T * 1e-9, T, 4097)
    psi = _phase_fn(zmax, alpha, beta)
    dphase = np.abs(np.diff(psi(probes)))
    cum = np.concatenate([[0.0], np.cumsum(dphase)])
    n_phase = int(cum[-1] / 4.0) + 1
    targets = np.linspace(0.0, cum[-1], min(n_phase, 120000) + 1)
    phase_edges = np.interp(targets, cum, probes)
    base_edges = np.linspace(0.0, T, 21)
    if deep:
        geo_edges = np.geomspace(T * 1e-30, min(1.0, T), 49)
    else:
        geo_edges = np.geomspace(T * 1e-10, min(1.0, T), 21)
    edges = np.unique(np.concatenate([[0.0], geo_edges, base_edges, phase_edges]))
    gl_x, gl_w = np.polynomial.legendre.leggauss(16)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
    weights = (half[:, None] * gl_w[None, :]).ravel()
    return nodes, weights


def _pdf0_panel(z: float, alpha: float, beta: float) -> float:
    t, w = _panel_nodes(alpha, beta, abs(z))
    amp = w * np.exp(-(t ** alpha))
    val = float(np.cos(_phase_fn(z, alpha, beta)(t)) @ amp) / math.pi
    return max(val, 0.0)


def _cdf0_panel(z: float, alpha: float, beta: float) -> float:
    t, w = _panel_nodes(alpha, beta, abs(z), deep=True)
    amp = w * np.exp(-(t ** alpha)) / t
    val = float(np.sin(_phase_fn(z, alpha, beta)(t)) @ amp) / math.pi
    return min(max(0.5 + val, 0.0), 1.0)


def _pdf0_quad(z: float, alpha: float, beta: float) -> float:
    """Standardized density by adaptive quadrature of the inversion integral."""
    cycles = _cycles(z, alpha, beta)
    if cycles > _PANEL_CYCLES:
        return _pdf0_panel(z, alpha, beta)
    psi = _phase_fn(z, alpha, beta)
    T = _t_upper(alpha)
    exp, cos = math.exp, math.cos

    def integrand(t):
        return exp(-(t ** alpha)) * cos(psi(t))

    limit = 200 + int(6.0 * cycles)
    val, _ = integrate.quad(
        integrand, 0.0, T, epsabs=_PDF_EPSABS, epsrel=1e-10, limit=limit,
        points=[min(1.0, 0.5 * T)],
    )
    return max(val / math.pi, 0.0)


def _cdf0_quad(z: float, alpha: float, beta: float) -> float:
    """Standardized CDF via the Gil-Pelaez inversion formula."""
    cycles = _cycles(z, alpha, beta)
    if cycles > _PANEL_CYCLES:
        return _cdf0_panel(z, alpha, beta)
    T = _t_upper(alpha)
    exp, sin = math.exp, math.sin
    limit = 200 + int(6.0 * cycles)
    total = 0.0
    if alpha == 1.0:
        c = 2.0 * beta / math.pi

        def integrand(t):
            return exp(-t) * sin(z * t + c * t * math.log(t)) / t

        total, _ = integrate.quad(
            integrand, 0.0, T, epsabs=_CDF_EPSABS, epsrel=1e-10, limit=limit, points=[1.0]
        )
    else:
        b = _skew_slope(alpha, beta)

        def integrand(t):
            return exp(-(t ** alpha)) * sin(z * t + b * (t - t ** alpha)) / t

        if alpha < 1.0:
            # substitute u = t^alpha on [0, 1]: the t^(alpha-1) endpoint
            # singularity becomes a bounded integrand.
            inv_a = 1.0 / alpha

            def integrand_u(u):
                t = u ** inv_a
                return exp(-u) * sin(z * t + b * (t - u)) / (alpha * u)

            head, _ = integrate.quad(
                integrand_u, 0.0, 1.0, epsabs=_CDF_EPSABS, epsrel=1e-10, limit=limit
            )
            rest, _ = integrate.quad(
                integrand, 1.0, T, epsabs=_CDF_EPSABS, epsrel=1e-10, limit=limit
            )
            total = head + rest
        else:
            total, _ = integrate.quad(
                integrand, 0.0, T, epsabs=_CDF_EPSABS, epsrel=1e-10, limit=limit,
                points=[min(1.0, 0.5 * T)],
            )
    return min(max(0.5 + total / math.pi, 0.0), 1.0)


@lru_cache(maxsize=512)
def _pdf_switch(alpha: float, beta: float) -> float:
    """Right-tail |z| beyond which the tail expansion replaces quadrature.

    The first probe where the two evaluations agree to 1e-8 absolute (the
    declared density tolerance) and the expansion's own truncation estimate
    is negligible.  inf when the right tail has no power-law part (beta=-1).
    """
    if beta == -1.0 or alpha == 2.0:
        return math.inf
    for z in _TAIL_PROBES:
        val, err = _tail_series(np.array([z]), alpha, beta, sf=False)
        if err[0] < 1e-9 and abs(_pdf0_quad(z, alpha, beta) - val[0]) < 1e-8:
            return z
    return math.inf


@lru_cache(maxsize=512)
def _cdf_switch(alpha: float, beta: float) -> float:
    if beta == -1.0 or alpha == 2.0:
        return math.inf
    for z in _TAIL_PROBES:
        val, err = _tail_series(np.array([z]), alpha, beta, sf=True)
        if err[0] < 1e-9 and abs((1.0 - _cdf0_quad(z, alpha, beta)) - val[0]) < 1e-8:
            return z
    return math.inf


def _pdf0(z: float, alpha: float, beta: float) -> float:
    if alpha == 2.0:
        return math.exp(-z * z / 4.0) / (2.0 * math.sqrt(math.pi))
    if alpha == 1.0 and beta == 0.0:
        return 1.0 / (math.pi * (1.0 + z * z))
    if z < 0.0:
        return _pdf0(-z, alpha, -beta)
    if beta > -1.0 and z > _pdf_switch(alpha, beta):
        return _tail_pdf0(z, alpha, beta)
    if z > 4000.0:
        # beta = -1: this side decays faster than any power and is far
        # below the declared absolute tolerance out here.
        return 0.0
    return _pdf0_quad(z, alpha, beta)


def _cdf0(z: float, alpha: float, beta: float) -> float:
    if alpha == 2.0:
        return 0.5 * math.erfc(-z / 2.0)
    if alpha == 1.0 and beta == 0.0:
        return 0.5 + math.atan(z) / math.pi
    if z < 0.0:
        return 1.0 - _cdf0(-z, alpha, -beta)
    if beta > -1.0 and z > _cdf_switch(alpha, beta):
        return 1.0 - _tail_sf0(z, alpha, beta)
    if z > 4000.0:
        return 1.0
    return _cdf0_quad(z, alpha, beta)


def pdf(p: StableParams, x: float) -> float:
    """Density f(x); closed form for Gaussian/Cauchy members, else inversion."""
    if not math.isfinite(x):
        raise InvalidParameterError(f"x must be finite, got {x}")
    z = (x - p.delta) / p.gamma
    return _pdf0(z, p.alpha, p.beta) / p.gamma


def cdf(p: StableParams, x: float) -> float:
    """Distribution function F(x) in [0, 1]."""
    if math.isnan(x):
        raise InvalidParameterError("x must not be NaN")
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    z = (x - p.delta) / p.gamma
    return _cdf0(z, p.alpha, p.beta)


def quantile(p: StableParams, q: float) -> float:
    """Value x with cdf(p, x) = q, accurate to 1e-8 in probability."""
    if not (0.0 < q < 1.0):
        raise InvalidParameterError(f"q must be in (0, 1), got {q}")
    a, b = p.alpha, p.beta
    if a == 2.0:
        z = math.sqrt(2.0) * float(special.ndtri(q))
    elif a == 1.0 and b == 0.0:
        z = math.tan(math.pi * (q - 0.5))
    else:
        z = _quantile0(q, a, b)
    return p.delta + p.gamma * z


def _initial_bracket(q: float, alpha: float, beta: float) -> tuple[float, float]:
    hi = 2.0
    if q > 0.5 and beta > -1.0:
        est = (_tail_constant(alpha) * (1.0 + beta) / (1.0 - q)) ** (1.0 / alpha)
        hi = max(hi, 2.0 * est)
    lo = -2.0
    if q < 0.5 and beta < 1.0:
        est = (_tail_constant(alpha) * (1.0 - beta) / q) ** (1.0 / alpha)
        lo = min(lo, -2.0 * est)
    return lo, hi


def _quantile0(q: float, alpha: float, beta: float) -> float:
    lo, hi = _initial_bracket(q, alpha, beta)
    flo = _cdf0(lo, alpha, beta) - q
    fhi = _cdf0(hi, alpha, beta) - q
    grow = 0
    while flo > 0.0:
        lo *= 2.0
        flo = _cdf0(lo, alpha, beta) - q
        grow += 1
        if grow > 80:
            raise ConvergenceError("could not bracket quantile from below")
    grow = 0
    while fhi < 0.0:
        hi *= 2.0
        fhi = _cdf0(hi, alpha, beta) - q
        grow += 1
        if grow > 80:
            raise ConvergenceError("could not bracket quantile from above")
    z = optimize.brentq(
        lambda v: _cdf0(v, alpha, beta) - q, lo, hi, xtol=1e-10, rtol=8.9e-16, maxiter=200
    )
    if abs(_cdf0(z, alpha, beta) - q) > 1e-8:
        raise ConvergenceError(f"quantile inversion stalled at q={q}")
    return z


def sample(p: StableParams, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws via the Chambers-Mallows-Stuck transform, adapted to S0.

    Deterministic for a given seed; parallel callers should pass distinct
    seeds rather than sharing generator state.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    a, b = p.alpha, p.beta
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size=n)
    if a == 2.0:
        w = rng.standard_exponential(n)
        z0 = 2.0 * np.sqrt(w) * np.sin(u)
        return p.delta + p.gamma * z0
    if a == 1.0:
        w = rng.standard_exponential(n)
        if b == 0.0:
            z0 = np.tan(u)
        else:
            bu = math.pi / 2.0 + b * u
            z0 = (2.0 / math.pi) * (
                bu * np.tan(u) - b * np.log((math.pi / 2.0) * w * np.cos(u) / bu)
            )
        return p.delta + p.gamma * z0
    w = rng.standard_exponential(n)
    tan_half = math.tan(math.pi * a / 2.0)
    if b == 0.0:
        z1 = (
            np.sin(a * u)
            / np.cos(u) ** (1.0 / a)
            * (np.cos((1.0 - a) * u) / w) ** ((1.0 - a) / a)
        )
    else:
        b0 = math.atan(b * tan_half) / a
        s0 = (1.0 + (b * tan_half) ** 2) ** (1.0 / (2.0 * a))
        z1 = (
            s0
            * np.sin(a * (u + b0))
            / np.cos(u) ** (1.0 / a)
            * (np.cos(u - a * (u + b0)) / w) ** ((1.0 - a) / a)
        )
    z0 = z1 - b * tan_half
    return p.delta + p.gamma * z0


def tail_prob_asymptotic(p: StableParams, x: float, min_scale: float = 10.0) -> float:
    """Leading-order power-law approximation of P(X > x) in the far right tail.

    Valid for alpha < 2 and x - delta > min_scale * gamma; by construction the
    returned value scales exactly as (x - delta)^(-alpha).
    """
    if p.alpha == 2.0:
        raise InvalidParameterError("alpha = 2 has no power-law tail")
    z = (x - p.delta) / p.gamma
    if z <= min_scale:
        raise InvalidParameterError(
            f"x is not in the far right tail: (x - delta)/gamma = {z:.3g} <= {min_scale}"
        )
    return _leading_tail_sf0(z, p.alpha, p.beta)


# ---------------------------------------------------------------------------
# vectorized log-density, used by likelihood-heavy callers
# ---------------------------------------------------------------------------

_Z_BUCKETS = (2.0, 5.0, 12.0, 30.0, 80.0, 200.0, 500.0, 1200.0, 3000.0)


def logpdf(p: StableParams, x: np.ndarray) -> np.ndarray:
    """Log-density over an array of points.

    Body points are evaluated with shared-node panel quadrature (grouped by
    |z| so nearby points reuse one node set); far-tail points use the tail
    expansion.  Agrees with pdf() to ~1e-8 absolute in the density.
    """
    x = np.asarray(x, dtype=float)
    a, b = p.alpha, p.beta
    z = (x.ravel() - p.delta) / p.gamma
    if a == 2.0:
        out = -(z * z) / 4.0 - math.log(2.0 * math.sqrt(math.pi)) - math.log(p.gamma)
        return out.reshape(x.shape)
    if a == 1.0 and b == 0.0:
        out = -np.log(math.pi * (1.0 + z * z)) - math.log(p.gamma)
        return out.reshape(x.shape)

    dens = np.empty_like(z)
    for sign in (1.0, -1.0):
        side = z >= 0.0 if sign > 0 else z < 0.0
        if not side.any():
            continue
        zs = np.abs(z[side])
        bb = b if sign > 0 else -b
        vals = np.empty_like(zs)
        in_tail = np.zeros_like(zs, dtype=bool)
        if bb > -1.0:
            # the series' own truncation estimate gates the hand-over here
            # (stricter than the probe-validated scalar switch, and free of
            # per-parameter probe quadratures that would dominate likelihood
            # scans where the parameters change every call)
            cand = zs > 6.0
            if cand.any():
                tv, terr = _tail_series(zs[cand], a, bb, sf=False)
                ok = terr < 1e-10
                idx = np.flatnonzero(cand)[ok]
                in_tail[idx] = True
                vals[idx] = tv[ok]
        too_far = (~in_tail) & (zs > 4000.0)
        vals[too_far] = 0.0
        body = ~(in_tail | too_far)
        zb = zs[body]
        vb = np.empty_like(zb)
        lo = 0.0
        for hi in _Z_BUCKETS + (math.inf,):
            m = (zb >= lo) & (zb < hi)
            if m.any():
                cap = float(max(zb[m].max(), 1.0))
                t, w = _panel_nodes(a, bb, cap)
                amp = w * np.exp(-(t ** a))
                if a == 1.0:
                    extra = (2.0 * bb / math.pi) * t * np.log(t)
                else:
                    extra = _skew_slope(a, bb) * (t - t ** a)
                ph = zb[m][:, None] * t[None, :] + extra[None, :]
                vb[m] = np.cos(ph) @ amp / math.pi
            lo = hi
        vals[body] = vb
        dens[side] = vals
    dens = np.maximum(dens / p.gamma, 1e-300)
    return np.log(dens).reshape(x.shape)
