"""Special functions and log-domain Gaussian arithmetic shared by all detectors.

Everything here is pure and vectorized; scalar inputs give scalar outputs.
Density ratios are always formed as differences of log densities and
exponentiated once, so that the Bernoulli-message formulas stay finite even
when the raw Gaussian densities would underflow.
"""

from __future__ import annotations

import enum

import numpy as np

# Every Bernoulli parameter produced anywhere in the package is clamped to
# [PROB_EPS, 1 - PROB_EPS] to keep odds ratios away from 0/0.
PROB_EPS = 1e-12

# Clamp range for all GAMP variances.
VAR_MIN = 1e-12
VAR_MAX = 1e12


class PsiMode(str, enum.Enum):
    """Digamma evaluation used inside Beta/Gamma log-expectations.

    APPROX is the two-term asymptotic surrogate ln(x) - 1/(2x); EXACT is the
    true digamma function.  APPROX is the default throughout the detectors.
    """

    APPROX = "approx"
    EXACT = "exact"


def _maybe_scalar(out, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def psi_approx(x):
    """Two-term digamma surrogate ln(x) - 1/(2x), defined for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("psi_approx requires x > 0")
    return _maybe_scalar(np.log(x) - 0.5 / x, x)


# Asymptotic series coefficients for digamma: -B_{2n} / (2n), n = 1..6.
_DIGAMMA_SERIES = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
)


def digamma_exact(x):
    """Digamma to absolute accuracy better than 1e-10 for x > 0.

    Uses the recurrence psi(x) = psi(x + 1) - 1/x to shift the argument to
    x >= 6, then the asymptotic expansion through the x^-12 term.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if np.any(x <= 0.0):
        raise ValueError("digamma_exact requires x > 0")
    shift = np.zeros_like(x)
    while np.any(x < 6.0):
        small = x < 6.0
        shift[small] -= 1.0 / x[small]
        x[small] += 1.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    power = inv2.copy()
    for coef in _DIGAMMA_SERIES:
        series += coef * power
        power *= inv2
    out = shift + np.log(x) - 0.5 / x + series
    return float(out[0]) if scalar else out


def psi(x, mode: PsiMode = PsiMode.APPROX):
    """Dispatch between the surrogate and the exact digamma."""
    if PsiMode(mode) is PsiMode.APPROX:
        return psi_approx(x)
    return digamma_exact(x)


def log_cgauss(x, mean, var):
    """Log density of the circularly symmetric complex Gaussian CN(x; mean, var)."""
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0.0):
        raise ValueError("log_cgauss requires var > 0")
    d = np.asarray(x) - np.asarray(mean)
    out = -np.log(np.pi * var) - (d.real**2 + d.imag**2) / var
    return _maybe_scalar(out, x, mean, var)


def beta_log_expectations(a, b, mode: PsiMode = PsiMode.APPROX):
    """E[ln x] and E[ln(1-x)] under Beta(x; a, b).

    Returns (psi(a) - psi(a+b), psi(b) - psi(a+b)) with psi chosen by mode.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    psi_ab = psi(a + b, mode)
    return psi(a, mode) - psi_ab, psi(b, mode) - psi_ab


def clamp_prob(p):
    """Clamp probabilities into [PROB_EPS, 1 - PROB_EPS]."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def clamp_var(v):
    """Clamp variances into [VAR_MIN, VAR_MAX]."""
    return np.clip(v, VAR_MIN, VAR_MAX)


def sigmoid(x):
    """Numerically stable logistic function 1 / (1 + exp(-x))."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def logit(p):
    """Log odds ln(p / (1-p)) of a clamped probability."""
    p = clamp_prob(np.asarray(p, dtype=float))
    return _maybe_scalar(np.log(p) - np.log1p(-p), p)


def combine_odds(a, b):
    """Product-of-Bernoullis normalization a*b / (a*b + (1-a)(1-b)).

    Evaluated in log-odds so that near-certain inputs cannot hit 0/0.
    """
    return clamp_prob(sigmoid(logit(a) + logit(b)))
