"""Sum-product GAMP recursion for y = H b + w with a complex AWGN output channel.

The engine keeps per-element means/variances and an Onsager-corrected
residual.  One pass consists of an output step (residual update against the
observations), an input step (pseudo-observations q with variances v_q) and a
denoiser call mapping (q, v_q) back to posterior moments of b.  The denoiser
is pluggable, which is how the different signal priors are composed on top of
the same linear recursion.

All arrays are frame-wide: columns index time slots, which the recursion
never couples, so a (K, J) state is exactly J independent per-slot recursions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import clamp_var, log_cgauss, logit, sigmoid

# (q, v_q) -> (posterior mean, posterior variance), both shaped like q.
Denoiser = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class GampState:
    """Mutable per-frame recursion state.

    b_mean/b_var are the current posterior moments of the signal, s is the
    scaled residual carrying the Onsager memory, p/v_p the corrected output
    prediction, and q/v_q the pseudo-observations handed to the denoiser.
    """

    b_mean: np.ndarray
    b_var: np.ndarray
    s: np.ndarray | None = None
    p: np.ndarray | None = None
    v_p: np.ndarray | None = None
    q: np.ndarray = field(default=None)  # type: ignore[assignment]
    v_q: np.ndarray = field(default=None)  # type: ignore[assignment]
    iterations: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.b_var) < 0.0):
            raise ValueError("prior variances must be >= 0")
        if self.q is None:
            self.q = np.array(self.b_mean, dtype=np.complex128, copy=True)
        if self.v_q is None:
            self.v_q = np.maximum(np.asarray(self.b_var, dtype=float), 1.0).copy()


def init_state(prior_mean, prior_var, shape=None) -> GampState:
    """Fresh state with b = prior moments, zero residual and iteration 0."""
    mean = np.asarray(prior_mean, dtype=np.complex128)
    var = np.asarray(prior_var, dtype=float)
    if np.any(var <= 0.0):
        raise ValueError("prior_var must be > 0")
    if shape is not None:
        mean = np.broadcast_to(mean, shape).copy()
        var = np.broadcast_to(var, shape).copy()
    else:
        mean, var = np.broadcast_arrays(mean, var)
        mean, var = mean.copy(), var.copy()
    return GampState(b_mean=mean, b_var=var)


def _as_columns(y):
    y = np.asarray(y, dtype=np.complex128)
    return y[:, None] if y.ndim == 1 else y


def output_step(state: GampState, h: np.ndarray, y: np.ndarray, noise_precision: float,
                abs_h2: np.ndarray | None = None) -> np.ndarray:
    """Residual update against the AWGN observations.

    Computes v_p = |H|^2 v_b, the Onsager-corrected prediction
    p = H b - v_p * s, and the scaled residual s = (y - p) / (v_p + 1/lam).
    Returns the residual variances v_s = 1 / (v_p + 1/lam) needed by the
    input step.
    """
    y = _as_columns(y)
    if abs_h2 is None:
        abs_h2 = np.abs(h) ** 2
    b_mean = state.b_mean if state.b_mean.ndim == 2 else state.b_mean[:, None]
    b_var = state.b_var if state.b_var.ndim == 2 else state.b_var[:, None]
    if state.s is None:
        state.s = np.zeros(y.shape, dtype=np.complex128)
    v_p = clamp_var(abs_h2 @ b_var)
    p = h @ b_mean - v_p * state.s
    denom = v_p + 1.0 / noise_precision
    v_s = 1.0 / denom
    state.v_p = v_p
    state.p = p
    state.s = (y - p) * v_s
    return v_s


def input_step(state: GampState, h: np.ndarray, v_s: np.ndarray,
               abs_h2: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-observation update q = b + v_q H^H s, v_q = 1 / (|H|^2^T v_s)."""
    if abs_h2 is None:
        abs_h2 = np.abs(h) ** 2
    b_mean = state.b_mean if state.b_mean.ndim == 2 else state.b_mean[:, None]
    v_q = clamp_var(1.0 / np.maximum(abs_h2.T @ v_s, 1.0 / 1e12))
    q = b_mean + v_q * (h.conj().T @ state.s)
    squeeze = state.b_mean.ndim == 1
    state.v_q = v_q[:, 0] if squeeze else v_q
    state.q = q[:, 0] if squeeze else q
    return state.q, state.v_q


def iterate(state: GampState, y: np.ndarray, h: np.ndarray, noise_precision: float,
            denoiser: Denoiser, damping: float = 1.0,
            abs_h2: np.ndarray | None = None) -> GampState:
    """One full GAMP pass: output step, input step, denoiser, optional damping.

    damping = 1 applies the new values unchanged; damping in (0, 1) blends
    new and previous b_mean/b_var/s to stabilize hard instances.
    """
    s_prev = state.s
    v_s = output_step(state, h, y, noise_precision, abs_h2)
    if damping != 1.0 and s_prev is not None:
        state.s = damping * state.s + (1.0 - damping) * s_prev
    q, v_q = input_step(state, h, v_s, abs_h2)
    mean, var = denoiser(q, v_q)
    var = np.minimum(np.maximum(np.asarray(var, dtype=float), 0.0), 1e12)
    if damping != 1.0:
        mean = damping * mean + (1.0 - damping) * state.b_mean
        var = damping * var + (1.0 - damping) * state.b_var
    state.b_mean = np.asarray(mean, dtype=np.complex128)
    state.b_var = var
    state.iterations += 1
    return state


def gaussian_denoiser(prior_mean=0.0, prior_var=1.0) -> Denoiser:
    """MMSE denoiser for a fixed complex Gaussian prior CN(prior_mean, prior_var)."""
    if np.any(np.asarray(prior_var) <= 0.0):
        raise ValueError("prior_var must be > 0")

    def denoise(q, v_q):
        gain = prior_var / (prior_var + v_q)
        mean = prior_mean + gain * (q - prior_mean)
        return mean, gain * v_q

    return denoise


def spike_slab_posterior(q, v_q, prior_odds, prior_var=1.0):
    """Posterior under the prior (1-p) delta + p CN(0, prior_var), p = sigmoid(prior_odds).

    Returns (posterior activity, active-component mean, active-component
    variance) given the pseudo-observation model q ~ CN(b, v_q).
    """
    v_q = np.asarray(v_q, dtype=float)
    log_ratio = log_cgauss(q, 0.0, v_q + prior_var) - log_cgauss(q, 0.0, v_q)
    post_active = sigmoid(prior_odds + log_ratio)
    gain = prior_var / (prior_var + v_q)
    return post_active, gain * np.asarray(q), gain * v_q


def bernoulli_gaussian_denoiser(active_prob: float, prior_var: float = 1.0) -> Denoiser:
    """MMSE denoiser for the spike-and-slab prior (1-p) delta + p CN(0, prior_var)."""
    if not 0.0 < active_prob < 1.0:
        raise ValueError("active_prob must be in (0, 1)")
    if prior_var <= 0.0:
        raise ValueError("prior_var must be > 0")
    prior_odds = logit(active_prob)

    def denoise(q, v_q):
        post_active, mu, theta = spike_slab_posterior(q, v_q, prior_odds, prior_var)
        mean = post_active * mu
        var = post_active * (1.0 - post_active) * np.abs(mu) ** 2 + post_active * theta
        return mean, var

    return denoise
