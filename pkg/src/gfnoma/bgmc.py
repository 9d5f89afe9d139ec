"""Bernoulli-Gaussian Markov-chain prior: messages and conjugate belief updates.

Per user, the binary activity states of consecutive slots form a two-state
chain whose transition probabilities carry Beta beliefs, while each active
signal entry carries a Gamma belief over its precision.  This module computes

* the activation likelihood turning GAMP pseudo-observations into Bernoulli
  evidence per (user, slot),
* forward/backward sweeps along each user's chain using surrogate transition
  weights (exponentiated expected log transition probabilities),
* pairwise transition beliefs and the resulting Beta refresh,
* the Gamma precision refresh and the posterior signal moments fed back to
  the linear engine.

Message direction naming: ``fwd_prior``/``bwd_prior`` are the chain's
predictive messages into a slot from the past/future, ``fwd_state`` and
``bwd_state`` additionally absorb that slot's activation likelihood, and
``chain_prior`` is the extrinsic activity prior (past and future combined,
likelihood excluded).

All operations broadcast over leading axes; the slot index is always the
last axis.  Every Bernoulli output is clamped away from {0, 1} and all Beta
and Gamma parameters stay strictly positive by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    PsiMode,
    clamp_prob,
    combine_odds,
    log_cgauss,
    logit,
    psi,
    beta_log_expectations,
    sigmoid,
)


@dataclass(frozen=True)
class HyperpriorConfig:
    """Fixed hyperprior parameters; the common choice is all ones."""

    gamma_shape: float = 1.0  # Gamma prior on signal precisions
    gamma_rate: float = 1.0
    p10_a: float = 1.0  # Beta prior on the inactive->active rate
    p10_b: float = 1.0
    p01_a: float = 1.0  # Beta prior on the active->inactive rate
    p01_b: float = 1.0

    def __post_init__(self):
        for name in ("gamma_shape", "gamma_rate", "p10_a", "p10_b", "p01_a", "p01_b"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class BetaBelief:
    """Beta(a, b) belief over a transition probability, one per user."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if np.any(self.a <= 0.0) or np.any(self.b <= 0.0):
            raise ValueError("Beta parameters must be > 0")

    @property
    def mean(self):
        return self.a / (self.a + self.b)


@dataclass
class GammaBelief:
    """Gamma(shape, rate) belief over a signal precision, one per entry."""

    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        self.shape = np.asarray(self.shape, dtype=float)
        self.rate = np.asarray(self.rate, dtype=float)
        if np.any(self.shape <= 0.0) or np.any(self.rate <= 0.0):
            raise ValueError("Gamma parameters must be > 0")

    @property
    def mean_variance(self):
        """Mean signal variance implied by the precision belief, rate/shape."""
        return self.rate / self.shape


@dataclass
class McConstants:
    """Surrogate transition weights: exponentiated expected log probabilities.

    stay_active = exp E[ln(1 - p01)], activate = exp E[ln p10],
    stay_inactive = exp E[ln(1 - p10)], deactivate = exp E[ln p01].
    All lie in (0, 1].
    """

    stay_active: np.ndarray
    activate: np.ndarray
    stay_inactive: np.ndarray
    deactivate: np.ndarray


@dataclass
class PairwiseBeliefs:
    """Posterior beliefs over chain boundaries and transitions.

    first_active is the posterior activity of slot 1 per user; the b** arrays
    hold unnormalized beliefs for the four (previous, current) state pairs of
    slots (j-1, j) for j >= 2, with norm their per-transition sum.
    """

    first_active: np.ndarray  # (...,)
    b00: np.ndarray  # (..., J-1)
    b01: np.ndarray  # active -> inactive
    b10: np.ndarray  # inactive -> active
    b11: np.ndarray
    norm: np.ndarray


@dataclass
class JointBelief:
    """Per-entry belief: activation mass plus active-component Gaussian moments."""

    active_prob: np.ndarray
    mu: np.ndarray
    var: np.ndarray


@dataclass
class PosteriorSummary:
    """Posterior signal moments and activity probabilities over the frame."""

    mean: np.ndarray
    variance: np.ndarray
    activity: np.ndarray

    def copy(self) -> "PosteriorSummary":
        return PosteriorSummary(self.mean.copy(), self.variance.copy(), self.activity.copy())


def activation_log_ratio(q, v_q, gamma: GammaBelief, mode: PsiMode = PsiMode.APPROX):
    """Log evidence ratio between the active and inactive explanation of q.

    ln[ exp(psi(shape)) CN(q; 0, v_q + rate/shape) / (shape CN(q; 0, v_q)) ],
    evaluated fully in the log domain.
    """
    shape, rate = gamma.shape, gamma.rate
    wide = np.asarray(v_q, dtype=float) + rate / shape
    return (
        psi(shape, mode)
        - np.log(shape)
        + log_cgauss(q, 0.0, wide)
        - log_cgauss(q, 0.0, np.asarray(v_q, dtype=float))
    )


def activation_likelihood(q, v_q, gamma: GammaBelief, mode: PsiMode = PsiMode.APPROX):
    """Bernoulli likelihood message ratio/(ratio+1) for the activity state."""
    return clamp_prob(sigmoid(activation_log_ratio(q, v_q, gamma, mode)))


def mc_constants(bel10: BetaBelief, bel01: BetaBelief,
                 mode: PsiMode = PsiMode.APPROX) -> McConstants:
    """Surrogate transition weights from the current Beta beliefs."""
    ln_p10, ln_not_p10 = beta_log_expectations(bel10.a, bel10.b, mode)
    ln_p01, ln_not_p01 = beta_log_expectations(bel01.a, bel01.b, mode)
    return McConstants(
        stay_active=np.exp(ln_not_p01),
        activate=np.exp(ln_p10),
        stay_inactive=np.exp(ln_not_p10),
        deactivate=np.exp(ln_p01),
    )


def _col(c):
    c = np.asarray(c, dtype=float)
    return c[..., None] if c.ndim else c


def mc_forward(act_like: np.ndarray, cst: McConstants):
    """Forward sweep along each chain.

    Returns (fwd_prior, fwd_state): the predictive activity probability
    entering each slot from the past, and the same combined with the slot's
    activation likelihood.  Slot 1 starts from the initial-state factor,
    whose surrogate weights are activate/stay_inactive.
    """
    act_like = np.asarray(act_like, dtype=float)
    c1, c2 = np.asarray(cst.stay_active, float), np.asarray(cst.activate, float)
    c3, c4 = np.asarray(cst.stay_inactive, float), np.asarray(cst.deactivate, float)
    fwd_prior = np.empty_like(act_like)
    fwd_state = np.empty_like(act_like)
    fwd_prior[..., 0] = clamp_prob(c2 / (c2 + c3))
    fwd_state[..., 0] = combine_odds(fwd_prior[..., 0], act_like[..., 0])
    for j in range(1, act_like.shape[-1]):
        prev = fwd_state[..., j - 1]
        num = prev * c1 + (1.0 - prev) * c2
        den = prev * (c1 + c4) + (1.0 - prev) * (c2 + c3)
        fwd_prior[..., j] = clamp_prob(num / den)
        fwd_state[..., j] = combine_odds(fwd_prior[..., j], act_like[..., j])
    return fwd_prior, fwd_state


def mc_backward(act_like: np.ndarray, cst: McConstants):
    """Backward sweep along each chain.

    Returns (bwd_state, bwd_prior).  The last slot has no factor above it, so
    its bwd_state is the bare likelihood and its bwd_prior is uninformative
    (1/2).
    """
    act_like = np.asarray(act_like, dtype=float)
    c1, c2 = np.asarray(cst.stay_active, float), np.asarray(cst.activate, float)
    c3, c4 = np.asarray(cst.stay_inactive, float), np.asarray(cst.deactivate, float)
    bwd_prior = np.empty_like(act_like)
    bwd_state = np.empty_like(act_like)
    bwd_state[..., -1] = clamp_prob(act_like[..., -1])
    bwd_prior[..., -1] = 0.5
    for j in range(act_like.shape[-1] - 2, -1, -1):
        nxt = bwd_state[..., j + 1]
        num = nxt * c1 + (1.0 - nxt) * c4
        den = nxt * (c1 + c2) + (1.0 - nxt) * (c3 + c4)
        bwd_prior[..., j] = clamp_prob(num / den)
        bwd_state[..., j] = combine_odds(bwd_prior[..., j], act_like[..., j])
    return bwd_state, bwd_prior


def prior_activity(fwd_prior: np.ndarray, bwd_prior: np.ndarray) -> np.ndarray:
    """Extrinsic activity prior: past and future messages, likelihood excluded."""
    return combine_odds(fwd_prior, bwd_prior)


def pairwise_beliefs(fwd_state: np.ndarray, bwd_state: np.ndarray,
                     bwd_prior: np.ndarray, cst: McConstants) -> PairwiseBeliefs:
    """Beliefs over consecutive state pairs and over the first slot's state.

    The pairwise belief at the factor between slots j-1 and j multiplies the
    incoming state messages by the surrogate transition weight of each of the
    four (previous, current) combinations.
    """
    prev = np.asarray(fwd_state, dtype=float)[..., :-1]
    nxt = np.asarray(bwd_state, dtype=float)[..., 1:]
    c1, c2 = _col(cst.stay_active), _col(cst.activate)
    c3, c4 = _col(cst.stay_inactive), _col(cst.deactivate)
    b11 = prev * c1 * nxt
    b10 = (1.0 - prev) * c2 * nxt
    b01 = prev * c4 * (1.0 - nxt)
    b00 = (1.0 - prev) * c3 * (1.0 - nxt)
    norm = b00 + b01 + b10 + b11
    first = combine_odds(np.asarray(fwd_state)[..., 0], np.asarray(bwd_prior)[..., 0])
    return PairwiseBeliefs(first_active=first, b00=b00, b01=b01, b10=b10, b11=b11, norm=norm)


def update_transition_beliefs(pb: PairwiseBeliefs,
                              hp: HyperpriorConfig) -> tuple[BetaBelief, BetaBelief]:
    """Conjugate Beta refresh from expected transition counts.

    Activations (and the first slot's activation mass) count toward the p10
    belief, deactivations toward p01; stays count as the respective failures.
    Returns (belief over p10, belief over p01).
    """
    if np.any(pb.norm <= 0.0):
        raise ValueError("pairwise beliefs must have positive normalization")
    n10 = np.sum(pb.b10 / pb.norm, axis=-1)
    n00 = np.sum(pb.b00 / pb.norm, axis=-1)
    n01 = np.sum(pb.b01 / pb.norm, axis=-1)
    n11 = np.sum(pb.b11 / pb.norm, axis=-1)
    bel10 = BetaBelief(a=pb.first_active + hp.p10_a + n10,
                       b=1.0 - pb.first_active + hp.p10_b + n00)
    bel01 = BetaBelief(a=hp.p01_a + n01, b=hp.p01_b + n11)
    return bel10, bel01


def joint_belief(q, v_q, chain_prior, gamma: GammaBelief,
                 mode: PsiMode = PsiMode.APPROX) -> JointBelief:
    """Combined belief of signal and activity given the pseudo-observations.

    The active-component Gaussian has precision 1/v_q + shape/rate; the
    activation mass merges the chain prior with the activation evidence in
    log-odds.
    """
    v_q = np.asarray(v_q, dtype=float)
    var = 1.0 / (1.0 / v_q + gamma.shape / gamma.rate)
    mu = (np.asarray(q) / v_q) * var
    log_ratio = activation_log_ratio(q, v_q, gamma, mode)
    active = clamp_prob(sigmoid(log_ratio + logit(chain_prior)))
    return JointBelief(active_prob=active, mu=mu, var=var)


def update_precision(jb: JointBelief, hp: HyperpriorConfig) -> GammaBelief:
    """Conjugate Gamma refresh from the current joint belief.

    Re-derived from the fixed hyperprior each iteration; nothing accumulates
    across iterations.
    """
    second_moment = np.abs(jb.mu) ** 2 + jb.var
    return GammaBelief(shape=hp.gamma_shape + jb.active_prob,
                       rate=hp.gamma_rate + jb.active_prob * second_moment)


def posterior_moments(jb: JointBelief) -> PosteriorSummary:
    """Posterior mean/variance of the signal entries under the joint belief.

    The variance is computed in the spread form B(1-B)|mu|^2 + B*var, which
    is algebraically identical to B(|mu|^2 + var) - |B mu|^2 but cannot go
    negative in floating point.
    """
    active = jb.active_prob
    mean = active * jb.mu
    variance = active * (1.0 - active) * np.abs(jb.mu) ** 2 + active * jb.var
    return PosteriorSummary(mean=np.asarray(mean, dtype=np.complex128),
                            variance=np.asarray(variance, dtype=float),
                            activity=np.asarray(active, dtype=float))
