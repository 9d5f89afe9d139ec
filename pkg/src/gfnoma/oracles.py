"""Independent reference computations used to validate the fast paths.

These deliberately avoid the message-passing and GAMP recursions: the chain
oracle enumerates every binary state sequence, the LMMSE oracle solves the
dense normal equations, and the ML oracle scores every hypothesis frame.
They back the self test and the verification suite.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_chain(act_like, stay_active, activate, stay_inactive, deactivate):
    """Exact posteriors of one binary chain by brute-force enumeration.

    The joint weight of a sequence s_1..s_J is the initial-state weight
    (activate if s_1 = 1 else stay_inactive), times the transition weight of
    every consecutive pair, times prod_j (act_like_j if s_j = 1 else
    1 - act_like_j).  Returns (marginals, pairwise) where marginals[j] is
    P(s_j = 1) and pairwise[j - 1, a, b] is P(s_{j-1} = a, s_j = b) for
    j >= 2.
    """
    act_like = np.asarray(act_like, dtype=float)
    j = act_like.shape[0]
    trans = {
        (0, 0): float(stay_inactive),
        (0, 1): float(activate),
        (1, 0): float(deactivate),
        (1, 1): float(stay_active),
    }
    init = {0: float(stay_inactive), 1: float(activate)}

    marginals = np.zeros(j)
    pairwise = np.zeros((max(j - 1, 0), 2, 2))
    total = 0.0
    for seq in itertools.product((0, 1), repeat=j):
        w = init[seq[0]]
        for t in range(1, j):
            w *= trans[(seq[t - 1], seq[t])]
        for t in range(j):
            w *= act_like[t] if seq[t] == 1 else 1.0 - act_like[t]
        total += w
        for t in range(j):
            if seq[t] == 1:
                marginals[t] += w
        for t in range(1, j):
            pairwise[t - 1, seq[t - 1], seq[t]] += w
    if total <= 0.0:
        raise ValueError("chain has zero total weight")
    return marginals / total, pairwise / total


def lmmse_estimate(h, y, noise_precision, prior_var, prior_mean=0.0):
    """Exact linear MMSE estimate by dense solve.

    Prior b ~ CN(prior_mean, diag(prior_var)); observation y = H b + w with
    noise precision lam:  bhat = m + (V^-1 + lam H^H H)^-1 lam H^H (y - H m).
    Accepts y of shape (N,) or (N, J) and returns the matching shape.
    """
    h = np.asarray(h, dtype=np.complex128)
    single = np.ndim(y) == 1
    y = np.atleast_2d(np.asarray(y, dtype=np.complex128).T).T
    k = h.shape[1]
    prior_var = np.broadcast_to(np.asarray(prior_var, dtype=float), (k,))
    prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=np.complex128), (k,))
    a = np.diag(1.0 / prior_var) + noise_precision * (h.conj().T @ h)
    rhs = noise_precision * (h.conj().T @ (y - h @ prior_mean[:, None]))
    est = prior_mean[:, None] + np.linalg.solve(a, rhs)
    return est[:, 0] if single else est


def ml_search_bpsk(y, h):
    """Exhaustive maximum-likelihood frame over symbols in {0, +1, -1}.

    The squared residual of a frame separates across slots, so each slot's
    minimizer is found by scoring all 3^K hypotheses for that slot; the
    concatenation minimizes the full-frame objective.  Feasible only for
    small K.
    """
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    k = h.shape[1]
    hypotheses = np.array(list(itertools.product((0.0, 1.0, -1.0), repeat=k))).T  # (K, 3^K)
    predictions = h @ hypotheses  # (N, 3^K)
    best = np.zeros((k, y.shape[1]))
    for j in range(y.shape[1]):
        cost = np.sum(np.abs(y[:, [j]] - predictions) ** 2, axis=0)
        best[:, j] = hypotheses[:, int(np.argmin(cost))]
    return best
