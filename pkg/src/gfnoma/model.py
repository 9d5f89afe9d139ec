"""Synthetic uplink grant-free NOMA instances for the symbol-level linear model.

A frame couples K users over N subcarriers for J consecutive time slots:

    Y = H B + W,   H in C^{N x K},  B in C^{K x J},  W ~ CN(0, 1/lam per entry)

Rows of the activity matrix S mark which users transmit in which slots; B is
BPSK on the active support and exactly zero elsewhere.  All generators are
pure functions of (config, rng), so distinct trials with disjoint rng streams
are reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCENARIO_PARTIAL = "partial"
SCENARIO_FULL = "full"


@dataclass(frozen=True)
class SystemConfig:
    """Frame dimensions, activity statistics and detector budget.

    scenario "full" keeps each user's activity constant over the frame;
    "partial" draws each user's activity from a stationary two-state Markov
    chain with stationary active probability ``activity_rate`` and mean
    active burst length ``mean_burst_len`` slots.
    """

    num_users: int = 20
    num_subcarriers: int = 30
    num_slots: int = 6
    activity_rate: float = 0.3
    snr_db: float = 9.0
    modulation: str = "bpsk"
    scenario: str = SCENARIO_PARTIAL
    mean_burst_len: int = 3
    max_iters: int = 20
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if not 0.0 < self.activity_rate <= 1.0:
            raise ValueError("activity_rate must be in (0, 1]")
        if self.modulation != "bpsk":
            raise ValueError(f"modulation {self.modulation!r} not supported (only 'bpsk')")
        if self.scenario not in (SCENARIO_PARTIAL, SCENARIO_FULL):
            raise ValueError(f"scenario must be 'partial' or 'full', got {self.scenario!r}")
        if self.mean_burst_len < 1:
            raise ValueError("mean_burst_len must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be > 0")

    @property
    def num_active(self) -> int:
        """Nominal active-user count round(activity_rate * num_users)."""
        return int(math.floor(self.activity_rate * self.num_users + 0.5))


@dataclass(frozen=True)
class ReceivedFrame:
    """Noisy observations of one frame plus the known noise precision."""

    samples: np.ndarray  # (N, J) complex
    noise_precision: float

    def __post_init__(self):
        if self.noise_precision <= 0.0:
            raise ValueError("noise_precision must be > 0")


def generate_channel(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw an N x K matrix of i.i.d. CN(0, 1) entries with unit-norm columns.

    Column normalization fixes the per-user received energy, which makes the
    SNR convention of :func:`noise_precision_from_snr` well defined.
    """
    n, k = cfg.num_subcarriers, cfg.num_users
    h = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2.0)
    return h / np.linalg.norm(h, axis=0, keepdims=True)


def _partial_transition_rates(cfg: SystemConfig) -> tuple[float, float]:
    """Stationary chain rates (p10, p01) hitting the target rate and burst length."""
    p_a, burst = cfg.activity_rate, float(cfg.mean_burst_len)
    if p_a >= 1.0:
        raise ValueError(
            "partial scenario infeasible: activity_rate = 1 leaves no inactive state"
        )
    p01 = 1.0 / burst
    p10 = p_a / (burst * (1.0 - p_a))
    if p10 >= 1.0:
        raise ValueError(
            f"partial scenario infeasible: implied activation rate {p10:.4f} >= 1 "
            f"(activity_rate {p_a} too large for mean_burst_len {cfg.mean_burst_len})"
        )
    tiny = 1e-12
    return min(max(p10, tiny), 1.0 - tiny), min(max(p01, tiny), 1.0 - tiny)


def generate_activity(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw the K x J binary activity matrix for the configured scenario."""
    k, j = cfg.num_users, cfg.num_slots
    s = np.zeros((k, j), dtype=np.int8)
    if cfg.scenario == SCENARIO_FULL:
        active = rng.choice(k, size=min(cfg.num_active, k), replace=False)
        s[active, :] = 1
        return s
    p10, p01 = _partial_transition_rates(cfg)
    s[:, 0] = rng.random(k) < cfg.activity_rate
    for t in range(1, j):
        u = rng.random(k)
        prev = s[:, t - 1] == 1
        s[:, t] = np.where(prev, u >= p01, u < p10)
    return s


def modulate(s: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """BPSK symbols on the active support: +-1 uniformly, zero where inactive."""
    signs = 2.0 * rng.integers(0, 2, size=s.shape) - 1.0
    return np.where(s == 1, signs, 0.0).astype(np.complex128)


def transmit(
    h: np.ndarray, b: np.ndarray, noise_precision: float, rng: np.random.Generator
) -> ReceivedFrame:
    """Propagate B through the channel and add complex AWGN of the given precision."""
    if noise_precision <= 0.0:
        raise ValueError("noise_precision must be > 0")
    if h.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: H is {h.shape}, B is {b.shape}")
    scale = np.sqrt(0.5 / noise_precision)
    n, j = h.shape[0], b.shape[1]
    w = scale * (rng.standard_normal((n, j)) + 1j * rng.standard_normal((n, j)))
    return ReceivedFrame(samples=h @ b + w, noise_precision=noise_precision)


def noise_precision_from_snr(cfg: SystemConfig) -> float:
    """Noise precision lam realizing SNR = 10 log10(E||HB||^2 / E||W||^2).

    With unit-norm channel columns and unit-energy active symbols the mean
    received signal power per slot is activity_rate * K and the noise power
    per slot is N / lam, giving lam = N * 10^(snr/10) / (activity_rate * K).
    """
    signal_power = cfg.activity_rate * cfg.num_users
    return cfg.num_subcarriers * 10.0 ** (cfg.snr_db / 10.0) / signal_power
