"""Monte Carlo SER experiments: paired trials, deterministic seeding, sweeps.

Each trial draws one (channel, activity, symbols, noise) instance from an rng
stream keyed by (master seed, sweep value, trial index) and runs every
configured detector on the same instance, so detector comparisons are paired.
Aggregation sums integer error counts, which makes the result independent of
trial completion order and of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bgmc import HyperpriorConfig
from .detectors import DetectorConfig, detect, detector_config_for, slice_posterior
from .model import (
    SystemConfig,
    generate_activity,
    generate_channel,
    modulate,
    noise_precision_from_snr,
    transmit,
)

AXIS_ITERATION = "iteration"
AXIS_SNR = "snr_db"
AXIS_ACTIVITY = "activity_rate"
SWEEP_AXES = (AXIS_ITERATION, AXIS_SNR, AXIS_ACTIVITY)

SER_PER_SYMBOL = "per_symbol"  # denominator trials * K * J
SER_PER_USER = "per_user"  # denominator trials * K (slots not counted)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: base system, detectors to compare, axis, values, budget."""

    system: SystemConfig = SystemConfig()
    detectors: tuple[str, ...] = ("bgmc", "sbl")
    sweep_axis: str = AXIS_SNR
    sweep_values: tuple[float, ...] = (0.0, 3.0, 6.0, 9.0, 12.0)
    num_trials: int = 1000
    master_seed: int = 1
    ser_mode: str = SER_PER_SYMBOL
    hyper: HyperpriorConfig = HyperpriorConfig()
    base_detector: DetectorConfig = DetectorConfig()

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep_axis must be one of {SWEEP_AXES}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")
        if self.ser_mode not in (SER_PER_SYMBOL, SER_PER_USER):
            raise ValueError("ser_mode must be 'per_symbol' or 'per_user'")
        if not self.detectors:
            raise ValueError("at least one detector required")


@dataclass
class TrialResult:
    """Error bookkeeping of one instance across detectors."""

    errors: dict[str, int]
    symbols: int
    iterations: dict[str, int]
    per_iter_errors: dict[str, tuple[int, ...]] | None = None


@dataclass
class SerCurve:
    """Aggregated log10 error rates of one detector along the sweep."""

    detector: str
    sweep_values: tuple[float, ...]
    log10_ser: list[float] = field(default_factory=list)
    errors: list[int] = field(default_factory=list)
    symbols: list[int] = field(default_factory=list)
    mean_iters: list[float] = field(default_factory=list)


def _value_key(value: float) -> int:
    """Stable 64-bit key of a sweep value for seeding."""
    return int(np.frombuffer(np.float64(value).tobytes(), dtype=np.uint64)[0])


def trial_rng(master_seed: int, sweep_value: float, trial_index: int) -> np.random.Generator:
    """Independent stream per (seed, value, trial); order-insensitive."""
    return np.random.default_rng([master_seed, _value_key(sweep_value), trial_index])


def _system_for(spec: ExperimentSpec, sweep_value: float) -> SystemConfig:
    if spec.sweep_axis == AXIS_SNR:
        return replace(spec.system, snr_db=float(sweep_value))
    if spec.sweep_axis == AXIS_ACTIVITY:
        return replace(spec.system, activity_rate=float(sweep_value))
    return spec.system


def count_errors(hard_symbols: np.ndarray, true_symbols: np.ndarray) -> int:
    """Entries where the hard decision differs from the truth (0, +1 or -1)."""
    return int(np.count_nonzero(hard_symbols != np.real(true_symbols)))


def run_trial(spec: ExperimentSpec, sweep_value: float, trial_index: int) -> TrialResult:
    """Generate one instance and run every detector of the spec on it."""
    cfg = _system_for(spec, sweep_value)
    rng = trial_rng(spec.master_seed, sweep_value, trial_index)
    h = generate_channel(cfg, rng)
    s = generate_activity(cfg, rng)
    b = modulate(s, rng)
    lam = noise_precision_from_snr(cfg)
    frame = transmit(h, b, lam, rng)

    want_history = spec.sweep_axis == AXIS_ITERATION
    errors: dict[str, int] = {}
    iters: dict[str, int] = {}
    per_iter: dict[str, tuple[int, ...]] = {}
    for name in spec.detectors:
        det_cfg = detector_config_for(name, spec.base_detector, cfg.activity_rate,
                                      cfg.max_iters, cfg.convergence_tol)
        if want_history:
            det_cfg = replace(det_cfg, keep_history=True)
        result = detect(frame.samples, h, lam, det_cfg, spec.hyper)
        errors[name] = count_errors(result.hard_symbols, b)
        iters[name] = result.iterations_used
        if want_history:
            counts = []
            for snapshot in result.history or []:
                hard, _ = slice_posterior(snapshot, det_cfg)
                counts.append(count_errors(hard, b))
            while len(counts) < cfg.max_iters:  # converged early: decision frozen
                counts.append(counts[-1] if counts else errors[name])
            per_iter[name] = tuple(counts)
    return TrialResult(errors=errors, symbols=b.size, iterations=iters,
                       per_iter_errors=per_iter if want_history else None)


def compute_ser(errors: int, trials: int, num_users: int, num_slots: int,
                mode: str = SER_PER_SYMBOL) -> float:
    """log10 error rate; zero errors return the numeric floor sentinel.

    per_symbol divides by trials*K*J; per_user divides by trials*K.  The
    floor sentinel is -log10(denominator) - 1, strictly below any observable
    nonzero rate.
    """
    denom = trials * num_users * (num_slots if mode == SER_PER_SYMBOL else 1)
    if errors == 0:
        return -math.log10(denom) - 1.0
    return math.log10(errors / denom)


def _trial_task(args) -> TrialResult:
    spec, value, index = args
    return run_trial(spec, value, index)


def _map_trials(tasks, threads):
    if threads <= 1:
        return [_trial_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=chunk))


def run_experiment(spec: ExperimentSpec, threads: int = 1,
                   progress=None) -> list[SerCurve]:
    """Run the full sweep and aggregate per-detector SER curves.

    The iteration axis runs the trial batch once with per-iteration snapshots
    and reads each sweep point from the snapshot error counts; the other axes
    rerun the batch per sweep value.  ``progress`` is an optional callable
    invoked as progress(sweep_value) after each sweep point completes.
    """
    k, j = spec.system.num_users, spec.system.num_slots
    curves = {name: SerCurve(detector=name, sweep_values=tuple(spec.sweep_values))
              for name in spec.detectors}

    if spec.sweep_axis == AXIS_ITERATION:
        if any(v < 1 or v > spec.system.max_iters or float(v) != int(v)
               for v in spec.sweep_values):
            raise ValueError("iteration sweep values must be integers in [1, max_iters]")
        seed_value = spec.system.snr_db
        tasks = [(spec, seed_value, i) for i in range(spec.num_trials)]
        results = _map_trials(tasks, threads)
        for name in spec.detectors:
            counts = np.array([r.per_iter_errors[name] for r in results], dtype=np.int64)
            total_iters = sum(r.iterations[name] for r in results)
            for value in spec.sweep_values:
                errs = int(counts[:, int(value) - 1].sum())
                _append_point(curves[name], errs, spec, k, j, total_iters)
        if progress is not None:
            progress(spec.sweep_values[-1])
        return [curves[name] for name in spec.detectors]

    for value in spec.sweep_values:
        tasks = [(spec, value, i) for i in range(spec.num_trials)]
        results = _map_trials(tasks, threads)
        for name in spec.detectors:
            errs = sum(r.errors[name] for r in results)
            total_iters = sum(r.iterations[name] for r in results)
            _append_point(curves[name], errs, spec, k, j, total_iters)
        if progress is not None:
            progress(value)
    return [curves[name] for name in spec.detectors]


def _append_point(curve: SerCurve, errs: int, spec: ExperimentSpec, k: int, j: int,
                  total_iters: int):
    curve.errors.append(errs)
    curve.symbols.append(spec.num_trials * k * j)
    curve.log10_ser.append(compute_ser(errs, spec.num_trials, k, j, spec.ser_mode))
    curve.mean_iters.append(total_iters / spec.num_trials)
