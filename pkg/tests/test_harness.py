"""Monte Carlo harness checks: seeding, aggregation, SER math, reproducibility."""

import math
from dataclasses import replace

import numpy as np
import pytest

from gfnoma.harness import (
    ExperimentSpec,
    compute_ser,
    run_experiment,
    run_trial,
    trial_rng,
)
from gfnoma.model import SystemConfig

SMALL = ExperimentSpec(
    system=SystemConfig(num_users=8, num_subcarriers=12, num_slots=4, max_iters=10),
    detectors=("bgmc", "sbl"),
    sweep_axis="snr_db",
    sweep_values=(6.0, 9.0),
    num_trials=12,
    master_seed=5,
)


class TestSpecValidation:
    def test_rejects_bad_axis(self):
        with pytest.raises(ValueError, match="sweep_axis"):
            replace(SMALL, sweep_axis="noise")

    def test_rejects_unsorted_values(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            replace(SMALL, sweep_values=(9.0, 6.0))

    def test_rejects_empty_values(self):
        with pytest.raises(ValueError, match="nonempty"):
            replace(SMALL, sweep_values=())

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError, match="num_trials"):
            replace(SMALL, num_trials=0)


class TestSeeding:
    def test_streams_differ_across_indices(self):
        a = trial_rng(1, 9.0, 0).random(4)
        b = trial_rng(1, 9.0, 1).random(4)
        assert not np.array_equal(a, b)

    def test_streams_differ_across_values(self):
        a = trial_rng(1, 6.0, 0).random(4)
        b = trial_rng(1, 9.0, 0).random(4)
        assert not np.array_equal(a, b)

    def test_stream_is_reproducible(self):
        assert np.array_equal(trial_rng(3, 0.3, 17).random(8),
                              trial_rng(3, 0.3, 17).random(8))


class TestRunTrial:
    def test_deterministic(self):
        a = run_trial(SMALL, 9.0, 3)
        b = run_trial(SMALL, 9.0, 3)
        assert a.errors == b.errors
        assert a.iterations == b.iterations
        assert a.symbols == b.symbols

    def test_error_counts_bounded_by_symbols(self):
        result = run_trial(SMALL, 6.0, 0)
        assert result.symbols == 8 * 4
        for errs in result.errors.values():
            assert 0 <= errs <= result.symbols

    def test_high_snr_instance_is_error_free(self):
        spec = replace(SMALL, sweep_values=(40.0,))
        for index in range(5):
            result = run_trial(spec, 40.0, index)
            assert all(v == 0 for v in result.errors.values())

    def test_empty_truth_rarely_errors(self):
        # full scenario with rate 0.02 rounds to zero active users
        spec = replace(SMALL, system=SystemConfig(num_users=8, num_subcarriers=12,
                                                  num_slots=4, activity_rate=0.02,
                                                  scenario="full", max_iters=10))
        total = sum(sum(run_trial(spec, 9.0, i).errors.values()) for i in range(10))
        assert total == 0

    def test_iteration_axis_records_per_iteration_errors(self):
        spec = replace(SMALL, sweep_axis="iteration", sweep_values=(1.0, 5.0, 10.0))
        result = run_trial(spec, 9.0, 0)
        assert result.per_iter_errors is not None
        for counts in result.per_iter_errors.values():
            assert len(counts) == spec.system.max_iters
            assert all(c >= 0 for c in counts)


class TestComputeSer:
    def test_reference_value_per_user_mode(self):
        assert compute_ser(20, 1000, 20, 6, "per_user") == pytest.approx(-3.0)

    def test_per_symbol_mode(self):
        got = compute_ser(20, 1000, 20, 6, "per_symbol")
        assert got == pytest.approx(math.log10(20 / 120000))

    def test_zero_errors_floor_sentinel(self):
        got = compute_ser(0, 1000, 20, 6, "per_symbol")
        assert got == pytest.approx(-math.log10(120000) - 1.0)

    def test_all_wrong_is_zero(self):
        assert compute_ser(1000 * 20 * 6, 1000, 20, 6, "per_symbol") == pytest.approx(0.0)


class TestRunExperiment:
    def test_aggregation_matches_manual_sum(self):
        curves = run_experiment(SMALL)
        for curve in curves:
            for vi, value in enumerate(SMALL.sweep_values):
                manual = sum(run_trial(SMALL, value, i).errors[curve.detector]
                             for i in range(SMALL.num_trials))
                assert curve.errors[vi] == manual
                assert curve.symbols[vi] == SMALL.num_trials * 8 * 4

    def test_thread_count_does_not_change_results(self):
        serial = run_experiment(SMALL, threads=1)
        parallel = run_experiment(SMALL, threads=3)
        for a, b in zip(serial, parallel):
            assert a.detector == b.detector
            assert a.errors == b.errors
            assert a.log10_ser == b.log10_ser
            assert a.mean_iters == b.mean_iters

    def test_single_trial_curve_equals_trial_rate(self):
        spec = replace(SMALL, num_trials=1, sweep_values=(9.0,))
        curves = run_experiment(spec)
        trial = run_trial(spec, 9.0, 0)
        for curve in curves:
            want = compute_ser(trial.errors[curve.detector], 1, 8, 4, "per_symbol")
            assert curve.log10_ser[0] == pytest.approx(want)

    def test_iteration_axis_curves(self):
        spec = replace(SMALL, sweep_axis="iteration", sweep_values=(1.0, 4.0, 10.0),
                       num_trials=6)
        curves = run_experiment(spec)
        for curve in curves:
            assert len(curve.log10_ser) == 3
            # later iterations never have more errors recorded than the start
            assert curve.errors[-1] <= curve.errors[0]

    def test_iteration_axis_rejects_out_of_range_values(self):
        spec = replace(SMALL, sweep_axis="iteration", sweep_values=(1.0, 99.0))
        with pytest.raises(ValueError, match="iteration sweep"):
            run_experiment(spec)

    def test_progress_callback_runs(self):
        seen = []
        run_experiment(replace(SMALL, num_trials=2), progress=seen.append)
        assert seen == [6.0, 9.0]

    def test_error_rate_monotone_in_snr_for_every_detector(self):
        spec = ExperimentSpec(system=SystemConfig(),
                              detectors=("bgmc", "sbl", "pcsbl", "genie_bg"),
                              sweep_axis="snr_db", sweep_values=(6.0, 12.0),
                              num_trials=100, master_seed=31)
        curves = run_experiment(spec)
        for curve in curves:
            assert curve.errors[1] <= curve.errors[0], curve.detector
