"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  Tolerances and experiment sizes are pinned here and
nowhere else.
"""

import math
import time
from dataclasses import replace

import numpy as np

from gfnoma import gamp
from gfnoma.bgmc import (
    BetaBelief,
    GammaBelief,
    HyperpriorConfig,
    JointBelief,
    activation_likelihood,
    joint_belief,
    mc_backward,
    mc_constants,
    mc_forward,
    pairwise_beliefs,
    posterior_moments,
    prior_activity,
    update_precision,
)
from gfnoma.cli import main
from gfnoma.detectors import DetectorConfig, detect
from gfnoma.harness import ExperimentSpec, run_trial
from gfnoma.model import (
    SystemConfig,
    generate_activity,
    generate_channel,
    modulate,
    noise_precision_from_snr,
    transmit,
)
from gfnoma.numerics import PsiMode, combine_odds, digamma_exact, log_cgauss, psi_approx
from gfnoma.oracles import enumerate_chain, lmmse_estimate


def report(criterion, ok, detail):
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def paired_error_counts(spec, sweep_value):
    """Per-trial error counts for every detector at one sweep point."""
    counts = {name: [] for name in spec.detectors}
    for index in range(spec.num_trials):
        trial = run_trial(spec, sweep_value, index)
        for name in spec.detectors:
            counts[name].append(trial.errors[name])
    return {name: np.array(vals) for name, vals in counts.items()}


def test_criterion_1_chain_inference_oracle():
    """Forward/backward marginals and pairwise beliefs match enumeration."""
    rng = np.random.default_rng(101)
    start = time.time()
    worst = 0.0
    for _ in range(1000):
        j = int(rng.integers(2, 9))
        like = rng.uniform(0.01, 0.99, size=j)
        bel10 = BetaBelief(a=rng.uniform(0.3, 6.0, 1), b=rng.uniform(0.3, 6.0, 1))
        bel01 = BetaBelief(a=rng.uniform(0.3, 6.0, 1), b=rng.uniform(0.3, 6.0, 1))
        cst = mc_constants(bel10, bel01)
        fwd_prior, fwd_state = mc_forward(like[None, :], cst)
        bwd_state, bwd_prior = mc_backward(like[None, :], cst)
        pb = pairwise_beliefs(fwd_state, bwd_state, bwd_prior, cst)
        marg = combine_odds(fwd_state, bwd_prior)[0]
        ref_marg, ref_pair = enumerate_chain(
            like, float(cst.stay_active[0]), float(cst.activate[0]),
            float(cst.stay_inactive[0]), float(cst.deactivate[0]))
        worst = max(worst, float(np.max(np.abs(marg - ref_marg))),
                    abs(float(pb.first_active[0]) - ref_marg[0]))
        pair = np.stack([
            np.stack([pb.b00[0], pb.b10[0]], axis=-1),
            np.stack([pb.b01[0], pb.b11[0]], axis=-1),
        ], axis=-2) / pb.norm[0][:, None, None]
        worst = max(worst, float(np.max(np.abs(pair - ref_pair))))
    elapsed = time.time() - start
    report(1, worst <= 1e-10 and elapsed < 10.0,
           f"1000 chains, max deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_gamp_lmmse_equivalence():
    """Gaussian-prior fixed point matches the dense LMMSE solve.

    Instances: unit-norm-column complex Gaussian channels with noise
    precision log-uniform in [1, 20] (the contraction slows with the
    signal-to-noise ratio; 20 leaves an order of magnitude of margin at 50
    iterations).
    """
    rng = np.random.default_rng(102)
    start = time.time()
    worst = 0.0
    for _ in range(100):
        n, k = 30, 20
        h = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
        h /= np.linalg.norm(h, axis=0, keepdims=True)
        lam = float(10.0 ** rng.uniform(0.0, math.log10(20.0)))
        b = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.5 / lam)
        y = h @ b + w
        state = gamp.init_state(np.zeros(k, complex), np.ones(k))
        denoiser = gamp.gaussian_denoiser(0.0, 1.0)
        for _ in range(50):
            gamp.iterate(state, y, h, lam, denoiser)
        ref = lmmse_estimate(h, y, lam, np.ones(k))
        worst = max(worst, float(np.linalg.norm(state.b_mean - ref)
                                 / np.linalg.norm(ref)))
    elapsed = time.time() - start
    report(2, worst < 1e-6 and elapsed < 30.0,
           f"100 instances, max relative error {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_equation_unit_vectors():
    """Scalar examples reproduce independent direct evaluations to 1e-6."""
    failures = []

    def check(name, got, want, tol=1e-6):
        if abs(got - want) > tol:
            failures.append(f"{name}: got {got!r}, want {want!r}")

    check("psi(1)", psi_approx(1.0), -0.5)
    check("psi(2)", psi_approx(2.0), math.log(2.0) - 0.25)
    check("psi(1/2)", psi_approx(0.5), math.log(0.5) - 1.0)
    check("digamma(1)", digamma_exact(1.0), -np.euler_gamma)
    check("digamma(2)", digamma_exact(2.0), 1.0 - np.euler_gamma)
    check("digamma(10)", digamma_exact(10.0),
          -np.euler_gamma + sum(1.0 / k for k in range(1, 10)))
    check("log density peak", log_cgauss(0.0, 0.0, 1.0), -math.log(math.pi))
    check("log density var 2", log_cgauss(0.0, 0.0, 2.0), -math.log(2 * math.pi))
    check("log density shifted", log_cgauss(1.0 + 0j, 0.0, 1.0),
          -math.log(math.pi) - 1.0)

    unit = GammaBelief(shape=np.array(1.0), rate=np.array(1.0))
    temp = math.exp(-0.5) * (1.0 / (2.0 * math.pi)) / (1.0 / math.pi)
    check("activation likelihood", float(activation_likelihood(0j, 1.0, unit)),
          temp / (temp + 1.0))
    scaled = GammaBelief(shape=np.array(10.0), rate=np.array(10.0))
    temp10 = math.exp(math.log(10.0) - 0.05) / 20.0
    check("activation likelihood scaled",
          float(activation_likelihood(0j, 1.0, scaled)), temp10 / (temp10 + 1.0))

    flat = BetaBelief(a=np.array(1.0), b=np.array(1.0))
    check("transition weight surrogate",
          float(mc_constants(flat, flat, PsiMode.APPROX).activate),
          math.exp(-0.5 - math.log(2.0) + 0.25))
    check("transition weight exact",
          float(mc_constants(flat, flat, PsiMode.EXACT).activate), math.exp(-1.0))

    check("noise precision 0 dB", noise_precision_from_snr(SystemConfig(snr_db=0.0)),
          5.0)
    check("noise precision 9 dB", noise_precision_from_snr(SystemConfig(snr_db=9.0)),
          5.0 * 10.0 ** 0.9)

    check("extrinsic prior", float(prior_activity(np.array(0.2), np.array(0.7))),
          0.14 / 0.38)

    jb = joint_belief(np.array(1.0 + 0j), np.array(1.0), np.array(0.5), unit)
    check("joint variance", float(jb.var), 0.5)
    check("joint mean", float(np.real(jb.mu)), 0.5)
    refreshed = update_precision(JointBelief(active_prob=np.array(1.0),
                                             mu=np.array(1.0 + 0j),
                                             var=np.array(0.5)), HyperpriorConfig())
    check("precision shape", float(refreshed.shape), 2.0)
    check("precision rate", float(refreshed.rate), 2.5)
    spread = posterior_moments(JointBelief(active_prob=np.array(0.5),
                                           mu=np.array(1.0 + 0j), var=np.array(0.0)))
    check("posterior spread mean", float(np.real(spread.mean)), 0.5)
    check("posterior spread variance", float(spread.variance), 0.25)

    report(3, not failures, "all unit vectors reproduce to 1e-6" if not failures
           else "; ".join(failures))


def test_criterion_4_snr_ordering():
    """Chain detector beats the uncoupled baseline at 6, 9 and 12 dB."""
    start = time.time()
    spec = ExperimentSpec(system=SystemConfig(), detectors=("bgmc", "sbl"),
                          sweep_axis="snr_db", sweep_values=(6.0, 9.0, 12.0),
                          num_trials=1000, master_seed=401)
    totals = {}
    significance = ""
    ok = True
    for snr in spec.sweep_values:
        counts = paired_error_counts(spec, snr)
        totals[snr] = {n: int(v.sum()) for n, v in counts.items()}
        ok = ok and totals[snr]["bgmc"] <= totals[snr]["sbl"]
        if snr == 9.0:
            diff = counts["sbl"] - counts["bgmc"]
            margin = diff.sum() / (math.sqrt(len(diff)) * diff.std(ddof=1))
            significance = f", 9 dB margin {margin:.1f} standard errors"
            ok = ok and margin > 2.0
    elapsed = time.time() - start
    ok = ok and elapsed < 600.0
    report(4, ok, f"errors {totals}{significance}, {elapsed:.0f}s")


def test_criterion_5_convergence_speed():
    """Median iterations to reach each algorithm's own final error count."""
    spec = ExperimentSpec(system=SystemConfig(), detectors=("bgmc", "sbl"),
                          sweep_axis="iteration",
                          sweep_values=tuple(float(t) for t in range(1, 21)),
                          num_trials=200, master_seed=405)
    settle = {name: [] for name in spec.detectors}
    for index in range(spec.num_trials):
        trial = run_trial(spec, spec.system.snr_db, index)
        for name in spec.detectors:
            counts = np.array(trial.per_iter_errors[name])
            final = counts[-1]
            inside = np.abs(counts - final) <= 0.1 * final
            settle[name].append(int(np.argmax(inside)) + 1)
    medians = {name: float(np.median(vals)) for name, vals in settle.items()}
    report(5, medians["bgmc"] <= medians["sbl"],
           f"median settling iterations {medians} over {spec.num_trials} trials")


def test_criterion_6_activity_rate_ordering():
    """Chain detector at least ties the baseline on 4 of 5 activity rates."""
    start = time.time()
    spec = ExperimentSpec(system=SystemConfig(), detectors=("bgmc", "sbl"),
                          sweep_axis="activity_rate",
                          sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5),
                          num_trials=1000, master_seed=406)
    wins = 0
    totals = {}
    for rate in spec.sweep_values:
        counts = paired_error_counts(spec, rate)
        totals[rate] = {n: int(v.sum()) for n, v in counts.items()}
        wins += int(totals[rate]["bgmc"] <= totals[rate]["sbl"])
    elapsed = time.time() - start
    report(6, wins >= 4, f"ordering holds at {wins}/5 points, errors {totals}, "
                         f"{elapsed:.0f}s")


def test_criterion_7_per_iteration_complexity():
    """Per-iteration wall time grows at most 2.5x when N or K doubles."""

    def per_iteration_seconds(n, k, iters=25, repeats=5):
        cfg = SystemConfig(num_users=k, num_subcarriers=n)
        rng = np.random.default_rng(n * 1000 + k)
        h = generate_channel(cfg, rng)
        b = modulate(generate_activity(cfg, rng), rng)
        lam = noise_precision_from_snr(cfg)
        y = transmit(h, b, lam, rng).samples
        det = DetectorConfig(algorithm="bgmc", max_iters=iters, convergence_tol=0.0)
        detect(y, h, lam, det)  # warm up
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            detect(y, h, lam, det)
            times.append((time.perf_counter() - start) / iters)
        return float(np.median(times))

    base = per_iteration_seconds(30, 20)
    double_n = per_iteration_seconds(60, 20)
    double_k = per_iteration_seconds(30, 40)
    ratio_n = double_n / base
    ratio_k = double_k / base
    report(7, ratio_n <= 2.5 and ratio_k <= 2.5,
           f"per-iteration time ratios: N doubled {ratio_n:.2f}x, "
           f"K doubled {ratio_k:.2f}x (base {base * 1e6:.0f} us)")


def test_criterion_8_thread_determinism(tmp_path):
    """Identical CSV bytes regardless of the worker count."""
    cfg_path = tmp_path / "exp.toml"
    cfg_path.write_text("""
[system]
num_users = 10
num_subcarriers = 15
num_slots = 4
max_iters = 10

[experiment]
detectors = ["bgmc", "sbl"]
sweep_values = [6.0, 9.0]
num_trials = 24
master_seed = 21
""")
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    code_a = main(["run", "--config", str(cfg_path), "--output", str(out_a),
                   "--threads", "1"])
    code_b = main(["run", "--config", str(cfg_path), "--output", str(out_b),
                   "--threads", "2"])
    identical = out_a.read_bytes() == out_b.read_bytes()
    report(8, code_a == 0 and code_b == 0 and identical,
           "CSV byte-identical for --threads 1 vs --threads 2")


def test_criterion_9_invariant_suite():
    """Randomized detector iterations keep every quantity finite and clamped."""
    rng = np.random.default_rng(109)
    iterations = 0
    instances = 0
    start = time.time()
    while iterations < 10_000:
        k = int(rng.integers(3, 12))
        n = int(rng.integers(k // 2 + 2, 20))
        j = int(rng.integers(2, 6))
        burst = int(rng.integers(1, 4))
        # partial feasibility needs rate/(burst*(1-rate)) < 1
        rate = float(rng.uniform(0.1, min(0.6, burst / (burst + 1.0) - 0.05)))
        scenario = "partial" if rng.random() < 0.7 else "full"
        cfg = SystemConfig(num_users=k, num_subcarriers=n, num_slots=j,
                           activity_rate=rate, snr_db=float(rng.uniform(-5, 25)),
                           scenario=scenario, mean_burst_len=burst)
        h = generate_channel(cfg, rng)
        s = generate_activity(cfg, rng)
        b = modulate(s, rng)
        lam = noise_precision_from_snr(cfg)
        y = transmit(h, b, lam, rng).samples
        algorithm = ("bgmc", "sbl", "pcsbl", "genie_bg")[instances % 4]
        det = DetectorConfig(algorithm=algorithm, max_iters=12, convergence_tol=0.0,
                             genie_activity_rate=rate, runtime_checks=True)
        result = detect(y, h, lam, det)
        iterations += result.iterations_used
        instances += 1
    elapsed = time.time() - start
    report(9, True, f"{iterations} checked iterations across {instances} instances, "
                    f"no violations, {elapsed:.0f}s")
