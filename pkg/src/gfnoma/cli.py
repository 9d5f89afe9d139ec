"""Command-line front end: configured sweeps, CSV output, built-in self test.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 self-test
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import harness, oracles
from .bgmc import (
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
from .detectors import ALGORITHMS, DetectorConfig
from .gamp import gaussian_denoiser, init_state, iterate
from .harness import AXIS_ACTIVITY, AXIS_ITERATION, AXIS_SNR, ExperimentSpec
from .model import SystemConfig, noise_precision_from_snr
from .numerics import (
    PsiMode,
    beta_log_expectations,
    combine_odds,
    digamma_exact,
    log_cgauss,
    psi_approx,
)

log = logging.getLogger("gfnoma")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_SELFTEST = 4

SEED_ENV_VAR = "GFNOMA_SEED"


class ConfigError(Exception):
    """Invalid configuration file or configuration values."""


_SYSTEM_KEYS = {
    "num_users", "num_subcarriers", "num_slots", "activity_rate", "snr_db",
    "modulation", "scenario", "mean_burst_len", "max_iters", "convergence_tol",
}
_EXPERIMENT_KEYS = {
    "detectors", "sweep_axis", "sweep_values", "num_trials", "master_seed", "ser_mode",
}
_PRIOR_KEYS = {"gamma_shape", "gamma_rate", "p10_a", "p10_b", "p01_a", "p01_b"}
_DETECTOR_KEYS = {
    "damping", "psi_mode", "activity_threshold", "energy_threshold",
    "pcsbl_beta", "inner_passes",
}
_SECTIONS = {
    "system": _SYSTEM_KEYS,
    "experiment": _EXPERIMENT_KEYS,
    "prior": _PRIOR_KEYS,
    "detector": _DETECTOR_KEYS,
}


def _load_document(path: str) -> dict:
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"failed to parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a table/object, got {type(doc).__name__}")
    return doc


def _check_keys(doc: dict):
    for section, content in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config section [{section}] must be a table/object")
        unknown = set(content) - _SECTIONS[section]
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )


def parse_config(path: str | None) -> ExperimentSpec:
    """Build an ExperimentSpec from a TOML or JSON file (strict keys).

    Missing keys fall back to the standard defaults (20 users, 30
    subcarriers, 6 slots, activity rate 0.3, 20 iterations, 1000 trials,
    unit hyperpriors).
    """
    doc = _load_document(path) if path else {}
    _check_keys(doc)
    try:
        system = SystemConfig(**doc.get("system", {}))
        hyper = HyperpriorConfig(**doc.get("prior", {}))
        det_section = dict(doc.get("detector", {}))
        if "psi_mode" in det_section:
            det_section["psi_mode"] = PsiMode(det_section["psi_mode"])
        base_detector = DetectorConfig(**det_section)
        exp = dict(doc.get("experiment", {}))
        if "detectors" in exp:
            detectors = tuple(exp.pop("detectors"))
            for name in detectors:
                if name not in ALGORITHMS:
                    raise ConfigError(
                        f"unknown detector {name!r}; expected one of {ALGORITHMS}"
                    )
        else:
            detectors = ("bgmc", "sbl")
        sweep_axis = exp.pop("sweep_axis", AXIS_SNR)
        sweep_values = exp.pop("sweep_values", None)
        if sweep_values is None:
            sweep_values = default_sweep_values(sweep_axis, system)
        if "master_seed" not in exp:
            env = os.environ.get(SEED_ENV_VAR)
            if env is not None:
                try:
                    exp["master_seed"] = int(env)
                except ValueError as exc:
                    raise ConfigError(
                        f"{SEED_ENV_VAR} must be an integer, got {env!r}"
                    ) from exc
        spec = ExperimentSpec(
            system=system,
            detectors=detectors,
            sweep_axis=sweep_axis,
            sweep_values=tuple(float(v) for v in sweep_values),
            hyper=hyper,
            base_detector=base_detector,
            **exp,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def default_sweep_values(axis: str, system: SystemConfig) -> tuple[float, ...]:
    if axis == AXIS_SNR:
        return (0.0, 3.0, 6.0, 9.0, 12.0)
    if axis == AXIS_ACTIVITY:
        return (0.1, 0.2, 0.3, 0.4, 0.5)
    if axis == AXIS_ITERATION:
        return tuple(float(t) for t in range(1, system.max_iters + 1))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def emit_csv(curves: list[harness.SerCurve], path: str):
    """Write curves as CSV: one row per (sweep value, detector).

    Columns: sweep_value,detector,log10_ser,errors,symbols,mean_iters with
    six fractional digits on decimals and a newline-terminated final row.
    """
    if not curves:
        raise ValueError("curves must be nonempty")
    lines = ["sweep_value,detector,log10_ser,errors,symbols,mean_iters"]
    for i, value in enumerate(curves[0].sweep_values):
        for curve in curves:
            lines.append(
                f"{value:.6f},{curve.detector},{curve.log10_ser[i]:.6f},"
                f"{curve.errors[i]},{curve.symbols[i]},{curve.mean_iters[i]:.6f}"
            )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise RuntimeError(f"failed to write CSV to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# self test


def _approx(name, computed, expected, tol=1e-6):
    ok = abs(computed - expected) <= tol
    return name, ok, f"computed={computed:.10g} expected={expected:.10g}"


def _unit_vector_checks(psi_shift: float):
    """Scalar equation checks against independent inline evaluations."""
    checks = []
    checks.append(_approx("psi surrogate at 1", psi_approx(1.0) + psi_shift, -0.5))
    checks.append(_approx("psi surrogate at 2", psi_approx(2.0) + psi_shift,
                          math.log(2.0) - 0.25))
    checks.append(_approx("psi surrogate at 1/2", psi_approx(0.5) + psi_shift,
                          math.log(0.5) - 1.0))
    euler_gamma = 0.5772156649015329
    checks.append(_approx("digamma at 1", digamma_exact(1.0), -euler_gamma, 1e-10))
    checks.append(_approx("digamma at 2", digamma_exact(2.0), 1.0 - euler_gamma, 1e-10))
    checks.append(_approx("digamma at 10", digamma_exact(10.0), 2.251752589066721, 1e-10))
    checks.append(_approx("log density peak var 1", log_cgauss(0.0, 0.0, 1.0),
                          -math.log(math.pi)))
    checks.append(_approx("log density peak var 2", log_cgauss(0.0, 0.0, 2.0),
                          -math.log(2.0 * math.pi)))
    checks.append(_approx("log density unit shift", log_cgauss(1.0 + 0.0j, 0.0, 1.0),
                          -math.log(math.pi) - 1.0))

    exp_ln, exp_ln1m = beta_log_expectations(1.0, 1.0, PsiMode.APPROX)
    want = (math.log(1.0) - 0.5) - (math.log(2.0) - 0.25)
    checks.append(_approx("beta log expectation (surrogate)", exp_ln, want))
    checks.append(_approx("beta log expectation symmetry", exp_ln1m, want))
    exp_ln, _ = beta_log_expectations(1.0, 1.0, PsiMode.EXACT)
    checks.append(_approx("beta log expectation (exact)", exp_ln, -1.0, 1e-9))

    gamma11 = GammaBelief(shape=np.array(1.0), rate=np.array(1.0))
    ratio = math.exp(-0.5) * (1.0 / (2.0 * math.pi)) / (1.0 / math.pi)
    checks.append(_approx("activation likelihood, unit beliefs",
                          float(activation_likelihood(0.0 + 0.0j, 1.0, gamma11)),
                          ratio / (ratio + 1.0)))
    gamma1010 = GammaBelief(shape=np.array(10.0), rate=np.array(10.0))
    ratio10 = (math.exp(math.log(10.0) - 0.05) * (1.0 / (2.0 * math.pi))
               / (10.0 / math.pi))
    checks.append(_approx("activation likelihood, scaled beliefs",
                          float(activation_likelihood(0.0 + 0.0j, 1.0, gamma1010)),
                          ratio10 / (ratio10 + 1.0)))

    flat = BetaBelief(a=np.array(1.0), b=np.array(1.0))
    cst = mc_constants(flat, flat, PsiMode.APPROX)
    checks.append(_approx("transition weight (surrogate)", float(cst.activate),
                          math.exp((math.log(1.0) - 0.5) - (math.log(2.0) - 0.25))))
    cst = mc_constants(flat, flat, PsiMode.EXACT)
    checks.append(_approx("transition weight (exact)", float(cst.activate),
                          math.exp(-1.0)))

    cfg0 = SystemConfig(snr_db=0.0)
    checks.append(_approx("noise precision at 0 dB",
                          noise_precision_from_snr(cfg0), 30.0 / 6.0))
    cfg9 = SystemConfig(snr_db=9.0)
    checks.append(_approx("noise precision at 9 dB",
                          noise_precision_from_snr(cfg9),
                          (30.0 / 6.0) * 10.0 ** 0.9))

    checks.append(_approx("extrinsic prior combination",
                          float(prior_activity(np.array(0.2), np.array(0.7))),
                          0.14 / (0.14 + 0.24)))

    jb = joint_belief(np.array(1.0 + 0.0j), np.array(1.0), np.array(0.5), gamma11)
    checks.append(_approx("joint belief variance", float(jb.var), 0.5))
    checks.append(_approx("joint belief mean", float(np.real(jb.mu)), 0.5))

    refreshed = update_precision(
        JointBelief(active_prob=np.array(1.0), mu=np.array(1.0 + 0.0j), var=np.array(0.5)),
        HyperpriorConfig(),
    )
    checks.append(_approx("precision refresh shape", float(refreshed.shape), 2.0))
    checks.append(_approx("precision refresh rate", float(refreshed.rate), 2.5))

    spread = posterior_moments(
        JointBelief(active_prob=np.array(0.5), mu=np.array(1.0 + 0.0j), var=np.array(0.0))
    )
    checks.append(_approx("posterior mean spread", float(np.real(spread.mean)), 0.5))
    checks.append(_approx("posterior variance spread", float(spread.variance), 0.25))
    return checks


def _chain_oracle_check(cases=25, seed=7, tol=1e-10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        j = int(rng.integers(2, 9))
        like = rng.uniform(0.02, 0.98, size=j)
        bel10 = BetaBelief(a=rng.uniform(0.5, 5.0, 1), b=rng.uniform(0.5, 5.0, 1))
        bel01 = BetaBelief(a=rng.uniform(0.5, 5.0, 1), b=rng.uniform(0.5, 5.0, 1))
        cst = mc_constants(bel10, bel01)
        fwd_prior, fwd_state = mc_forward(like[None, :], cst)
        bwd_state, bwd_prior = mc_backward(like[None, :], cst)
        pb = pairwise_beliefs(fwd_state, bwd_state, bwd_prior, cst)
        marg = combine_odds(fwd_state, bwd_prior)[0]
        ref_marg, ref_pair = oracles.enumerate_chain(
            like, float(cst.stay_active[0]), float(cst.activate[0]),
            float(cst.stay_inactive[0]), float(cst.deactivate[0]))
        worst = max(worst, float(np.max(np.abs(marg - ref_marg))))
        # layout [previous state, current state]: b10 is 0 -> 1, b01 is 1 -> 0
        got_pair = np.stack([
            np.stack([pb.b00[0], pb.b10[0]], axis=-1),
            np.stack([pb.b01[0], pb.b11[0]], axis=-1),
        ], axis=-2) / pb.norm[0][:, None, None]
        worst = max(worst, float(np.max(np.abs(got_pair - ref_pair))))
    return "chain inference vs enumeration", worst <= tol, f"max abs deviation {worst:.3e}"


def _lmmse_oracle_check(instances=5, seed=11, tol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n, k = 30, 20
        h = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
        h /= np.linalg.norm(h, axis=0, keepdims=True)
        lam = 5.0
        b = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.5 / lam)
        y = h @ b + w
        state = init_state(np.zeros(k, dtype=np.complex128), np.ones(k))
        den = gaussian_denoiser(0.0, 1.0)
        for _ in range(50):
            iterate(state, y, h, lam, den)
        ref = oracles.lmmse_estimate(h, y, lam, np.ones(k))
        rel = float(np.linalg.norm(state.b_mean - ref) / np.linalg.norm(ref))
        worst = max(worst, rel)
    return "linear engine vs dense solve", worst <= tol, f"max relative error {worst:.3e}"


def selftest(psi_shift: float = 0.0, stream=None):
    """Run equation unit vectors plus the enumeration and dense-solve oracles.

    ``psi_shift`` perturbs the surrogate-psi checks; nonzero values exist so
    the negative-control test can confirm the checks actually bite.  Returns
    the list of (name, ok, detail) triples.
    """
    stream = stream or sys.stdout
    checks = _unit_vector_checks(psi_shift)
    checks.append(_chain_oracle_check())
    checks.append(_lmmse_oracle_check())
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + ("" if ok else f"  ({detail})"),
              file=stream)
    failed = [name for name, ok, _ in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed", file=stream)
    return checks


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfnoma",
        description="Monte Carlo SER experiments for grant-free NOMA detectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    axis_of = {
        "run": None,
        "sweep-snr": AXIS_SNR,
        "sweep-iter": AXIS_ITERATION,
        "sweep-pa": AXIS_ACTIVITY,
    }
    for name, axis in axis_of.items():
        p = sub.add_parser(name, help={
            "run": "run the sweep configured in the config file",
            "sweep-snr": "sweep SNR in dB",
            "sweep-iter": "record SER after each outer iteration",
            "sweep-pa": "sweep the activity rate",
        }[name])
        p.add_argument("--config", help="TOML or JSON experiment config")
        p.add_argument("--output", default="results.csv", help="output CSV path")
        p.add_argument("--seed", type=int, help=f"master seed (overrides config and ${SEED_ENV_VAR})")
        p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.set_defaults(axis=axis)
    p = sub.add_parser("selftest", help="run built-in oracle and unit-vector checks")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _run_command(args) -> int:
    spec = parse_config(args.config)
    if args.axis is not None and spec.sweep_axis != args.axis:
        spec = replace(spec, sweep_axis=args.axis,
                       sweep_values=default_sweep_values(args.axis, spec.system))
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    log.info("running %s sweep over %s with %d trials/point, detectors %s",
             spec.sweep_axis, list(spec.sweep_values), spec.num_trials,
             list(spec.detectors))
    progress = (lambda v: log.info("sweep point %s done", v)) if args.verbose else None
    curves = harness.run_experiment(spec, threads=max(1, args.threads), progress=progress)
    emit_csv(curves, args.output)
    print(f"wrote {args.output}")
    for curve in curves:
        pts = ", ".join(f"{v:g}:{r:.3f}" for v, r in zip(curve.sweep_values, curve.log10_ser))
        print(f"  {curve.detector:<9} log10(SER) {pts}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            checks = selftest()
            return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_SELFTEST
        return _run_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
