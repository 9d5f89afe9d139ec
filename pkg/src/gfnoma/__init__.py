"""Message-passing multi-user detection for uplink grant-free NOMA.

Library layout:

* :mod:`gfnoma.model`     - synthetic frame generation (channel, bursty
  activity, BPSK symbols, AWGN observations).
* :mod:`gfnoma.numerics`  - special functions and log-domain Gaussian math.
* :mod:`gfnoma.gamp`      - the sum-product GAMP linear engine.
* :mod:`gfnoma.bgmc`      - the chain-coupled Bernoulli-Gaussian prior with
  online Beta/Gamma hyperparameter learning.
* :mod:`gfnoma.detectors` - full detectors (adaptive chain prior, SBL-style
  baselines, genie spike-and-slab) and hard-decision slicing.
* :mod:`gfnoma.harness`   - deterministic Monte Carlo SER sweeps.
* :mod:`gfnoma.oracles`   - brute-force references used for validation.
* :mod:`gfnoma.cli`       - command-line front end (``gfnoma ...``).
"""

from .bgmc import HyperpriorConfig, PosteriorSummary
from .detectors import (
    ALGORITHMS,
    DetectionResult,
    DetectorConfig,
    decide_symbols,
    detect,
    detect_gamp_bgmc,
    detect_gamp_pcsbl,
    detect_gamp_sbl,
    detect_genie_bg,
)
from .harness import ExperimentSpec, SerCurve, TrialResult, compute_ser, run_experiment, run_trial
from .model import (
    ReceivedFrame,
    SystemConfig,
    generate_activity,
    generate_channel,
    modulate,
    noise_precision_from_snr,
    transmit,
)
from .numerics import PsiMode

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "DetectionResult",
    "DetectorConfig",
    "ExperimentSpec",
    "HyperpriorConfig",
    "PosteriorSummary",
    "PsiMode",
    "ReceivedFrame",
    "SerCurve",
    "SystemConfig",
    "TrialResult",
    "compute_ser",
    "decide_symbols",
    "detect",
    "detect_gamp_bgmc",
    "detect_gamp_pcsbl",
    "detect_gamp_sbl",
    "detect_genie_bg",
    "generate_activity",
    "generate_channel",
    "modulate",
    "noise_precision_from_snr",
    "run_experiment",
    "run_trial",
    "transmit",
    "__version__",
]
