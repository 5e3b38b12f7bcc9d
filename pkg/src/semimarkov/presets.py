"""Built-in reference models: respiratory pattern dynamics during a
spontaneous breathing trial on CPAP, for two outcome cohorts.

States: PAU (pause), ASB (asynchronous breathing), MVT (movement artifact),
SYB (synchronized breathing), UNK (unclassified).  One model describes
patients who passed the trial ("success"), the other patients who failed
("failure").  Transition rows are reported to two decimals and renormalized
at construction; dwell parameters are given in seconds.  The models carry no
fit statistics (log-likelihood and BIC are None) since the underlying
observations are not distributed with the package.

These are useful as demo inputs for the simulator and as nontrivial fixtures:
the two cohorts differ visibly in transition structure (failure patients
pause into synchronized breathing more, move away from movement faster) and
in dwell scale (longer pauses in the failure cohort).
"""

from __future__ import annotations

from .dwell import EXPONENTIAL, GEV, GPD, INVERSE_GAUSSIAN, DwellFit
from .fitting import SemiMarkovModel, TransitionMatrix
from .sequences import build_alphabet

PATTERNS = build_alphabet(("PAU", "ASB", "MVT", "SYB", "UNK"))

# Row order matches PATTERNS; rows renormalize to absorb two-decimal rounding.
SUCCESS_ROWS = (
    (0.00, 0.27, 0.09, 0.26, 0.38),
    (0.10, 0.00, 0.16, 0.29, 0.45),
    (0.12, 0.32, 0.00, 0.43, 0.14),
    (0.06, 0.25, 0.15, 0.00, 0.54),
    (0.13, 0.28, 0.04, 0.55, 0.00),
)

FAILURE_ROWS = (
    (0.00, 0.28, 0.06, 0.39, 0.28),
    (0.12, 0.00, 0.21, 0.28, 0.40),
    (0.17, 0.41, 0.00, 0.32, 0.09),
    (0.14, 0.21, 0.14, 0.00, 0.52),
    (0.15, 0.30, 0.03, 0.52, 0.00),
)

SUCCESS_DWELL = {
    "PAU": DwellFit(family=EXPONENTIAL, params={"mu": 2.51}),
    "ASB": DwellFit(family=GEV, params={"k": 0.63, "sigma": 1.30, "mu": 1.85}),
    "MVT": DwellFit(family=GPD, params={"k": -0.22, "sigma": 3.62}),
    "SYB": DwellFit(family=INVERSE_GAUSSIAN, params={"mu": 8.61, "lambda": 3.61}),
    "UNK": DwellFit(family=GPD, params={"k": -0.07, "sigma": 2.07}),
}

FAILURE_DWELL = {
    "PAU": DwellFit(family=EXPONENTIAL, params={"mu": 2.94}),
    "ASB": DwellFit(family=GEV, params={"k": 0.65, "sigma": 1.36, "mu": 1.81}),
    "MVT": DwellFit(family=GPD, params={"k": -0.11, "sigma": 3.31}),
    "SYB": DwellFit(family=INVERSE_GAUSSIAN, params={"mu": 7.83, "lambda": 3.41}),
    "UNK": DwellFit(family=GPD, params={"k": -0.10, "sigma": 2.05}),
}


def success_model() -> SemiMarkovModel:
    """Semi-Markov model of the cohort that passed the breathing trial."""
    return SemiMarkovModel(
        transitions=TransitionMatrix.from_probabilities(SUCCESS_ROWS, PATTERNS),
        dwell=dict(SUCCESS_DWELL),
        metadata={"cohort": "success"},
    )


def failure_model() -> SemiMarkovModel:
    """Semi-Markov model of the cohort that failed the breathing trial."""
    return SemiMarkovModel(
        transitions=TransitionMatrix.from_probabilities(FAILURE_ROWS, PATTERNS),
        dwell=dict(FAILURE_DWELL),
        metadata={"cohort": "failure"},
    )
