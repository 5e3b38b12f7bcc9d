"""Maximum-likelihood fitting of transition structure and dwell distributions.

Three model layers:

* ``fit_dtmc``: per-sample discrete-time Markov chain, T_ij = n_ij / sum_j n_ij.
* ``fit_semi_markov``: transitions over collapsed runs (structural zero
  diagonal) plus one fitted dwell-time distribution per observed state.
* ``fit_multi_chain``: independent semi-Markov models over equal-time
  segments of each sequence, to expose non-stationarity.

Counts are pooled across sequences; transitions are never counted across
sequence boundaries (sequences are independent recordings).
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dwell import FAMILIES, DwellFit, fit_exponential, select_family
from .errors import (
    AllFitsFailedError,
    BoundaryOutOfRangeError,
    EmptyInputError,
    MixedSamplingRatesError,
    NoTransitionsError,
    SegmentTooShortError,
    SequenceTooShortError,
)
from .sequences import (
    LabeledSequence,
    RunSequence,
    StateAlphabet,
    durations_by_state,
    encode_runs,
    split_at_time,
)

logger = logging.getLogger(__name__)

DTMC = "dtmc"
SEMI_MARKOV = "semi_markov"


def _as_readonly_float_matrix(values, n: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (n, n):
        raise ValueError(f"{what} must be {n}x{n}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    """Raw pooled transition counts n_ij (row = from-state, column = to-state)."""

    counts: np.ndarray
    alphabet: StateAlphabet

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64)
        n = len(self.alphabet)
        if arr.shape != (n, n):
            raise ValueError(f"counts must be {n}x{n}, got {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic transition matrix with explicit absent-row flags.

    ``row_fitted[i]`` is False when state i was never observed with an
    outgoing transition; such rows are all-zero and carry no probabilities
    (they are never silently imputed).  ``kind`` is "dtmc" for per-sample
    chains or "semi_markov" for run-level chains, whose diagonal is exactly
    zero by construction.
    """

    probs: np.ndarray
    alphabet: StateAlphabet
    row_fitted: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        n = len(self.alphabet)
        probs = _as_readonly_float_matrix(self.probs, n, "probs")
        fitted = np.array(self.row_fitted, dtype=bool)
        if fitted.shape != (n,):
            raise ValueError(f"row_fitted must have length {n}")
        fitted.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "row_fitted", fitted)
        if self.kind not in (DTMC, SEMI_MARKOV):
            raise ValueError(f"kind must be {DTMC!r} or {SEMI_MARKOV!r}")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        for i in range(n):
            if fitted[i]:
                if abs(sums[i] - 1.0) > 1e-12:
                    raise ValueError(
                        f"fitted row {self.alphabet.name(i)} sums to {sums[i]!r}, not 1"
                    )
            elif sums[i] != 0.0:
                raise ValueError(f"absent row {self.alphabet.name(i)} must be all zero")
        if self.kind == SEMI_MARKOV and np.any(np.diag(probs) != 0.0):
            raise ValueError("semi_markov matrices must have an exactly zero diagonal")

    @property
    def n_states(self) -> int:
        return len(self.alphabet)

    def absent_states(self) -> list[str]:
        return [self.alphabet.name(i) for i in np.flatnonzero(~self.row_fitted)]

    def row(self, state: str) -> np.ndarray:
        return self.probs[self.alphabet.index(state)]

    @classmethod
    def from_counts(
        cls, counts: TransitionCounts, kind: str = DTMC
    ) -> "TransitionMatrix":
        """Normalize count rows to probabilities; zero rows become absent."""
        c = counts.counts.astype(float)
        totals = c.sum(axis=1)
        fitted = totals > 0
        probs = np.zeros_like(c)
        probs[fitted] = c[fitted] / totals[fitted, None]
        return cls(probs=probs, alphabet=counts.alphabet, row_fitted=fitted, kind=kind)

    @classmethod
    def from_probabilities(
        cls,
        rows,
        alphabet: StateAlphabet,
        kind: str = SEMI_MARKOV,
        normalize: bool = True,
    ) -> "TransitionMatrix":
        """Build from given probability rows (e.g. published, rounded values).

        With ``normalize`` each non-zero row is rescaled to sum exactly to 1,
        which absorbs rounding in externally reported matrices.  All-zero
        rows become absent rows.
        """
        n = len(alphabet)
        arr = np.array(rows, dtype=float)
        if arr.shape != (n, n):
            raise ValueError(f"rows must be {n}x{n}, got {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("probabilities must be non-negative")
        totals = arr.sum(axis=1)
        fitted = totals > 0
        if normalize:
            arr[fitted] = arr[fitted] / totals[fitted, None]
        return cls(probs=arr, alphabet=alphabet, row_fitted=fitted, kind=kind)


@dataclass(frozen=True, eq=False)
class SemiMarkovModel:
    """Run-level transition matrix plus per-state dwell-time distributions.

    ``dwell`` is keyed by state name and holds an entry for every state with
    at least one observed run.  ``metadata`` carries bookkeeping only
    (per-state run counts, cohort label, 1-based segment index) and never
    influences simulation or comparison.
    """

    transitions: TransitionMatrix
    dwell: dict[str, DwellFit]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.transitions.kind != SEMI_MARKOV:
            raise ValueError("SemiMarkovModel requires a semi_markov transition matrix")
        for name in self.dwell:
            self.transitions.alphabet.index(name)  # raises on unknown state

    @property
    def alphabet(self) -> StateAlphabet:
        return self.transitions.alphabet


@dataclass(frozen=True, eq=False)
class MultiChainModel:
    """Ordered per-segment semi-Markov models over non-overlapping time spans.

    ``boundaries`` are the segment cut points in seconds (len(segments) - 1
    of them, strictly increasing); segment k governs [boundaries[k-1],
    boundaries[k]) with the convention boundaries[-1] = 0.
    """

    segments: tuple[SemiMarkovModel, ...]
    boundaries: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        if len(self.segments) < 1:
            raise ValueError("MultiChainModel needs at least one segment")
        if len(self.segments) != len(self.boundaries) + 1:
            raise ValueError("need exactly len(segments) - 1 boundaries")
        if any(b <= 0 for b in self.boundaries):
            raise ValueError("boundaries must be positive times in seconds")
        if any(b2 <= b1 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly increasing")
        first = self.segments[0].alphabet
        if any(seg.alphabet != first for seg in self.segments[1:]):
            raise ValueError("all segments must share one alphabet")

    @property
    def alphabet(self) -> StateAlphabet:
        return self.segments[0].alphabet

    def segment_at(self, t_s: float) -> int:
        """Index of the segment governing time t_s (boundary belongs to the
        later segment; times past the last boundary stay in the last segment)."""
        return int(np.searchsorted(np.asarray(self.boundaries), t_s, side="right"))


# --- DTMC --------------------------------------------------------------------


def fit_dtmc(
    seqs: list[LabeledSequence], alphabet: StateAlphabet
) -> tuple[TransitionMatrix, TransitionCounts]:
    """Per-sample maximum-likelihood Markov chain: T_ij = n_ij / sum_j n_ij.

    Counts pool across sequences; the last sample of one sequence and the
    first of the next never form a transition.  States with zero outgoing
    counts are flagged absent.  All sequences must share the sampling rate
    (per-sample transition probabilities are rate-dependent).
    """
    if not seqs:
        raise EmptyInputError("no sequences supplied")
    rates = {s.sampling_rate_hz for s in seqs}
    if len(rates) > 1:
        raise MixedSamplingRatesError(
            f"sequences mix sampling rates {sorted(rates)}; resample first"
        )
    n = len(alphabet)
    counts = np.zeros((n, n), dtype=np.int64)
    for seq in seqs:
        if len(seq) < 2:
            raise SequenceTooShortError(
                f"sequence {seq.id!r} has {len(seq)} samples; need at least 2"
            )
        if seq.labels.max() >= n:
            raise ValueError(
                f"sequence {seq.id!r} uses label indices outside the alphabet"
            )
        np.add.at(counts, (seq.labels[:-1], seq.labels[1:]), 1)
    tc = TransitionCounts(counts=counts, alphabet=alphabet)
    return TransitionMatrix.from_counts(tc, kind=DTMC), tc


# --- semi-Markov -------------------------------------------------------------


def fit_semi_markov_transitions(
    runs_list: list[RunSequence], alphabet: StateAlphabet
) -> TransitionMatrix:
    """Run-level transition matrix: counts over consecutive run pairs.

    Adjacent runs differ by construction, so the diagonal is structurally
    zero.  The terminal run of each sequence has no outgoing transition.
    """
    if not runs_list:
        raise EmptyInputError("no run sequences supplied")
    n = len(alphabet)
    counts = np.zeros((n, n), dtype=np.int64)
    total = 0
    for runs in runs_list:
        if runs.states.max() >= n:
            raise ValueError(f"run sequence {runs.id!r} uses states outside the alphabet")
        if len(runs) < 2:
            continue
        np.add.at(counts, (runs.states[:-1], runs.states[1:]), 1)
        total += len(runs) - 1
    if total == 0:
        raise NoTransitionsError(
            "every sequence is a single run; no run-level transitions observed"
        )
    tc = TransitionCounts(counts=counts, alphabet=alphabet)
    return TransitionMatrix.from_counts(tc, kind=SEMI_MARKOV)


def _pooled_durations(runs_list: list[RunSequence]) -> dict[int, list[float]]:
    pooled: dict[int, list[float]] = {}
    for runs in runs_list:
        for state, durs in durations_by_state(runs).items():
            pooled.setdefault(state, []).extend(durs)
    return pooled


def _fit_dwell_with_fallback(
    state_name: str, durations: list[float], candidate_families
) -> DwellFit:
    try:
        return select_family(durations, candidate_families)
    except AllFitsFailedError as exc:
        warnings.warn(
            f"every candidate dwell family failed for state {state_name!r} "
            f"({exc}); falling back to an exponential fit",
            UserWarning,
            stacklevel=3,
        )
        return dataclasses.replace(fit_exponential(durations), fallback=True)


def fit_semi_markov_from_runs(
    runs_list: list[RunSequence],
    alphabet: StateAlphabet,
    candidate_families=FAMILIES,
    metadata: dict[str, Any] | None = None,
) -> SemiMarkovModel:
    """Fit transitions and per-state dwell distributions from run sequences.

    Dwell observations include first runs (possibly left-censored) and
    terminal runs (right-censored): at recording lengths of a few hundred
    dwells per state the censoring bias is small, and dropping terminal runs
    would systematically under-sample long dwells.  States whose every
    candidate family fails are downgraded to an exponential fit with the
    ``fallback`` flag set.
    """
    if not candidate_families:
        raise ValueError("candidate_families must be non-empty")
    transitions = fit_semi_markov_transitions(runs_list, alphabet)
    pooled = _pooled_durations(runs_list)
    dwell: dict[str, DwellFit] = {}
    sample_counts: dict[str, int] = {}
    for state in sorted(pooled):
        name = alphabet.name(state)
        dwell[name] = _fit_dwell_with_fallback(name, pooled[state], candidate_families)
        sample_counts[name] = len(pooled[state])
    meta: dict[str, Any] = {"sample_counts": sample_counts}
    if metadata:
        meta.update(metadata)
    return SemiMarkovModel(transitions=transitions, dwell=dwell, metadata=meta)


def fit_semi_markov(
    seqs: list[LabeledSequence],
    alphabet: StateAlphabet,
    candidate_families=FAMILIES,
    metadata: dict[str, Any] | None = None,
) -> SemiMarkovModel:
    """Encode each sequence into runs and fit a pooled semi-Markov model.

    Sequences may use different sampling rates: run-level transitions and
    dwell times in seconds are invariant to the rate, so mixing is safe here
    (unlike fit_dtmc).
    """
    if not seqs:
        raise EmptyInputError("no sequences supplied")
    runs_list = [encode_runs(s) for s in seqs]
    return fit_semi_markov_from_runs(
        runs_list, alphabet, candidate_families=candidate_families, metadata=metadata
    )


# --- multi-chain -------------------------------------------------------------


def fit_multi_chain(
    seqs: list[LabeledSequence],
    n_segments: int,
    alphabet: StateAlphabet,
    candidate_families=FAMILIES,
    metadata: dict[str, Any] | None = None,
) -> MultiChainModel:
    """Split each sequence into equal-time segments and fit one model each.

    Segment k pools the k-th segment of every sequence.  Boundaries are
    recorded at fractions of the mean sequence duration (each sequence is cut
    at fractions of its own length, so unequal durations stay balanced).
    """
    if n_segments < 2:
        raise ValueError("n_segments must be at least 2; fit_semi_markov handles 1")
    if not seqs:
        raise EmptyInputError("no sequences supplied")
    per_segment: list[list[LabeledSequence]] = [[] for _ in range(n_segments)]
    for seq in seqs:
        cuts = [seq.duration_s * j / n_segments for j in range(1, n_segments)]
        try:
            parts = split_at_time(seq, cuts)
        except BoundaryOutOfRangeError as exc:
            raise SegmentTooShortError(
                f"sequence {seq.id!r} ({seq.duration_s:g} s) cannot be cut into "
                f"{n_segments} non-empty segments"
            ) from exc
        for k, part in enumerate(parts):
            per_segment[k].append(part)
    mean_dur = float(np.mean([s.duration_s for s in seqs]))
    boundaries = tuple(mean_dur * j / n_segments for j in range(1, n_segments))
    segment_models = []
    for k, group in enumerate(per_segment):
        meta = dict(metadata or {})
        meta["segment_index"] = k + 1
        segment_models.append(
            fit_semi_markov(
                group, alphabet, candidate_families=candidate_families, metadata=meta
            )
        )
    return MultiChainModel(segments=tuple(segment_models), boundaries=boundaries)
