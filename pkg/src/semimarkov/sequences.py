"""Labeled state sequences, run-length encoding, segmentation, and resampling.

Sequences store labels as alphabet indices at a uniform sampling rate.  Run
durations are kept in integer samples throughout; conversion to seconds
happens only at analysis boundaries (``durations_by_state``), so re-encoding
and upsampling are exact.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryOutOfRangeError,
    DuplicateStateError,
    TooFewStatesError,
)

# Tolerance for deciding whether a boundary time lands exactly on a sample.
_SAMPLE_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class StateAlphabet:
    """Ordered, duplicate-free set of state names.

    The order is fixed at construction and defines row/column indices of
    every transition matrix built over this alphabet.
    """

    states: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.states) < 2:
            raise TooFewStatesError(
                f"alphabet needs at least 2 states, got {len(self.states)}"
            )
        if len(set(self.states)) != len(self.states):
            raise DuplicateStateError(f"duplicate state names in {self.states}")

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, name: str) -> bool:
        return name in self.states

    def index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError:
            raise KeyError(f"state {name!r} not in alphabet {self.states}") from None

    def name(self, index: int) -> str:
        return self.states[index]


def build_alphabet(names: Sequence[str]) -> StateAlphabet:
    """Build a StateAlphabet from an ordered list of unique names."""
    return StateAlphabet(tuple(names))


def _as_readonly_int_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    """Uniformly sampled per-sample state labels.

    labels are alphabet indices, one per sample; validity against a concrete
    alphabet is checked by the operations that take one.
    """

    labels: np.ndarray
    sampling_rate_hz: float
    id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", _as_readonly_int_array(self.labels, "labels"))
        if len(self.labels) < 1:
            raise ValueError("sequence must contain at least one sample")
        if np.any(self.labels < 0):
            raise ValueError("labels must be non-negative alphabet indices")
        if not (self.sampling_rate_hz > 0):
            raise ValueError("sampling_rate_hz must be positive")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def duration_s(self) -> float:
        return len(self.labels) / self.sampling_rate_hz


@dataclass(frozen=True, eq=False)
class RunSequence:
    """Run-length encoding: maximal runs of (state index, duration in samples)."""

    states: np.ndarray
    durations: np.ndarray
    sampling_rate_hz: float
    id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", _as_readonly_int_array(self.states, "states"))
        object.__setattr__(
            self, "durations", _as_readonly_int_array(self.durations, "durations")
        )
        if len(self.states) != len(self.durations):
            raise ValueError("states and durations must have equal length")
        if len(self.states) < 1:
            raise ValueError("run sequence must contain at least one run")
        if np.any(self.states < 0):
            raise ValueError("states must be non-negative alphabet indices")
        if np.any(self.durations < 1):
            raise ValueError("run durations must be at least one sample")
        if np.any(self.states[1:] == self.states[:-1]):
            raise ValueError("adjacent runs must have different states")
        if not (self.sampling_rate_hz > 0):
            raise ValueError("sampling_rate_hz must be positive")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def runs(self) -> list[tuple[int, int]]:
        """Runs as (state index, duration in samples) pairs."""
        return list(zip(self.states.tolist(), self.durations.tolist()))

    @property
    def total_samples(self) -> int:
        return int(self.durations.sum())


def sequences_equal(a: LabeledSequence, b: LabeledSequence) -> bool:
    return (
        np.array_equal(a.labels, b.labels)
        and a.sampling_rate_hz == b.sampling_rate_hz
        and a.id == b.id
    )


def encode_runs(seq: LabeledSequence) -> RunSequence:
    """Collapse a labeled sequence into maximal (state, duration) runs."""
    labels = seq.labels
    change = np.flatnonzero(labels[1:] != labels[:-1])
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [len(labels)]))
    return RunSequence(
        states=labels[starts],
        durations=ends - starts,
        sampling_rate_hz=seq.sampling_rate_hz,
        id=seq.id,
    )


def decode_runs(runs: RunSequence) -> LabeledSequence:
    """Expand runs back into per-sample labels (exact inverse of encode_runs)."""
    return LabeledSequence(
        labels=np.repeat(runs.states, runs.durations),
        sampling_rate_hz=runs.sampling_rate_hz,
        id=runs.id,
    )


def _boundary_to_index(t_s: float, rate_hz: float) -> int:
    """Sample index of the first sample at or after time t (half-open split)."""
    x = t_s * rate_hz
    nearest = round(x)
    if abs(x - nearest) < _SAMPLE_SNAP_TOL:
        return int(nearest)
    return int(math.ceil(x))


def split_at_time(
    seq: LabeledSequence, boundaries: Sequence[float]
) -> list[LabeledSequence]:
    """Partition a sequence at the given times (seconds).

    A sample starting at time t belongs to the segment whose half-open
    window [start, end) contains t, so a run spanning a boundary is cut and
    the boundary sample goes to the later segment.  Concatenating the
    segments reproduces the input exactly.
    """
    duration = seq.duration_s
    bounds = list(boundaries)
    if any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise BoundaryOutOfRangeError(f"boundaries must be strictly increasing: {bounds}")
    for b in bounds:
        if not (0.0 < b < duration):
            raise BoundaryOutOfRangeError(
                f"boundary {b} s outside (0, {duration}) s"
            )
    indices = [_boundary_to_index(b, seq.sampling_rate_hz) for b in bounds]
    edges = [0] + indices + [len(seq.labels)]
    if any(e1 >= e2 for e1, e2 in zip(edges, edges[1:])):
        raise BoundaryOutOfRangeError(
            f"boundaries {bounds} produce an empty segment at rate "
            f"{seq.sampling_rate_hz} Hz"
        )
    return [
        LabeledSequence(
            labels=seq.labels[e1:e2],
            sampling_rate_hz=seq.sampling_rate_hz,
            id=seq.id,
        )
        for e1, e2 in zip(edges, edges[1:])
    ]


def upsample(seq: LabeledSequence, factor: int) -> LabeledSequence:
    """Repeat each sample `factor` times and scale the rate to match.

    Run durations in seconds are unchanged; run durations in samples are
    multiplied by `factor`.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return seq
    return LabeledSequence(
        labels=np.repeat(seq.labels, factor),
        sampling_rate_hz=seq.sampling_rate_hz * factor,
        id=seq.id,
    )


def durations_by_state(runs: RunSequence) -> dict[int, list[float]]:
    """Per-state run durations in seconds, in temporal order.

    States never observed are absent from the map.
    """
    out: dict[int, list[float]] = {}
    rate = runs.sampling_rate_hz
    for state, dur in zip(runs.states.tolist(), runs.durations.tolist()):
        out.setdefault(state, []).append(dur / rate)
    return out
