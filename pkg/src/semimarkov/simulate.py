"""Seeded generation of synthetic state sequences from fitted models.

The generator alternates dwell draws and categorical next-state draws,
quantizing each dwell onto the output sampling grid (round half-up, one
sample minimum) so the result is a valid RunSequence.  All randomness comes
from one numpy Generator seeded from the config, so identical inputs give
bit-identical output; cohorts derive per-patient seeds as base_seed + i.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .dwell import sample_dwell
from .errors import (
    InvalidInitialStateError,
    UnreachableAbsentRowError,
)
from .fitting import MultiChainModel, SemiMarkovModel
from .sequences import RunSequence, StateAlphabet


@dataclass(frozen=True)
class SimulationConfig:
    """Inputs for one simulated recording.

    ``initial_state`` None draws the first state uniformly from the states
    with fitted transition rows (the initial-state distribution is not part
    of the model); a state name pins it.
    """

    duration_s: float
    seed: int
    output_sampling_rate_hz: float = 1.0
    initial_state: str | None = None

    def __post_init__(self) -> None:
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if not self.output_sampling_rate_hz > 0:
            raise ValueError("output_sampling_rate_hz must be positive")


def _round_half_up_samples(seconds: float, rate_hz: float) -> int:
    return int(math.floor(seconds * rate_hz + 0.5))


def _startable_states(model: SemiMarkovModel) -> list[int]:
    fitted = np.flatnonzero(model.transitions.row_fitted)
    names = model.alphabet.states
    return [int(i) for i in fitted if names[i] in model.dwell]


def _check_reachability(
    segments: tuple[SemiMarkovModel, ...], start_states: list[int]
) -> None:
    """Verify no reachable state lacks a transition row or dwell fit.

    Edges are the union of positive-probability transitions over all
    segments (a conservative over-approximation for multi-chain models: a
    state counted reachable here may be unreachable in the segment where it
    is absent, but accepting only union-safe models keeps simulation total).
    """
    alphabet = segments[0].alphabet
    n = len(alphabet)
    adjacency = np.zeros((n, n), dtype=bool)
    usable = np.ones(n, dtype=bool)
    for seg in segments:
        adjacency |= seg.transitions.probs > 0.0
        usable &= seg.transitions.row_fitted
        for i, name in enumerate(alphabet.states):
            if name not in seg.dwell:
                usable[i] = False
    seen = set(start_states)
    queue = deque(start_states)
    while queue:
        s = queue.popleft()
        if not usable[s]:
            raise UnreachableAbsentRowError(
                f"state {alphabet.name(s)!r} is reachable but has no fitted "
                f"transition row or dwell distribution in some segment"
            )
        for t in np.flatnonzero(adjacency[s]).tolist():
            if t not in seen:
                seen.add(t)
                queue.append(t)


def _draw_categorical(row: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(row)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(row) - 1)


def _resolve_initial(
    first_model: SemiMarkovModel,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> int:
    alphabet = first_model.alphabet
    if config.initial_state is not None:
        try:
            idx = alphabet.index(config.initial_state)
        except KeyError:
            raise InvalidInitialStateError(
                f"initial state {config.initial_state!r} not in alphabet"
            ) from None
        if not first_model.transitions.row_fitted[idx]:
            raise InvalidInitialStateError(
                f"initial state {config.initial_state!r} has no fitted transition row"
            )
        if config.initial_state not in first_model.dwell:
            raise InvalidInitialStateError(
                f"initial state {config.initial_state!r} has no dwell distribution"
            )
        return idx
    candidates = _startable_states(first_model)
    if not candidates:
        raise InvalidInitialStateError("model has no startable states")
    return candidates[int(rng.integers(len(candidates)))]


def _simulate_runs(
    segments: tuple[SemiMarkovModel, ...],
    boundaries: tuple[float, ...],
    config: SimulationConfig,
) -> tuple[list[int], list[int]]:
    rate = config.output_sampling_rate_hz
    n_total = _round_half_up_samples(config.duration_s, rate)
    if n_total < 1:
        raise ValueError("duration_s is shorter than half a sample period")
    rng = np.random.default_rng(config.seed)
    state = _resolve_initial(segments[0], config, rng)
    bounds = np.asarray(boundaries, dtype=float)

    def model_at(t_s: float) -> SemiMarkovModel:
        return segments[int(np.searchsorted(bounds, t_s, side="right"))]

    if config.initial_state is None:
        # validity must not depend on which start the seed happened to pick
        _check_reachability(segments, _startable_states(segments[0]))
    else:
        _check_reachability(segments, [state])
    states: list[int] = []
    durations: list[int] = []
    elapsed = 0  # samples emitted so far
    min_dwell = 1.0 / rate
    while elapsed < n_total:
        now = elapsed / rate
        model = model_at(now)
        name = model.alphabet.name(state)
        dwell_s = sample_dwell(model.dwell[name], rng, min_seconds=min_dwell)
        n = max(1, _round_half_up_samples(dwell_s, rate))
        n = min(n, n_total - elapsed)  # truncate the final run
        states.append(state)
        durations.append(n)
        elapsed += n
        if elapsed >= n_total:
            break
        now = elapsed / rate
        model = model_at(now)
        row = model.transitions.probs[state]
        state = _draw_categorical(row, rng)
    return states, durations


def simulate_sequence(
    model: SemiMarkovModel, config: SimulationConfig, sequence_id: str = ""
) -> RunSequence:
    """Simulate one recording from a single semi-Markov model.

    Alternates dwell draws and next-state draws until the configured
    duration is reached; the final run is truncated to fit.  Deterministic
    for a fixed config.
    """
    states, durations = _simulate_runs((model,), (), config)
    return RunSequence(
        states=np.array(states, dtype=np.int64),
        durations=np.array(durations, dtype=np.int64),
        sampling_rate_hz=config.output_sampling_rate_hz,
        id=sequence_id,
    )


def simulate_cohort(
    model: SemiMarkovModel,
    n_patients: int,
    config: SimulationConfig,
    id_prefix: str = "sim",
) -> list[RunSequence]:
    """Simulate n_patients independent recordings.

    Patient i uses seed config.seed + i, so the cohort is reproducible and
    any subset of patients can be regenerated independently.
    """
    if n_patients < 1:
        raise ValueError("n_patients must be at least 1")
    out = []
    for i in range(n_patients):
        cfg = replace(config, seed=config.seed + i)
        out.append(simulate_sequence(model, cfg, sequence_id=f"{id_prefix}{i:03d}"))
    return out


def simulate_multi_chain(
    mc: MultiChainModel, config: SimulationConfig, sequence_id: str = ""
) -> RunSequence:
    """Simulate one recording from a multi-chain model.

    Every stochastic choice made at time t (dwell draw at a run's start,
    next-state draw at a transition) consults the model owning t.  A run in
    progress at a boundary persists; with identical segment models the output
    is identical to simulate_sequence under the same config.
    """
    states, durations = _simulate_runs(mc.segments, mc.boundaries, config)
    return RunSequence(
        states=np.array(states, dtype=np.int64),
        durations=np.array(durations, dtype=np.int64),
        sampling_rate_hz=config.output_sampling_rate_hz,
        id=sequence_id,
    )


def simulate_multi_chain_cohort(
    mc: MultiChainModel,
    n_patients: int,
    config: SimulationConfig,
    id_prefix: str = "sim",
) -> list[RunSequence]:
    """Cohort variant of simulate_multi_chain (seed discipline as simulate_cohort)."""
    if n_patients < 1:
        raise ValueError("n_patients must be at least 1")
    out = []
    for i in range(n_patients):
        cfg = replace(config, seed=config.seed + i)
        out.append(simulate_multi_chain(mc, cfg, sequence_id=f"{id_prefix}{i:03d}"))
    return out
