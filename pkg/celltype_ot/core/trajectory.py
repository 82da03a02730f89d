"""
Transition matrices and cell-type trajectories derived from transport plans.

A forward matrix conditions a plan on its source type, a backward matrix on
its target type. Categories are 1-based in every public argument (path
states, anchor state, flagged columns); arrays are indexed from zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Sequence

import numpy as np

from celltype_ot.config import settings
from celltype_ot.core.distributions import Marginal
from celltype_ot.core.uot_solver import TransportPlan
from celltype_ot.errors import CompositionError, InputError


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """h[k, j] = P(X_target = k | X_source = j); columns are conditional distributions."""

    entries: np.ndarray
    direction: Direction
    source_time: int
    target_time: int
    zero_columns: tuple[int, ...] = ()

    def __post_init__(self):
        h = np.array(self.entries, dtype=float, copy=True)
        sign = 1 if self.direction is Direction.FORWARD else -1
        if (self.target_time - self.source_time) * sign < 1:
            raise CompositionError(
                f"{self.direction.value} transition cannot run from t={self.source_time} to t={self.target_time}"
            )
        if h.ndim != 2 or h.shape[0] != h.shape[1] or np.any(h < 0):
            raise InputError("transition matrix must be square and nonnegative")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def d(self) -> int:
        return int(self.entries.shape[0])

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return self.entries @ q


@dataclass(frozen=True)
class TrajectoryPath:
    """States X_0..X_T (1-based types) anchored at a known state at `anchor_time`."""

    states: tuple[int, ...]
    anchor_time: int
    anchor_state: int

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        if not 0 <= self.anchor_time < len(self.states):
            raise InputError(f"anchor time {self.anchor_time} outside path of length {len(self.states)}")
        if self.states[self.anchor_time] != self.anchor_state:
            raise InputError(
                f"path state {self.states[self.anchor_time]} at anchor time {self.anchor_time} "
                f"does not match anchor state {self.anchor_state}"
            )
        if min(self.states) < 1:
            raise InputError("path states are 1-based category indices")

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


def _conditional(joint: np.ndarray, mass: np.ndarray, direction: Direction,
                 source_time: int, target_time: int) -> TransitionMatrix:
    """Columns joint[:, j] / mass[j]; columns whose mass is below the zero tolerance stay zero."""
    live = mass > settings.ZERO_MASS_TOL
    h = np.zeros_like(joint)
    h[:, live] = joint[:, live] / mass[live]
    flagged = tuple(int(j) + 1 for j in np.flatnonzero(~live))
    return TransitionMatrix(h, direction, source_time, target_time, flagged)


def forward_transition(plan: TransportPlan) -> TransitionMatrix:
    """H^{t+1|t}: h[k, j] = pi[j, k] / (pi 1)_j."""
    t = plan.time_index
    return _conditional(plan.entries.T, plan.row_marginal, Direction.FORWARD, t, t + 1)


def backward_transition(plan: TransportPlan) -> TransitionMatrix:
    """H^{t|t+1}: h[k, j] = pi[k, j] / q_{t+1, j}."""
    t = plan.time_index
    return _conditional(plan.entries, np.asarray(plan.target_marginal.probs), Direction.BACKWARD, t + 1, t)


def _ordered_chain(transitions: Sequence[TransitionMatrix], direction: Direction, tau: int) -> list[TransitionMatrix]:
    chain = sorted(transitions, key=lambda h: h.source_time, reverse=direction is Direction.BACKWARD)
    expected = tau
    for h in chain:
        if h.direction is not direction:
            raise CompositionError(f"expected {direction.value} transitions, got a {h.direction.value} one")
        if h.source_time != expected:
            raise CompositionError(
                f"transition chain is not contiguous: expected a step from t={expected}, "
                f"found {h.source_time} -> {h.target_time}"
            )
        expected = h.target_time
    return chain


def _propagate(transitions, q_tau: Marginal, direction: Direction, tau: int) -> Marginal:
    chain = _ordered_chain(transitions, direction, tau)
    for h in chain:
        if h.d != q_tau.d:
            raise CompositionError(f"transition of size {h.d} cannot act on a marginal of size {q_tau.d}")
    q = reduce(lambda acc, h: h(acc), chain, np.asarray(q_tau.probs))
    return Marginal.from_vector(q, tol=1e-10)


def ancestor_distribution(transitions: Sequence[TransitionMatrix], q_tau: Marginal,
                          tau: int | None = None) -> Marginal:
    """Q_{s<-tau} = H^{s|s+1} ... H^{tau-1|tau} Q_tau."""
    if not transitions:
        return q_tau
    tau = max(h.source_time for h in transitions) if tau is None else tau
    return _propagate(transitions, q_tau, Direction.BACKWARD, tau)


def descendant_distribution(transitions: Sequence[TransitionMatrix], q_tau: Marginal,
                            tau: int | None = None) -> Marginal:
    """Q_{tau->t} = H^{t|t-1} ... H^{tau+1|tau} Q_tau."""
    if not transitions:
        return q_tau
    tau = min(h.source_time for h in transitions) if tau is None else tau
    return _propagate(transitions, q_tau, Direction.FORWARD, tau)


def compose_transitions(transitions: Sequence[TransitionMatrix]) -> TransitionMatrix:
    """Single multi-step conditional matrix for a contiguous chain of one direction."""
    if not transitions:
        raise CompositionError("cannot compose an empty chain")
    direction = transitions[0].direction
    start = (min if direction is Direction.FORWARD else max)(h.source_time for h in transitions)
    chain = _ordered_chain(transitions, direction, start)
    product = reduce(lambda acc, h: h.entries @ acc, chain[1:], chain[0].entries)
    flagged = tuple(int(j) + 1 for j in np.flatnonzero(product.sum(axis=0) <= settings.ZERO_MASS_TOL))
    return TransitionMatrix(product, direction, start, chain[-1].target_time, flagged)


def _index(transitions: Sequence[TransitionMatrix], direction: Direction) -> dict[int, TransitionMatrix]:
    table = {}
    for h in transitions:
        if h.direction is not direction:
            raise CompositionError(f"expected {direction.value} transitions, got a {h.direction.value} one")
        table[h.source_time] = h
    return table


def path_probability(path: TrajectoryPath, backward: Sequence[TransitionMatrix],
                     forward: Sequence[TransitionMatrix]) -> float:
    """Probability of `path` given its anchor: backward factors down to t=0 times forward factors up to T.

    The backward step t+1 -> t contributes h^{t|t+1}[X_t, X_{t+1}], the forward
    step t -> t+1 contributes h^{t+1|t}[X_{t+1}, X_t].
    """
    back = _index(backward, Direction.BACKWARD)
    fwd = _index(forward, Direction.FORWARD)
    states = [s - 1 for s in path.states]
    prob = 1.0
    for t in range(path.anchor_time - 1, -1, -1):
        h = back.get(t + 1)
        if h is None or h.target_time != t:
            raise CompositionError(f"missing backward transition {t + 1} -> {t}")
        prob *= float(h.entries[states[t], states[t + 1]])
    for t in range(path.anchor_time, path.horizon):
        h = fwd.get(t)
        if h is None or h.target_time != t + 1:
            raise CompositionError(f"missing forward transition {t} -> {t + 1}")
        prob *= float(h.entries[states[t + 1], states[t]])
    return prob
