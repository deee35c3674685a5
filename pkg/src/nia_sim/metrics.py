"""Observables, trajectories, and ensemble statistics.

Conventions: alpha is the amplitude of the mapped |0> state, beta of |1>,
and the reported coherence is Im(alpha * conj(beta)), which is invariant
under a global phase.  The tracked eigenlevel is the one continuously
connected to the initial state; for the sweeps here that is the *higher*
eigenvalue at t=0, so tracking goes by overlap continuity, never by energy
ordering.  The recorded gap column is E1 - E0 in the connected labeling
(tracked level first), i.e. -2*(J0+c)*k(t) for these models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import smallmat


class BlockLeakageError(ValueError):
    """Amplitude leaked out of the {|01>, |10>} block: broken Hamiltonian."""


class GridMismatchError(ValueError):
    """Trajectories do not share a time grid / schedule."""


_METRIC_NAMES = ("pop0", "pop1", "im_coherence", "fidelity_e0", "gap", "noise")


@dataclass(frozen=True)
class Trajectory:
    """Per-time metrics of one evolution run plus its reproducibility metadata."""

    times: np.ndarray
    pop0: np.ndarray
    pop1: np.ndarray
    im_coherence: np.ndarray
    fidelity_e0: np.ndarray
    gap: np.ndarray
    noise: np.ndarray
    meta: dict = field(default_factory=dict)

    def metric(self, name: str) -> np.ndarray:
        if name not in _METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class EnsembleSummary:
    """Pointwise mean and standard error of trajectory metrics over M runs."""

    times: np.ndarray
    m: int
    mean: dict
    se: dict
    meta: dict = field(default_factory=dict)


def basis_metrics(state, mapping: str = "computational"):
    """(pop0, pop1, Im(alpha*conj(beta))) for a normalized state.

    mapping "computational" reads a 2-dimensional state directly;
    "pair-block" reads |01> -> |0>, |10> -> |1> off a 4-dimensional state
    and raises BlockLeakageError if the |00>/|11> amplitudes exceed 1e-8.
    """
    state = np.asarray(state, dtype=complex)
    if mapping == "computational":
        if state.shape != (2,):
            raise ValueError("computational mapping expects a 2-dim state")
        alpha, beta = state
    elif mapping == "pair-block":
        if state.shape != (4,):
            raise ValueError("pair-block mapping expects a 4-dim state")
        if max(abs(state[0]), abs(state[3])) > 1e-8:
            raise BlockLeakageError("amplitude outside the {|01>, |10>} block")
        alpha, beta = state[1], state[2]
    else:
        raise ValueError(f"unknown mapping {mapping!r}")
    return abs(alpha) ** 2, abs(beta) ** 2, float((alpha * beta.conjugate()).imag)


def reduced_qubit_metrics(state4):
    """Driven-qubit (pop0, pop1, Im rho01) by partial trace over the spectator."""
    state4 = np.asarray(state4, dtype=complex)
    if state4.shape != (4,):
        raise ValueError("expected a 4-dim state")
    pop0 = abs(state4[0]) ** 2 + abs(state4[1]) ** 2
    pop1 = abs(state4[2]) ** 2 + abs(state4[3]) ** 2
    rho01 = state4[0] * state4[2].conjugate() + state4[1] * state4[3].conjugate()
    return pop0, pop1, float(rho01.imag)


def reduced_density(state4) -> np.ndarray:
    """2x2 reduced density matrix of the driven qubit."""
    state4 = np.asarray(state4, dtype=complex).reshape(2, 2)
    return state4 @ state4.conj().T


def tracked_eigenvector(h, reference=None) -> np.ndarray:
    """Eigenvector of the tracked level.

    With a reference vector, picks the level of maximal overlap (continuity
    tracking); without one, the highest level, which is where both sweep
    models start.
    """
    es = smallmat.eigh(h)
    if reference is None:
        return es.vectors[:, -1]
    overlaps = np.abs(reference.conj() @ es.vectors)
    return es.vectors[:, int(np.argmax(overlaps))]


def eigenstate_fidelity(state, h, reference=None) -> float:
    """|<E_tracked | state>|^2 for pure states, <E|rho|E> for 2x2 densities."""
    state = np.asarray(state, dtype=complex)
    v = tracked_eigenvector(h, reference)
    if state.ndim == 2:
        return float(np.real(v.conj() @ state @ v))
    return float(abs(np.vdot(v, state)) ** 2)


def aggregate(trajs) -> EnsembleSummary:
    """Pointwise ensemble mean and standard error over identical grids."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("empty ensemble")
    t0 = trajs[0]
    for tr in trajs[1:]:
        if tr.times.shape != t0.times.shape or not np.array_equal(tr.times, t0.times):
            raise GridMismatchError("trajectories recorded on different time grids")
        if tr.meta.get("schedule") != t0.meta.get("schedule"):
            raise GridMismatchError("trajectories come from different schedules")
    m = len(trajs)
    mean = {}
    se = {}
    for name in _METRIC_NAMES:
        stack = np.stack([tr.metric(name) for tr in trajs])
        mean[name] = stack.mean(axis=0)
        se[name] = stack.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(stack.shape[1])
    meta = dict(t0.meta)
    meta["realizations"] = m
    meta["seeds"] = [tr.meta.get("realization_index") for tr in trajs]
    return EnsembleSummary(times=t0.times.copy(), m=m, mean=mean, se=se, meta=meta)


def spectator_error(base: Trajectory, embedded: Trajectory, eps_floor: float = 1e-3) -> float:
    """Max relative deviation of the driven-qubit pop0 caused by the spectator.

    The denominator is floored at eps_floor to keep the ratio finite where
    pop0 approaches zero.
    """
    if base.times.shape != embedded.times.shape or not np.array_equal(base.times, embedded.times):
        raise GridMismatchError("trajectories recorded on different time grids")
    denom = np.maximum(base.pop0, eps_floor)
    return float(np.max(np.abs(base.pop0 - embedded.pop0) / denom))
