"""Tabular finite-horizon MDP primitives.

Conventions used throughout the package:

* Steps are indexed ``t = 0 .. T-1`` (arrays of per-step quantities have
  leading dimension ``T``).  Value functions carry one extra terminal slot.
* ``kernels[t]`` is the transition kernel applied *after* step ``t``, i.e. it
  maps ``(s_t, a_t)`` to the distribution of ``s_{t+1}``; there are ``T-1`` of
  them.  The initial state is drawn from ``initial_dist``.
* ``ref_measure`` is a strictly positive reference weight per action.  Policy
  "densities" are probabilities divided by it; with an all-ones reference the
  induced entropy is ordinary Shannon entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DimensionError,
    EmptyDatasetError,
    InvariantError,
)

DEFAULT_ENUMERATION_CAP = 2_000_000

_DIST_ATOL = 1e-12


def _as_float_array(x, field_name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise DimensionError(field_name, shape, arr.shape)
    if not np.all(np.isfinite(arr)):
        raise InvariantError(f"{field_name}: entries must be finite")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_distribution(arr: np.ndarray, field_name: str, axis: int = -1) -> None:
    if np.any(arr < 0.0):
        raise InvariantError(f"{field_name}: negative probability entry")
    sums = arr.sum(axis=axis)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=_DIST_ATOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise InvariantError(
            f"{field_name}: rows must sum to 1 within {_DIST_ATOL} (worst error {worst:.3e})"
        )


@dataclass(frozen=True)
class Mdp:
    """A finite-horizon controlled Markov chain without a reward.

    Attributes
    ----------
    T, S, A:
        Horizon, number of states, number of actions.
    initial_dist:
        Distribution of the first state, shape ``(S,)``.
    kernels:
        Transition kernels, shape ``(T-1, S, A, S)``; ``kernels[t, s, a]`` is
        the distribution of the state at step ``t+1``.
    ref_measure:
        Strictly positive per-action reference weights, shape ``(A,)``.
    """

    T: int
    S: int
    A: int
    initial_dist: np.ndarray
    kernels: np.ndarray
    ref_measure: np.ndarray

    def __post_init__(self) -> None:
        if self.T < 1 or self.S < 1 or self.A < 1:
            raise InvariantError("T, S and A must all be at least 1")
        object.__setattr__(
            self, "initial_dist", _as_float_array(self.initial_dist, "initial_dist", (self.S,))
        )
        object.__setattr__(
            self,
            "kernels",
            _as_float_array(self.kernels, "kernels", (self.T - 1, self.S, self.A, self.S)),
        )
        object.__setattr__(
            self, "ref_measure", _as_float_array(self.ref_measure, "ref_measure", (self.A,))
        )
        _check_distribution(self.initial_dist, "initial_dist")
        if self.T > 1:
            _check_distribution(self.kernels, "kernels")
        if np.any(self.ref_measure <= 0.0):
            raise InvariantError("ref_measure: entries must be strictly positive")

    @property
    def log_ref_measure(self) -> np.ndarray:
        return np.log(self.ref_measure)


@dataclass(frozen=True)
class Policy:
    """A Markovian, time-inhomogeneous policy: ``probs[t, s]`` is a distribution."""

    probs: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3:
            raise DimensionError("probs", "(T, S, A)", probs.shape)
        object.__setattr__(self, "probs", _as_float_array(probs, "probs"))
        _check_distribution(self.probs, "probs")

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    @property
    def S(self) -> int:
        return self.probs.shape[1]

    @property
    def A(self) -> int:
        return self.probs.shape[2]


def uniform_policy(mdp: Mdp, label: str = "uniform") -> Policy:
    probs = np.full((mdp.T, mdp.S, mdp.A), 1.0 / mdp.A)
    return Policy(probs=probs, label=label)


@dataclass(frozen=True)
class Trajectory:
    """A single rollout: ``T`` states and ``T`` actions (no terminal state)."""

    states: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self) -> None:
        states = tuple(int(s) for s in self.states)
        actions = tuple(int(a) for a in self.actions)
        if len(states) != len(actions):
            raise DimensionError("actions", f"length {len(states)}", f"length {len(actions)}")
        if len(states) == 0:
            raise InvariantError("a trajectory must contain at least one step")
        if any(s < 0 for s in states) or any(a < 0 for a in actions):
            raise InvariantError("trajectory indices must be non-negative")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def T(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Dataset:
    """A collection of trajectories plus the seed/label that produced it."""

    trajectories: tuple[Trajectory, ...]
    seed: int
    generator_label: str = ""

    def __post_init__(self) -> None:
        trajectories = tuple(self.trajectories)
        if not trajectories:
            raise EmptyDatasetError("a dataset must contain at least one trajectory")
        horizon = trajectories[0].T
        if any(tau.T != horizon for tau in trajectories):
            raise InvariantError("all trajectories in a dataset must share the same horizon")
        object.__setattr__(self, "trajectories", trajectories)
        object.__setattr__(self, "seed", int(self.seed))

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def T(self) -> int:
        return self.trajectories[0].T

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(states, actions)`` as ``(n, T)`` integer arrays."""
        states = np.array([tau.states for tau in self.trajectories], dtype=np.int64)
        actions = np.array([tau.actions for tau in self.trajectories], dtype=np.int64)
        return states, actions


@dataclass(frozen=True)
class OccupancyMeasures:
    """Exact state-action visitation probabilities ``mu[t, s, a]``."""

    mu: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.ndim != 3:
            raise DimensionError("mu", "(T, S, A)", mu.shape)
        object.__setattr__(self, "mu", _as_float_array(mu, "mu"))
        if np.any(self.mu < 0.0):
            raise InvariantError("mu: negative occupancy entry")
        sums = self.mu.sum(axis=(1, 2))
        if not np.allclose(sums, 1.0, rtol=0.0, atol=1e-10):
            raise InvariantError("mu: per-step occupancies must sum to 1 within 1e-10")

    @property
    def T(self) -> int:
        return self.mu.shape[0]

    def state_marginals(self) -> np.ndarray:
        return self.mu.sum(axis=2)


def _check_compatible(mdp: Mdp, policy: Policy) -> None:
    if policy.probs.shape != (mdp.T, mdp.S, mdp.A):
        raise DimensionError("policy.probs", (mdp.T, mdp.S, mdp.A), policy.probs.shape)


def _check_trajectory(mdp: Mdp, tau: Trajectory) -> None:
    if tau.T != mdp.T:
        raise DimensionError("trajectory", f"horizon {mdp.T}", f"horizon {tau.T}")
    if max(tau.states) >= mdp.S:
        raise InvariantError(f"trajectory state index out of range (S={mdp.S})")
    if max(tau.actions) >= mdp.A:
        raise InvariantError(f"trajectory action index out of range (A={mdp.A})")


def forward_occupancy(mdp: Mdp, policy: Policy) -> OccupancyMeasures:
    """Propagate the initial distribution through ``policy`` exactly."""
    _check_compatible(mdp, policy)
    mu = np.empty((mdp.T, mdp.S, mdp.A))
    marginal = mdp.initial_dist
    for t in range(mdp.T):
        mu[t] = marginal[:, None] * policy.probs[t]
        if t < mdp.T - 1:
            marginal = np.einsum("sa,saz->z", mu[t], mdp.kernels[t])
    return OccupancyMeasures(mu=mu)


def _child_uniforms(seed: int, n: int, draws: int) -> np.ndarray:
    """Uniforms for ``n`` trajectories, one child generator per trajectory.

    Trajectory ``i`` draws its block from
    ``Generator(PCG64(SeedSequence(seed, spawn_key=(i,))))`` so sampling can be
    split across workers at any granularity without changing the result.
    """
    out = np.empty((n, draws))
    for i in range(n):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        out[i] = np.random.Generator(np.random.PCG64(ss)).random(draws)
    return out


def _rows_inverse_cdf(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF sampling: ``rows[i]`` is a distribution, ``u[i]`` a uniform."""
    cum = np.cumsum(rows, axis=1)
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def sample_trajectories(mdp: Mdp, policy: Policy, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. trajectories from ``policy`` in ``mdp``.

    Bit-reproducible: trajectory ``i`` consumes the uniforms of its own child
    generator in the fixed order ``s_0, a_0, s_1, a_1, ...``; results do not
    depend on how the work is batched.
    """
    _check_compatible(mdp, policy)
    if n < 1:
        raise EmptyDatasetError("cannot sample an empty dataset (n must be >= 1)")
    u = _child_uniforms(seed, n, 2 * mdp.T)

    states = np.empty((n, mdp.T), dtype=np.int64)
    actions = np.empty((n, mdp.T), dtype=np.int64)
    init_rows = np.broadcast_to(mdp.initial_dist, (n, mdp.S))
    s = _rows_inverse_cdf(init_rows, u[:, 0])
    for t in range(mdp.T):
        states[:, t] = s
        a = _rows_inverse_cdf(policy.probs[t][s], u[:, 2 * t + 1])
        actions[:, t] = a
        if t < mdp.T - 1:
            s = _rows_inverse_cdf(mdp.kernels[t][s, a], u[:, 2 * t + 2])

    trajectories = tuple(
        Trajectory(states=tuple(states[i]), actions=tuple(actions[i])) for i in range(n)
    )
    return Dataset(trajectories=trajectories, seed=seed, generator_label=policy.label)


def enumerate_support(
    mdp: Mdp, policy: Policy, enumeration_cap: int = DEFAULT_ENUMERATION_CAP
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Enumerate every positive-probability trajectory of ``policy``.

    Returns ``(states, actions, probs)`` with shapes ``(N, T)``, ``(N, T)``,
    ``(N,)``; probabilities are exact products of the model factors and sum to
    one.  Trajectories appear in lexicographic ``(s_0, a_0, s_1, ...)`` order.
    """
    _check_compatible(mdp, policy)
    worst_case = (mdp.S * mdp.A) ** mdp.T
    if worst_case > enumeration_cap:
        raise CapacityError(
            f"(S*A)**T = {worst_case} exceeds enumeration cap {enumeration_cap}"
        )

    keep = mdp.initial_dist > 0.0
    states = np.nonzero(keep)[0][:, None]
    actions = np.empty((states.shape[0], 0), dtype=np.int64)
    probs = mdp.initial_dist[keep]

    for t in range(mdp.T):
        # branch over actions
        rows = policy.probs[t][states[:, -1]]  # (N, A)
        probs = (probs[:, None] * rows).reshape(-1)
        states = np.repeat(states, mdp.A, axis=0)
        actions = np.concatenate(
            [np.repeat(actions, mdp.A, axis=0), np.tile(np.arange(mdp.A), rows.shape[0])[:, None]],
            axis=1,
        )
        keep = probs > 0.0
        states, actions, probs = states[keep], actions[keep], probs[keep]
        if t < mdp.T - 1:
            # branch over successor states
            rows = mdp.kernels[t][states[:, -1], actions[:, -1]]  # (N, S)
            probs = (probs[:, None] * rows).reshape(-1)
            actions = np.repeat(actions, mdp.S, axis=0)
            states = np.concatenate(
                [np.repeat(states, mdp.S, axis=0), np.tile(np.arange(mdp.S), rows.shape[0])[:, None]],
                axis=1,
            )
            keep = probs > 0.0
            states, actions, probs = states[keep], actions[keep], probs[keep]

    return states, actions, probs


def enumerate_trajectories(
    mdp: Mdp, policy: Policy, enumeration_cap: int = DEFAULT_ENUMERATION_CAP
) -> list[tuple[Trajectory, float]]:
    """Complete support enumeration as ``[(Trajectory, probability), ...]``.

    Zero-probability trajectories are omitted.  Raises :class:`CapacityError`
    when the worst case ``(S*A)**T`` exceeds ``enumeration_cap``.
    """
    states, actions, probs = enumerate_support(mdp, policy, enumeration_cap)
    return [
        (Trajectory(states=tuple(states[i]), actions=tuple(actions[i])), float(probs[i]))
        for i in range(states.shape[0])
    ]


def _gather_factors(
    mdp: Mdp, policy: Policy, states: np.ndarray, actions: np.ndarray
) -> np.ndarray:
    """Probability factors of each trajectory, shape ``(N, 2T)``."""
    n, T = states.shape
    factors = np.empty((n, 2 * T))
    factors[:, 0] = mdp.initial_dist[states[:, 0]]
    for t in range(T):
        factors[:, 2 * t + 1] = policy.probs[t][states[:, t], actions[:, t]]
        if t < T - 1:
            factors[:, 2 * t + 2] = mdp.kernels[t][states[:, t], actions[:, t], states[:, t + 1]]
    return factors


def batch_trajectory_probs(
    mdp: Mdp, policy: Policy, states: np.ndarray, actions: np.ndarray
) -> np.ndarray:
    """Exact probability of each ``(states[i], actions[i])`` trajectory."""
    return _gather_factors(mdp, policy, states, actions).prod(axis=1)


def trajectory_log_prob(mdp: Mdp, policy: Policy, tau: Trajectory) -> float:
    """Log-probability of ``tau``; ``-inf`` as soon as any factor vanishes."""
    _check_compatible(mdp, policy)
    _check_trajectory(mdp, tau)
    states = np.asarray(tau.states, dtype=np.int64)[None, :]
    actions = np.asarray(tau.actions, dtype=np.int64)[None, :]
    factors = _gather_factors(mdp, policy, states, actions)[0]
    if np.any(factors == 0.0):
        return float("-inf")
    return float(np.log(factors).sum())


def empirical_feature_expectation(data: Dataset, features) -> np.ndarray:
    """Average per-trajectory feature return ``(1/n) sum_i sum_t phi_t(s, a)``.

    ``features`` may be a feature-map object exposing ``.phi`` or a raw array
    of shape ``(T, S, A, d)``.
    """
    phi = np.asarray(getattr(features, "phi", features), dtype=np.float64)
    if phi.ndim != 4:
        raise DimensionError("features", "(T, S, A, d)", phi.shape)
    if phi.shape[0] != data.T:
        raise DimensionError("features", f"T={data.T}", f"T={phi.shape[0]}")
    states, actions = data.stacked()
    # Group repeated trajectories and average with multiplicity weights: the
    # empirical measure lives on a finite trajectory space, and this keeps the
    # average exact when every draw is the same trajectory.
    trajs, counts = np.unique(np.concatenate([states, actions], axis=1), axis=0, return_counts=True)
    u_states, u_actions = trajs[:, : data.T], trajs[:, data.T :]
    # (k, T, d): gather each visited feature vector, then sum steps in t order
    gathered = phi[np.arange(data.T)[None, :], u_states, u_actions]
    return (counts / len(data)) @ gathered.sum(axis=1)


def feature_expectation(mdp: Mdp, policy: Policy, features) -> np.ndarray:
    """Population feature expectation ``sum_t <phi_t, mu_t>`` under ``policy``."""
    phi = np.asarray(getattr(features, "phi", features), dtype=np.float64)
    mu = forward_occupancy(mdp, policy).mu
    out = np.zeros(phi.shape[-1])
    for t in range(mdp.T):  # accumulate in t order (matches the empirical sum)
        out = out + np.einsum("sa,sad->d", mu[t], phi[t])
    return out
