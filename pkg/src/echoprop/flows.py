"""Reservoir flow in forward and pullback form, echo-state estimates and image diameters.

Conventions: ``forward_flow(x, w, n)`` feeds the inputs at times ``1..n``;
``pullback_flow(x, w, n)`` starts at time ``-n`` and feeds ``-n+1..0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .config import TestConfig
from .sequences import HorizonError, InputWindow, shift_window
from .systems import InputProcess, SystemSpec, generate_window, seeded_rng

EXACT_DIAMETER_LIMIT = 512
_RANDOM_PAIRS = 65536


@dataclass(frozen=True)
class EchoStateEstimate:
    state: np.ndarray
    residual: float
    n_used: int
    converged: bool


@dataclass(frozen=True)
class TrajectoryPair:
    n_values: np.ndarray
    d_values: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Diameter:
    value: float
    i: int
    j: int
    exact: bool = True


@dataclass(frozen=True)
class ReachableSample:
    """Approximate reachable states with what is needed to replay each one."""

    states: np.ndarray
    seeds: np.ndarray
    inputs: np.ndarray  # (count, burn_in, m); row -1 is time 0
    burn_in: int

    def replay(self, k: int, spec: SystemSpec) -> np.ndarray:
        w = InputWindow(self.inputs[k], np.empty((0, self.inputs.shape[2])))
        return pullback_flow(spec, self.seeds[k], w, self.burn_in)


# -- batch primitives ----------------------------------------------------------

def as_states(spec: SystemSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim <= 1:
        X = X.reshape(-1, spec.state_dim)
    if X.shape[1] != spec.state_dim:
        raise ValueError(f"states must have dimension {spec.state_dim}, got {X.shape[1]}")
    return np.ascontiguousarray(X)


def run_batch(spec: SystemSpec, X0: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Final states: row ``b`` starts at ``X0[b]`` and is fed ``U[b, 0], U[b, 1], ...``."""
    X0 = as_states(spec, X0)
    U = np.ascontiguousarray(U, dtype=np.float64)
    args = spec.kernel_args()
    if args is not None:
        return kernels.iterate(*args, X0, U)
    X = X0.copy()
    for r in range(U.shape[1]):
        X = np.asarray(spec.state_map(X, U[:, r, :]), dtype=np.float64)
    return X


def run_trajectory(spec: SystemSpec, X0: np.ndarray, U: np.ndarray) -> np.ndarray:
    """All states, shape (B, n + 1, d)."""
    X0 = as_states(spec, X0)
    U = np.ascontiguousarray(U, dtype=np.float64)
    args = spec.kernel_args()
    if args is not None:
        return kernels.trajectory(*args, X0, U)
    out = np.empty((X0.shape[0], U.shape[1] + 1, spec.state_dim))
    out[:, 0] = X0
    for r in range(U.shape[1]):
        out[:, r + 1] = spec.state_map(out[:, r], U[:, r, :])
    return out


def shared_trajectory(spec: SystemSpec, X0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Trajectories of every state in ``X0`` under one input block (n, m); (M, n + 1, d)."""
    X0 = as_states(spec, X0)
    inputs = np.asarray(inputs, dtype=np.float64)
    U = np.broadcast_to(inputs, (X0.shape[0],) + inputs.shape)
    return run_trajectory(spec, X0, U)


def pullback_images(spec: SystemSpec, X0, w: InputWindow, depths: Sequence[int]) -> np.ndarray:
    """``psi_n(x, T^n u)`` for every ``n`` in ``depths`` and ``x`` in ``X0``; shape (S, M, d)."""
    X0 = as_states(spec, X0)
    depths = np.asarray(list(depths), dtype=np.int64)
    if len(depths) == 0:
        return np.empty((0,) + X0.shape)
    n_max = int(depths.max())
    if n_max > w.past_horizon:
        raise HorizonError(f"pullback depth {n_max} exceeds past horizon {w.past_horizon}")
    if depths.min() < 0:
        raise ValueError("depths must be nonnegative")
    U = w.block(-n_max + 1, 0)
    if spec.input_independent:
        traj = shared_trajectory(spec, X0, U)
        return np.ascontiguousarray(np.transpose(traj[:, depths], (1, 0, 2)))
    args = spec.kernel_args()
    if args is not None:
        return kernels.staggered(*args, X0, np.ascontiguousarray(U), depths)
    out = np.empty((len(depths),) + X0.shape)
    for s, n in enumerate(depths):
        out[s] = run_batch(spec, X0, np.broadcast_to(U[n_max - n:], (X0.shape[0], n, U.shape[1])))
    return out


def set_diameter(spec: SystemSpec, X, rng: Optional[np.random.Generator] = None) -> Diameter:
    """Max pairwise distance; exact for scalar states or up to 512 points, sampled pairs above."""
    X = as_states(spec, X)
    M = X.shape[0]
    if spec.state_dim == 1 or M <= EXACT_DIAMETER_LIMIT:
        value, i, j = kernels.diameter(spec.metric_code, X)
        return Diameter(float(value), int(i), int(j), True)
    rng = rng or np.random.default_rng(0)
    I = rng.integers(0, M, _RANDOM_PAIRS)
    J = rng.integers(0, M, _RANDOM_PAIRS)
    d = spec.distance(X[I], X[J])
    k = int(np.argmax(d))
    return Diameter(float(d[k]), int(I[k]), int(J[k]), False)


# -- spec operations -------------------------------------------------------------

def forward_flow(spec: SystemSpec, x, w: InputWindow, n: int) -> np.ndarray:
    """``psi_n(x, u)``: feed the inputs at times ``1..n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if w.future_horizon < n:
        raise HorizonError(f"forward flow needs future horizon {n}, window has {w.future_horizon}")
    U = w.block(1, n)[None]
    return run_batch(spec, as_states(spec, x)[:1], U)[0]


def pullback_flow(spec: SystemSpec, x, w: InputWindow, n: int) -> np.ndarray:
    """``psi_n(x, T^n u)``: start at time ``-n`` and feed ``-n+1..0``."""
    if n < 1:
        raise ValueError("n must be positive")
    if w.past_horizon < n:
        raise HorizonError(f"pullback flow needs past horizon {n}, window has {w.past_horizon}")
    U = w.block(-n + 1, 0)[None]
    return run_batch(spec, as_states(spec, x)[:1], U)[0]


def extended_step(spec: SystemSpec, x_traj, w: InputWindow):
    """One step of the autonomous extension: append ``f(x_0, u_1)`` and advance the inputs."""
    if w.future_horizon < 1:
        raise HorizonError("extended step needs an input at time 1")
    x_traj = as_states(spec, x_traj)
    nxt = run_batch(spec, x_traj[-1:], w.block(1, 1)[None])
    return np.concatenate([x_traj, nxt]), shift_window(w, 1)


def _state_pool(spec: SystemSpec, cfg: TestConfig, stream: str = "states") -> np.ndarray:
    rng = seeded_rng(cfg.seed, stream)
    X = spec.sample_states(rng, cfg.state_samples)
    if len(spec.hard_states):
        X = np.concatenate([X, spec.hard_states.reshape(-1, spec.state_dim)])
    return as_states(spec, X)


def state_pool(spec: SystemSpec, cfg: TestConfig) -> np.ndarray:
    """``cfg.state_samples`` sampled states followed by the system's hard states."""
    return _state_pool(spec, cfg)


def estimate_echo_state(
    spec: SystemSpec,
    w: InputWindow,
    cfg: Optional[TestConfig] = None,
    depth: Optional[int] = None,
    samples=None,
) -> EchoStateEstimate:
    """Pullback limit from many starting states; the first state's image is the representative."""
    cfg = cfg or TestConfig()
    depth = cfg.n_max if depth is None else int(depth)
    if w.past_horizon < depth:
        raise HorizonError(f"echo-state estimate needs past horizon {depth}, window has {w.past_horizon}")
    X0 = state_pool(spec, cfg) if samples is None else as_states(spec, samples)
    images = pullback_images(spec, X0, w, [depth])[0]
    residual = set_diameter(spec, images).value
    return EchoStateEstimate(images[0].copy(), residual, depth, residual < cfg.tol)


def echo_states(spec: SystemSpec, pasts: np.ndarray, x0) -> np.ndarray:
    """Representative echo states for a batch of past blocks (K, D, m), all started at ``x0``."""
    pasts = np.ascontiguousarray(pasts, dtype=np.float64)
    X0 = np.repeat(as_states(spec, x0)[:1], pasts.shape[0], axis=0)
    return run_batch(spec, X0, pasts)


def sample_reachable(
    spec: SystemSpec,
    proc: InputProcess,
    burn_in: int,
    count: int,
    seed: int = 0,
    include_hard: bool = True,
) -> ReachableSample:
    """Time-0 states of ``burn_in``-step pullbacks from sampled seeds (plus hard states)."""
    if burn_in < 1:
        raise ValueError("burn_in must be at least 1")
    rng = seeded_rng(seed, "reachable")
    seeds = spec.sample_states(rng, count)
    if include_hard and len(spec.hard_states):
        seeds = np.concatenate([seeds, spec.hard_states.reshape(-1, spec.state_dim)])
    seeds = as_states(spec, seeds)
    inputs = np.stack([
        generate_window(proc, burn_in, 0, index=1_000_000 + k).past for k in range(len(seeds))
    ]) if len(seeds) else np.empty((0, burn_in, spec.input_dim))
    states = run_batch(spec, seeds, inputs)
    return ReachableSample(states, seeds, inputs, burn_in)


def pullback_image_diameter(spec: SystemSpec, w: InputWindow, n: int, samples) -> float:
    """Diameter of ``{psi_n(x, T^n u) : x in samples}``; ``n = 0`` gives the sample diameter."""
    X0 = as_states(spec, samples)
    if n == 0:
        return set_diameter(spec, X0).value
    return set_diameter(spec, pullback_images(spec, X0, w, [n])[0]).value


def divergence_curve(
    spec: SystemSpec, x, x2, w: InputWindow, n_max: int, pullback: bool = False
) -> TrajectoryPair:
    """``d_n = d(psi_n(x, .), psi_n(x2, .))`` for ``n = 0..n_max``, forward or pullback."""
    X0 = np.concatenate([as_states(spec, x)[:1], as_states(spec, x2)[:1]])
    if pullback:
        images = pullback_images(spec, X0, w, range(0, n_max + 1))
        d = spec.distance(images[:, 0], images[:, 1])
    else:
        if w.future_horizon < n_max:
            raise HorizonError(f"need future horizon {n_max}")
        traj = shared_trajectory(spec, X0, w.block(1, n_max))
        d = spec.distance(traj[0], traj[1])
    meta = {"system": spec.name, "x": X0[0].tolist(), "x2": X0[1].tolist(),
            "flow": "pullback" if pullback else "forward"}
    return TrajectoryPair(np.arange(n_max + 1), d, meta)


def diameter_curve(spec: SystemSpec, w: InputWindow, n_max: int, samples) -> np.ndarray:
    """Pullback image diameters for ``n = 0..n_max``."""
    X0 = as_states(spec, samples)
    images = pullback_images(spec, X0, w, range(0, n_max + 1))
    return np.array([set_diameter(spec, images[s]).value for s in range(n_max + 1)])
