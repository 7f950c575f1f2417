"""Fixed-step integrators and seeded Wiener increment streams.

Deterministic trajectories use classical RK4 (or forward Euler on request);
stochastic ones use Euler-Maruyama::

    X[k+1] = X[k] + f(X[k], u(t_k)) dt + sigma(X[k], u(t_k)) Z[k] sqrt(dt)

Both integrators accept a batch of initial states of shape ``(B, n)`` and
then return states of shape ``(node_count, B, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IntegrationError",
    "TimeGrid",
    "WienerPath",
    "StateTrajectory",
    "OutputTrajectory",
    "derive_stream",
    "wiener_path",
    "stack_paths",
    "integrate_ode",
    "integrate_sde",
    "output_of",
]


class IntegrationError(RuntimeError):
    """A trajectory produced non-finite values.

    ``node`` is the first grid node with a non-finite state and ``rows``
    lists the offending batch rows (empty for unbatched integrations).
    """

    def __init__(self, message, node=None, rows=()):
        super().__init__(message)
        self.node = node
        self.rows = tuple(rows)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0, dt, ..., t1``; ``t1`` must be a multiple of ``dt``."""

    t1: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and self.t1 > 0 and math.isfinite(self.t1) and math.isfinite(self.dt)):
            raise ValueError(f"need t1 > 0 and dt > 0, got t1={self.t1}, dt={self.dt}")
        ratio = self.t1 / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"t1={self.t1} is not a multiple of dt={self.dt}")

    @property
    def steps(self):
        return int(round(self.t1 / self.dt))

    @property
    def node_count(self):
        return self.steps + 1

    @property
    def times(self):
        return np.arange(self.node_count) * self.dt

    def trapezoid_weights(self):
        w = np.full(self.node_count, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def derive_stream(base_seed, *indices):
    """Child seed for stream ``indices`` of ``base_seed``.

    Uses ``numpy.random.SeedSequence`` spawn keys, so distinct index tuples
    give independent streams and the mapping is stable across runs.
    Indices can be nested, e.g. ``derive_stream(seed, cell, sample)``.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class WienerPath:
    """Standard-normal increments ``Z`` with shape ``(steps, q_w)``."""

    draws: np.ndarray
    seed: int
    base_seed: int | None = None
    stream_index: tuple = ()

    @property
    def q_w(self):
        return self.draws.shape[1]

    @property
    def steps(self):
        return self.draws.shape[0]


def wiener_path(seed, q_w, steps, base_seed=None, stream_index=()):
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return WienerPath(rng.standard_normal((steps, q_w)), int(seed), base_seed, tuple(stream_index))


def stack_paths(seeds, q_w, steps):
    """Draws for a batch of streams, shape ``(steps, len(seeds), q_w)``."""
    out = np.empty((steps, len(seeds), q_w))
    for b, s in enumerate(seeds):
        out[:, b, :] = np.random.Generator(np.random.PCG64(int(s))).standard_normal((steps, q_w))
    return out


@dataclass(frozen=True)
class StateTrajectory:
    grid: TimeGrid
    states: np.ndarray
    failed_rows: tuple = ()

    @property
    def final(self):
        return self.states[-1]


@dataclass(frozen=True)
class OutputTrajectory:
    grid: TimeGrid
    values: np.ndarray


def _prepare(model, x0, u):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != model.n or x0.ndim not in (1, 2):
        raise ValueError(f"x0 must have shape ({model.n},) or (B, {model.n}), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 has non-finite entries")
    return x0, model.control(u)


def _check_finite(states, raise_on_failure):
    ok = np.isfinite(states)
    if ok.all():
        return None
    bad_nodes = ~ok.reshape(states.shape[0], -1).all(axis=1)
    node = int(np.argmax(bad_nodes))
    if states.ndim == 3:
        rows = np.flatnonzero(~ok.all(axis=(0, 2)))
    else:
        rows = np.array([], dtype=int)
    if raise_on_failure:
        raise IntegrationError(f"non-finite state at node {node}", node=node, rows=rows.tolist())
    return rows


def integrate_ode(model, x0, u, grid, method="rk4", raise_on_failure=True):
    """Integrate the drift of ``model`` on ``grid`` (diffusion is ignored).

    Parameters
    ----------
    model : SystemModel
    x0 : (n,) or (B, n) array_like
    u : ControlSignal or None
        ``None`` uses the model's default control.
    grid : TimeGrid
    method : {'rk4', 'euler'}
    raise_on_failure : bool
        If False, non-finite rows are left in place and reported through
        the ``failed_rows`` attribute of the returned trajectory instead.
    """
    x0, u = _prepare(model, x0, u)
    f = model.drift
    dt, steps = grid.dt, grid.steps
    states = np.empty((grid.node_count,) + x0.shape)
    states[0] = x0
    x = x0
    t = grid.times
    with np.errstate(all="ignore"):
        if method == "rk4":
            half = 0.5 * dt
            if u.is_constant:
                uc = u(0.0)
                for k in range(steps):
                    k1 = f(x, uc)
                    k2 = f(x + half * k1, uc)
                    k3 = f(x + half * k2, uc)
                    k4 = f(x + dt * k3, uc)
                    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    states[k + 1] = x
            else:
                for k in range(steps):
                    u0, um, u1 = u(t[k]), u(t[k] + half), u(t[k + 1])
                    k1 = f(x, u0)
                    k2 = f(x + half * k1, um)
                    k3 = f(x + half * k2, um)
                    k4 = f(x + dt * k3, u1)
                    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    states[k + 1] = x
        elif method == "euler":
            for k in range(steps):
                x = x + f(x, u(t[k])) * dt
                states[k + 1] = x
        else:
            raise ValueError(f"unknown method {method!r}")
    failed = _check_finite(states, raise_on_failure)
    return StateTrajectory(grid, states, () if failed is None else tuple(failed.tolist()))


def _draws_for(path, x0, model, grid):
    if isinstance(path, WienerPath):
        Z = path.draws
    elif isinstance(path, (list, tuple)) and path and isinstance(path[0], WienerPath):
        Z = np.stack([p.draws for p in path], axis=1)
    else:
        Z = np.asarray(path, dtype=float)
    want = (grid.steps,) + x0.shape[:-1] + (model.q_w,)
    if Z.shape != want:
        raise ValueError(f"Wiener draws have shape {Z.shape}, expected {want}")
    return Z


def integrate_sde(model, x0, u, grid, path, raise_on_failure=True):
    """Euler-Maruyama integration driven by standard-normal draws.

    ``path`` is a :class:`WienerPath` (unbatched), a list of them (one per
    batch row), or a raw array of shape ``(steps, B, q_w)``.
    """
    x0, u = _prepare(model, x0, u)
    Z = _draws_for(path, x0, model, grid)
    f, g = model.drift, model.diffusion
    dt, steps = grid.dt, grid.steps
    sqdt = math.sqrt(dt)
    states = np.empty((grid.node_count,) + x0.shape)
    states[0] = x0
    x = x0
    t = grid.times
    const = u.is_constant
    uc = u(0.0)
    with np.errstate(all="ignore"):
        for k in range(steps):
            uk = uc if const else u(t[k])
            noise = np.einsum("...ij,...j->...i", g(x, uk), Z[k]) * sqdt
            x = x + f(x, uk) * dt + noise
            states[k + 1] = x
    failed = _check_finite(states, raise_on_failure)
    return StateTrajectory(grid, states, () if failed is None else tuple(failed.tolist()))


def output_of(model, traj):
    """Apply the output map node-wise."""
    vals = model.output(traj.states)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("non-finite output")
    return OutputTrajectory(traj.grid, vals)
