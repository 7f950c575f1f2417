"""Empirical observability Gramians from ±ε-perturbed output trajectories.

For perturbations ``x0 ± ε e_i`` the difference matrix
``Φ(t) = [y^{+1} - y^{-1}, ..., y^{+n} - y^{-n}]`` (p x n) is integrated as

    W = 1/(4 ε²) ∫_0^{t1} Φ(t)^T Φ(t) dt

with the composite trapezoid rule on the integration nodes.  In stochastic
mode each of the 2n perturbed trajectories is driven by its own Wiener
path, derived from the Gramian seed as stream ``2 i + s`` (``s = 0`` for
the plus perturbation, ``1`` for the minus one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import (
    IntegrationError,
    TimeGrid,
    OutputTrajectory,
    derive_stream,
    integrate_ode,
    integrate_sde,
    stack_paths,
)
from .linalg import DEFAULT_RANK_TOL, sym_eig, symmetrize

__all__ = [
    "GramianResult",
    "PerturbedOutputs",
    "perturbation_states",
    "perturbed_outputs",
    "assemble_gramian",
    "empirical_gramian",
    "gramian_metrics",
    "batch_gramians",
    "sample_perturbed_outputs",
]


def gramian_metrics(eigenvalues, tol=DEFAULT_RANK_TOL):
    """``(sigma_min, nu, kappa)`` from ascending eigenvalues.

    ``nu = 1/λ_min`` and ``kappa = λ_max/λ_min`` are infinite when
    ``λ_min <= tol * max(1, λ_max)``.
    """
    lmin, lmax = float(eigenvalues[0]), float(eigenvalues[-1])
    if lmin <= tol * max(1.0, lmax):
        return lmin, math.inf, math.inf
    return lmin, 1.0 / lmin, lmax / lmin


@dataclass(frozen=True)
class GramianResult:
    W: np.ndarray
    eigenvalues: np.ndarray
    sigma_min: float
    nu: float
    kappa: float
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_matrix(cls, W, metadata=None, tol=DEFAULT_RANK_TOL):
        W = symmetrize(W)
        eig = sym_eig(W).eigenvalues
        smin, nu, kappa = gramian_metrics(eig, tol)
        return cls(W, eig, smin, nu, kappa, dict(metadata or {}))

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])

    def to_dict(self):
        return {
            "W": self.W.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "sigma_min": self.sigma_min,
            "nu": self.nu,
            "kappa": self.kappa,
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class PerturbedOutputs:
    """Outputs ``y^{±i}`` on a common grid.

    ``values[k, i, 0]`` is ``y^{+i}(t_k)`` and ``values[k, i, 1]`` is
    ``y^{-i}(t_k)``; shape ``(node_count, n, 2, p)``.
    """

    grid: TimeGrid
    eps: float
    values: np.ndarray
    seeds: tuple = ()

    @property
    def n(self):
        return self.values.shape[1]

    def plus(self, i):
        return OutputTrajectory(self.grid, self.values[:, i, 0])

    def minus(self, i):
        return OutputTrajectory(self.grid, self.values[:, i, 1])

    def trajectories(self):
        """The 2n trajectories in the order ``y^{+1}, y^{-1}, ..., y^{-n}``."""
        return [OutputTrajectory(self.grid, self.values[:, i, s]) for i in range(self.n) for s in (0, 1)]

    def differences(self):
        """Φ as ``(node_count, p, n)``."""
        d = self.values[:, :, 0] - self.values[:, :, 1]
        return np.swapaxes(d, 1, 2)


def perturbation_states(x0, eps):
    """Initial states ``x0 ± eps e_i`` as ``(2n, n)``, ordered ``+1, -1, +2, ...``."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    out = np.repeat(x0[None, :], 2 * n, axis=0)
    for i in range(n):
        out[2 * i, i] += eps
        out[2 * i + 1, i] -= eps
    return out


def _check_eps(eps):
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"eps must be positive and finite, got {eps}")


def perturbed_outputs(model, x0, u, eps, grid, mode="deterministic", seed=None):
    """Simulate the 2n perturbed trajectories and return their outputs.

    Parameters
    ----------
    mode : {'deterministic', 'stochastic'}
        Deterministic mode integrates the drift with RK4.  Stochastic mode
        uses Euler-Maruyama with stream ``2 i + s`` of ``seed``.
    seed : int, optional
        Required in stochastic mode.

    Raises
    ------
    IntegrationError
        With ``perturbation`` set to ``(i, sign)`` of the first failing
        trajectory.
    """
    _check_eps(eps)
    x0 = np.asarray(x0, dtype=float)
    starts = perturbation_states(x0, eps)
    n = model.n
    seeds = ()
    if mode == "deterministic":
        traj = integrate_ode(model, starts, u, grid, raise_on_failure=False)
    elif mode == "stochastic":
        if seed is None:
            raise ValueError("stochastic mode needs a seed")
        seeds = tuple(derive_stream(seed, j) for j in range(2 * n))
        Z = stack_paths(seeds, model.q_w, grid.steps)
        traj = integrate_sde(model, starts, u, grid, Z, raise_on_failure=False)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if traj.failed_rows:
        j = traj.failed_rows[0]
        err = IntegrationError(
            f"perturbed trajectory {'+-'[j % 2]}{j // 2 + 1} diverged", rows=traj.failed_rows
        )
        err.perturbation = (j // 2, "+-"[j % 2])
        raise err
    y = model.output(traj.states)  # (nodes, 2n, p)
    values = y.reshape(grid.node_count, n, 2, -1)
    return PerturbedOutputs(grid, float(eps), values, seeds)


def assemble_gramian(y_pm, eps=None, grid=None, metadata=None):
    """Trapezoid-rule Gramian from perturbed outputs.

    ``y_pm`` is a :class:`PerturbedOutputs`, or a list of 2n
    :class:`OutputTrajectory` ordered ``y^{+1}, y^{-1}, ...`` together with
    ``eps`` and ``grid``.
    """
    if isinstance(y_pm, PerturbedOutputs):
        eps = y_pm.eps if eps is None else eps
        grid = y_pm.grid if grid is None else grid
        if y_pm.grid != grid:
            raise ValueError("grid mismatch between outputs and quadrature grid")
        phi = y_pm.differences()
    else:
        trajs = list(y_pm)
        if len(trajs) % 2:
            raise ValueError("need an even number (2n) of perturbed trajectories")
        if grid is None:
            grid = trajs[0].grid
        for tr in trajs:
            if tr.grid != grid or tr.values.shape[0] != grid.node_count:
                raise ValueError("grid mismatch between perturbed trajectories")
        vals = np.stack([np.asarray(tr.values).reshape(grid.node_count, -1) for tr in trajs], axis=1)
        phi = np.swapaxes(vals[:, 0::2] - vals[:, 1::2], 1, 2)
    _check_eps(eps)
    w = grid.trapezoid_weights()
    W = np.einsum("k,kpi,kpj->ij", w, phi, phi) / (4.0 * eps * eps)
    meta = {"eps": float(eps), "t1": grid.t1, "dt": grid.dt}
    meta.update(metadata or {})
    return GramianResult.from_matrix(W, meta)


def empirical_gramian(model, x0, u, eps, grid, mode="deterministic", seed=None):
    """Empirical observability Gramian of ``model`` about ``x0``."""
    u = model.control(u)
    outs = perturbed_outputs(model, x0, u, eps, grid, mode=mode, seed=seed)
    meta = {
        "system": model.name,
        "x0": np.asarray(x0, dtype=float).tolist(),
        "control": u.describe(),
        "mode": mode,
    }
    if mode == "stochastic":
        meta["seed"] = int(seed)
    return assemble_gramian(outs, metadata=meta)


# -- batched sampling used by the ensemble code ------------------------------


def sample_perturbed_outputs(model, x0, u, eps, grid, sample_seeds, deterministic=False):
    """Perturbed outputs for several independent Gramian samples at once.

    Returns ``(values, failed)`` where ``values`` has shape
    ``(node_count, S, n, 2, p)`` and ``failed`` is a boolean mask over the
    S samples.  Sample ``s`` uses streams ``derive_stream(sample_seeds[s], j)``,
    exactly as :func:`perturbed_outputs` does for a single Gramian.
    """
    _check_eps(eps)
    n = model.n
    S = len(sample_seeds)
    starts = np.tile(perturbation_states(x0, eps), (S, 1))
    if deterministic:
        traj = integrate_ode(model, starts, u, grid, raise_on_failure=False)
    else:
        seeds = [derive_stream(s, j) for s in sample_seeds for j in range(2 * n)]
        Z = stack_paths(seeds, model.q_w, grid.steps)
        traj = integrate_sde(model, starts, u, grid, Z, raise_on_failure=False)
    failed = np.zeros(S, dtype=bool)
    for r in traj.failed_rows:
        failed[r // (2 * n)] = True
    y = model.output(traj.states)
    return y.reshape(grid.node_count, S, n, 2, -1), failed


def batch_gramians(values, eps, grid):
    """Gramians ``(S, n, n)`` from batched perturbed outputs ``(nodes, S, n, 2, p)``."""
    phi = values[:, :, :, 0] - values[:, :, :, 1]  # (nodes, S, n, p)
    w = grid.trapezoid_weights()
    W = np.einsum("k,ksip,ksjp->sij", w, phi, phi) / (4.0 * eps * eps)
    return 0.5 * (W + np.swapaxes(W, 1, 2))
