"""Weak-observability lower bound and Fisher-information bound utilities.

The weak-observability test compares the Gramian's smallest singular value
against

    sup_t ( sqrt(n) ε² t1 / 3 · ||∂y/∂x0||_2 · Γ  +  n ε⁴ t1 / 36 · Γ² )

where ``Γ(t)`` is the largest 1-norm of the third directional derivative
``D³y(η)(e_i, e_i, e_i)`` over ``η`` on the segments ``x0 ± ε e_i``.  Both
derivatives are estimated by central differences of simulated outputs, so
the result is a heuristic, not a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gramian import assemble_gramian, perturbed_outputs
from .integrate import IntegrationError, integrate_ode
from .linalg import sym_eig, symmetrize

__all__ = [
    "BoundReport",
    "jacobian_estimate",
    "third_derivative_sup",
    "weak_observability_bound",
    "fisher_upper_bound",
    "fisher_condition_bounds",
    "condition_number",
]


def jacobian_estimate(y_pm, eps=None):
    """Central-difference ``∂y/∂x0`` at every node, shape ``(nodes, p, n)``."""
    eps = y_pm.eps if eps is None else eps
    return y_pm.differences() / (2.0 * eps)


def third_derivative_sup(model, x0, u, eps, grid, n_points=5, dx=None):
    """Node-wise ``Γ(t_k)`` and its maximum over the grid.

    Each segment ``[x0 - eps e_i, x0 + eps e_i]`` is sampled at ``n_points``
    evenly spaced points (endpoints included).  At every point the
    derivative is estimated with the stencil
    ``(y(+2dx)/2 - y(+dx) + y(-dx) - y(-2dx)/2) / dx³``, which takes
    ``4 n n_points`` extra trajectories.

    Returns
    -------
    gamma : (node_count,) ndarray
    gamma_sup : float
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    dx = eps / 10.0 if dx is None else dx
    if not dx > 0:
        raise ValueError(f"dx must be positive, got {dx}")
    x0 = np.asarray(x0, dtype=float)
    n = model.n
    offsets = np.linspace(-eps, eps, n_points)
    shifts = np.array([2.0, 1.0, -1.0, -2.0]) * dx
    coef = np.array([0.5, -1.0, 1.0, -0.5])
    starts = np.empty((n, n_points, 4, n))
    for i in range(n):
        for j, off in enumerate(offsets):
            for s, sh in enumerate(shifts):
                pt = x0.copy()
                pt[i] += off + sh
                starts[i, j, s] = pt
    traj = integrate_ode(model, starts.reshape(-1, n), u, grid, raise_on_failure=False)
    if traj.failed_rows:
        raise IntegrationError("stencil trajectory diverged", rows=traj.failed_rows)
    y = model.output(traj.states).reshape(grid.node_count, n, n_points, 4, -1)
    d3 = np.einsum("s,kijsp->kijp", coef, y) / dx**3
    gamma = np.abs(d3).sum(axis=-1).max(axis=(1, 2))
    return gamma, float(gamma.max())


@dataclass(frozen=True)
class BoundReport:
    bound_value: float
    gamma_sup: float
    jacobian_norm_sup: float
    sigma_min: float
    weakly_observable: bool
    n_points: int
    dx: float
    eps: float
    t1: float

    def to_dict(self):
        return dict(self.__dict__)


def weak_observability_bound(model, x0, u, eps, grid, n_points=5, dx=None):
    """Evaluate the Gramian lower bound and compare with ``σ_min(W)``.

    ``weakly_observable`` is the strict inequality ``sigma_min > bound``;
    the supremum over time is taken over grid nodes.
    """
    u = model.control(u)
    dx = eps / 10.0 if dx is None else dx
    outs = perturbed_outputs(model, x0, u, eps, grid)
    gram = assemble_gramian(outs)
    jac = jacobian_estimate(outs)
    jnorm = np.linalg.norm(jac, ord=2, axis=(1, 2))
    gamma, gamma_sup = third_derivative_sup(model, x0, u, eps, grid, n_points, dx)
    n, t1 = model.n, grid.t1
    rhs = math.sqrt(n) * eps**2 * t1 / 3.0 * jnorm * gamma + n * eps**4 * t1 / 36.0 * gamma**2
    bound = float(rhs.max())
    return BoundReport(
        bound_value=bound,
        gamma_sup=gamma_sup,
        jacobian_norm_sup=float(jnorm.max()),
        sigma_min=gram.sigma_min,
        weakly_observable=bool(gram.sigma_min > bound),
        n_points=int(n_points),
        dx=float(dx),
        eps=float(eps),
        t1=float(t1),
    )


def condition_number(S):
    """``λ_max / λ_min`` of a symmetric PSD matrix (``inf`` if singular)."""
    lam = sym_eig(S).eigenvalues
    if lam[0] <= 0:
        return math.inf
    return float(lam[-1] / lam[0])


def _check_spd(R):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    lam = np.linalg.eigvalsh(symmetrize(R))
    if lam[0] <= 0:
        raise ValueError("R must be symmetric positive definite")
    return R, lam


def fisher_upper_bound(R, dW_dt):
    """``σ_max(R⁻¹) · dW/dt``, an upper bound on the output Fisher information.

    ``dW_dt`` is the Gramian integrand ``Φ(t)^T Φ(t) / (4 ε²)`` at a node, or
    ``e^{A^T t} C^T C e^{A t}`` for a linear system.
    """
    R, lam = _check_spd(R)
    return symmetrize(dW_dt) / lam[0]


def fisher_condition_bounds(R, dW_dt):
    """``(max(1, κ(dW/dt)/κ(R)), κ(R) κ(dW/dt))`` bracketing ``κ(F)``.

    When ``dW_dt`` is singular its condition number is infinite and so is
    the upper bound.
    """
    R, lam = _check_spd(R)
    kR = float(lam[-1] / lam[0])
    kW = condition_number(dW_dt)
    if math.isinf(kW):
        return math.inf, math.inf
    return max(1.0, kW / kR), kR * kW
