"""Closed-form expected Gramians for linear stochastic systems.

Covers additive noise (``dX = A X dt + Ω dW``) and multiplicative noise
(``dX = A X dt + Σ_j Ω_j X dw_j``), both with ``Y = C X``.  The expected
sample Gramian splits into a mean-trajectory part ``W_bar`` (the ordinary
observability Gramian ``W_O``) and a diagonal covariance part ``W_hat``.
Time integrals use the trapezoid rule on the same uniform grid as the
empirical Gramian so the two are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import TimeGrid
from .linalg import DEFAULT_RANK_TOL, kron, kron_sum, mat_exp, rank_with_tolerance, sym_eig, symmetrize, unvec, vec
from .systems import LinearMultiplicativeSpec

__all__ = [
    "ExpectedGramianReport",
    "linear_observability_gramian",
    "observability_gramian_path",
    "lyapunov_path",
    "ou_expected_gramian",
    "second_moment_matrix",
    "second_moment_propagation",
    "bs_expected_gramian",
    "stochastic_observability_test",
    "observability_expectation",
    "mean_gramian_parts",
]


def _rk4_matrix_path(rhs, M0, grid):
    out = np.empty((grid.node_count,) + M0.shape)
    out[0] = M = M0
    h = grid.dt
    for k in range(grid.steps):
        k1 = rhs(M)
        k2 = rhs(M + 0.5 * h * k1)
        k3 = rhs(M + 0.5 * h * k2)
        k4 = rhs(M + h * k3)
        M = M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = M
    return out


def observability_gramian_path(A, C, grid):
    """``W_O(t_k) = ∫_0^{t_k} e^{A^T t} C^T C e^{A t} dt`` at every node.

    Integrates ``M' = A^T M + M A + C^T C``, ``M(0) = 0`` with RK4.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if A.shape[0] != A.shape[1] or C.shape[1] != A.shape[0]:
        raise ValueError(f"incompatible shapes A{A.shape}, C{C.shape}")
    CtC = C.T @ C
    At = A.T
    return _rk4_matrix_path(lambda M: At @ M + M @ A + CtC, np.zeros_like(A), grid)


def linear_observability_gramian(A, C, t1, dt=1e-3):
    """Finite-horizon observability Gramian ``W_O(t1)``."""
    path = observability_gramian_path(A, C, TimeGrid(t1, dt))
    return symmetrize(path[-1])


def lyapunov_path(A, Omega, grid):
    """Controllability Gramian ``W_C(t) = ∫_0^t e^{A s} Ω Ω^T e^{A^T s} ds`` at every node."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Om = np.asarray(Omega, dtype=float).reshape(A.shape[0], -1)
    OOt = Om @ Om.T
    return _rk4_matrix_path(lambda M: A @ M + M @ A.T + OOt, np.zeros_like(A), grid)


@dataclass(frozen=True)
class ExpectedGramianReport:
    """Expected Gramian ``E_W = W_bar + W_hat`` with its ingredients.

    ``components`` holds the model-specific scalars: for additive noise
    ``initial_cov_term`` and ``noise_term`` (each already multiplied by
    ``1/(2 ε²)``); for multiplicative noise the per-coordinate integrals
    ``omega_integrals`` (so ``diag(W_hat) = omega_integrals / 2``).
    """

    W_bar: np.ndarray
    W_hat: np.ndarray
    E_W: np.ndarray
    W_O: np.ndarray
    eps: float
    t1: float
    dt: float
    components: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "W_bar": self.W_bar.tolist(),
            "W_hat": self.W_hat.tolist(),
            "E_W": self.E_W.tolist(),
            "W_O": self.W_O.tolist(),
            "eps": self.eps,
            "t1": self.t1,
            "dt": self.dt,
            "components": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.components.items()},
        }


def ou_expected_gramian(spec, eps, t1, dt=1e-3):
    """Expected Gramian for additive noise.

        E_W = W_O + I/(2ε²) tr(W_O Cov[X0]) + I/(2ε²) ∫_0^{t1} tr(C W_C(t) C^T) dt

    ``W_C`` comes from the Lyapunov ODE ``W_C' = A W_C + W_C A^T + Ω Ω^T``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = TimeGrid(t1, dt)
    W_O = symmetrize(observability_gramian_path(spec.A, spec.C, grid)[-1])
    W_C = lyapunov_path(spec.A, spec.Omega, grid)
    C = spec.C
    integrand = np.einsum("pi,kij,pj->k", C, W_C, C)
    scale = 1.0 / (2.0 * eps * eps)
    cov_term = scale * float(np.trace(W_O @ spec.cov0))
    noise_term = scale * float(grid.trapezoid_weights() @ integrand)
    n = spec.n
    W_hat = (cov_term + noise_term) * np.eye(n)
    return ExpectedGramianReport(
        W_bar=W_O,
        W_hat=W_hat,
        E_W=W_O + W_hat,
        W_O=W_O,
        eps=float(eps),
        t1=float(t1),
        dt=float(dt),
        components={"initial_cov_term": cov_term, "noise_term": noise_term},
    )


def second_moment_matrix(spec):
    """``Q = A ⊕ A + Σ_j Ω_j ⊗ Ω_j``, the generator of ``vec(E[X X^T])``."""
    Q = kron_sum(spec.A, spec.A)
    for Om in spec.Omega_list:
        Q = Q + kron(Om, Om)
    return Q


def second_moment_propagation(spec, t):
    """``E[X(t) X(t)^T] = unvec(e^{Q t} vec(E[X0 X0^T]))``."""
    Q = second_moment_matrix(spec)
    out = unvec(mat_exp(Q * t) @ vec(spec.second_moment0), spec.n)
    return symmetrize(out)


def _propagate(G, v0, grid):
    """Apply ``e^{G t_k}`` to the columns of ``v0`` at every grid node."""
    step = mat_exp(G * grid.dt)
    out = np.empty((grid.node_count,) + v0.shape)
    out[0] = v = v0
    for k in range(grid.steps):
        v = step @ v
        out[k + 1] = v
    return out


def _bs_omega_traces(spec, eps, grid):
    """``tr(unvec(ω_i(t_k)))`` as ``(node_count, n)``."""
    n = spec.n
    Q = second_moment_matrix(spec)
    AA = kron_sum(spec.A, spec.A)
    basis = np.stack([vec(np.outer(e, e)) for e in np.eye(n)], axis=1)  # (n², n)
    mu = spec.mean0
    inv_e2 = 1.0 / (eps * eps)
    vQ = _propagate(Q, np.column_stack([vec(spec.second_moment0), basis]), grid)
    vA = _propagate(AA, np.column_stack([vec(np.outer(mu, mu)), basis]), grid)
    diff = inv_e2 * (vQ[:, :, :1] - vA[:, :, :1]) + (vQ[:, :, 1:] - vA[:, :, 1:])  # (nodes, n², n)
    # tr(unvec((C⊗C) v)) = tr(C unvec(v) C^T)
    CtC = spec.C.T @ spec.C
    return np.einsum("ab,kbai->ki", CtC, _unvec_cols(diff, n))


def _unvec_cols(V, n):
    # (nodes, n², c) of column-stacked vecs -> (nodes, n, n, c) matrices
    nodes, _, c = V.shape
    return V.reshape(nodes, n, n, c).transpose(0, 2, 1, 3)


def bs_expected_gramian(spec, eps, t1, dt=1e-3):
    """Expected Gramian for multiplicative noise.

        E_W = W_O + ½ ∫_0^{t1} diag_i tr(unvec(ω_i(t))) dt

    with ``ω_i = (C⊗C)(ε⁻² e^{Qt} vec(M0) + e^{Qt} vec(e_i e_i^T)
    - ε⁻² e^{(A⊕A)t} vec(μ μ^T) - e^{(A⊕A)t} vec(e_i e_i^T))``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = TimeGrid(t1, dt)
    W_O = symmetrize(observability_gramian_path(spec.A, spec.C, grid)[-1])
    traces = _bs_omega_traces(spec, eps, grid)
    omega_int = grid.trapezoid_weights() @ traces
    W_hat = np.diag(0.5 * omega_int)
    return ExpectedGramianReport(
        W_bar=W_O,
        W_hat=W_hat,
        E_W=W_O + W_hat,
        W_O=W_O,
        eps=float(eps),
        t1=float(t1),
        dt=float(dt),
        components={"omega_integrals": omega_int},
    )


def _at_origin(spec):
    n = spec.n
    return LinearMultiplicativeSpec(spec.A, spec.C, spec.Omega_list, np.zeros(n), np.zeros((n, n)))


def stochastic_observability_test(spec, t1, tol=DEFAULT_RANK_TOL, eps=1.0, dt=1e-3):
    """Rank test for stochastic observability of a multiplicative-noise system.

    The expected Gramian is evaluated for a Dirac initial condition at the
    origin with zero control, where the ε-dependence cancels.  ``beta`` is
    ``λ_min(E_W) + ½ λ_min(W_hat)``, a lower bound for the observability
    expectation, and is only reported when the system is observable.

    Returns
    -------
    dict
        ``observable``, ``beta``, ``rank``, ``E_W`` and ``W_hat``.
    """
    rep = bs_expected_gramian(_at_origin(spec), eps, t1, dt)
    rank = rank_with_tolerance(rep.E_W, tol)
    observable = rank == spec.n
    beta = None
    if observable:
        beta = sym_eig(rep.E_W).lambda_min + 0.5 * sym_eig(rep.W_hat).lambda_min
    return {"observable": observable, "beta": beta, "rank": rank, "E_W": rep.E_W, "W_hat": rep.W_hat, "eps": eps, "t1": t1}


def observability_expectation(spec, t1, dt=1e-3):
    """``E[∫_0^{t1} Ψ^T C^T C Ψ dt]`` for the random fundamental matrix ``Ψ``.

    Evaluated as ``W_O(t1) + ∫ diag_i tr(C Cov[Ψ e_i] C^T) dt`` where the
    second moments of the columns come from RK4 integration of
    ``P' = A P + P A^T + Σ_j Ω_j P Ω_j^T``; no Kronecker products involved.
    """
    grid = TimeGrid(t1, dt)
    n = spec.n
    A, C = spec.A, spec.C
    Oms = spec.Omega_list
    W_O = observability_gramian_path(A, C, grid)[-1]

    def rhs(P):  # P: (n_cols, n, n)
        out = A @ P + P @ A.T
        for Om in Oms:
            out = out + Om @ P @ Om.T
        return out

    basis = np.stack([np.outer(e, e) for e in np.eye(n)])
    P = _rk4_matrix_path(rhs, basis, grid)  # second moments from e_i
    M = _rk4_matrix_path(lambda X: A @ X + X @ A.T, basis, grid)  # mean outer products
    cov_tr = np.einsum("pa,kiab,pb->ki", C, P - M, C)
    return symmetrize(W_O + np.diag(grid.trapezoid_weights() @ cov_tr))


def mean_gramian_parts(mean_plus, mean_minus, cov_trace, eps, grid):
    """Mean-trajectory and covariance parts of the expected sample Gramian.

    Parameters
    ----------
    mean_plus, mean_minus : (node_count, n, p) array_like
        ``E[y^{+i}(t_k)]`` and ``E[y^{-i}(t_k)]``.
    cov_trace : (node_count, n) array_like
        ``tr(Cov[y^{+i}(t_k)]) + tr(Cov[y^{-i}(t_k)])``.

    Returns
    -------
    W_bar : (n, n) ndarray
    W_hat : (n, n) diagonal ndarray
    """
    mean_plus = np.asarray(mean_plus, dtype=float)
    mean_minus = np.asarray(mean_minus, dtype=float)
    cov_trace = np.asarray(cov_trace, dtype=float)
    nodes = grid.node_count
    if mean_plus.shape[0] != nodes or mean_minus.shape != mean_plus.shape or cov_trace.shape[0] != nodes:
        raise ValueError("moment trajectories do not match the grid")
    w = grid.trapezoid_weights()
    d = mean_plus - mean_minus
    scale = 1.0 / (4.0 * eps * eps)
    W_bar = scale * np.einsum("k,kip,kjp->ij", w, d, d)
    W_hat = np.diag(scale * (w @ cov_trace))
    return symmetrize(W_bar), W_hat
