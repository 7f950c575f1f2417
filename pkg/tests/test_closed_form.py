import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import expm

from obsgram.closed_form import (
    bs_expected_gramian,
    linear_observability_gramian,
    lyapunov_path,
    mean_gramian_parts,
    observability_expectation,
    ou_expected_gramian,
    second_moment_matrix,
    second_moment_propagation,
    stochastic_observability_test,
)
from obsgram.integrate import TimeGrid
from obsgram.linalg import kron_sum, rank_with_tolerance
from obsgram.systems import LinearAdditiveSpec, LinearMultiplicativeSpec

from conftest import random_stable

OSC_A = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_linear_gramian_vs_quadrature(rng):
    A = random_stable(rng, 3)
    C = rng.normal(size=(2, 3))
    ref, _ = quad_vec(lambda t: expm(A.T * t) @ C.T @ C @ expm(A * t), 0, 3.0, epsabs=1e-12)
    np.testing.assert_allclose(linear_observability_gramian(A, C, 3.0), ref, rtol=1e-9, atol=1e-12)


def test_lyapunov_path_vs_quadrature(rng):
    A = random_stable(rng, 2)
    Om = rng.normal(size=(2, 2))
    ref, _ = quad_vec(lambda s: expm(A * s) @ Om @ Om.T @ expm(A.T * s), 0, 2.0, epsabs=1e-12)
    np.testing.assert_allclose(lyapunov_path(A, Om, TimeGrid(2.0, 1e-3))[-1], ref, rtol=1e-9, atol=1e-12)


def test_ou_noiseless_reduces_to_wo(ou_spec):
    spec = LinearAdditiveSpec(ou_spec.A, ou_spec.C, np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)))
    rep = ou_expected_gramian(spec, 0.1, 5.0)
    np.testing.assert_array_equal(rep.E_W, rep.W_O)


def test_ou_eps_scaling(ou_spec):
    a = ou_expected_gramian(ou_spec, 0.2, 5.0)
    b = ou_expected_gramian(ou_spec, 0.1, 5.0)
    np.testing.assert_allclose(b.E_W - b.W_O, 4 * (a.E_W - a.W_O), rtol=1e-8)


def test_ou_monotone_in_noise(ou_spec, rng):
    base = ou_expected_gramian(ou_spec, 0.1, 5.0)
    extra = rng.normal(size=(2, 2))
    big_omega = np.linalg.cholesky(ou_spec.Omega @ ou_spec.Omega.T + extra @ extra.T)
    bigger = LinearAdditiveSpec(ou_spec.A, ou_spec.C, big_omega, ou_spec.mean0, ou_spec.cov0)
    big = ou_expected_gramian(bigger, 0.1, 5.0)
    assert np.all(np.linalg.eigvalsh(big.E_W) >= np.linalg.eigvalsh(base.E_W) - 1e-12)


def test_ou_initial_covariance_term(ou_spec):
    cov0 = np.array([[0.2, 0.05], [0.05, 0.1]])
    spec = LinearAdditiveSpec(ou_spec.A, ou_spec.C, ou_spec.Omega, np.zeros(2), cov0)
    rep = ou_expected_gramian(spec, 0.1, 5.0)
    assert rep.components["initial_cov_term"] == pytest.approx(np.trace(rep.W_O @ cov0) / (2 * 0.01))


def test_mean_gramian_parts_reproduces_ou(ou_spec):
    # feed the analytic output moments and compare with the closed form
    eps, t1 = 0.1, 5.0
    grid = TimeGrid(t1, 1e-3)
    cov0 = np.diag([0.1, 0.2])
    spec = LinearAdditiveSpec(ou_spec.A, ou_spec.C, ou_spec.Omega, np.array([0.3, -0.2]), cov0)
    A, C = spec.A, spec.C
    Phi = np.stack([expm(A * t) for t in grid.times])
    WC = lyapunov_path(A, spec.Omega, grid)
    P = Phi @ cov0 @ Phi.transpose(0, 2, 1) + WC
    mp = np.einsum("pa,kab,ib->kip", C, Phi, spec.mean0 + eps * np.eye(2))
    mm = np.einsum("pa,kab,ib->kip", C, Phi, spec.mean0 - eps * np.eye(2))
    tr = 2 * np.einsum("pa,kab,pb->k", C, P, C)
    W_bar, W_hat = mean_gramian_parts(mp, mm, np.repeat(tr[:, None], 2, axis=1), eps, grid)
    rep = ou_expected_gramian(spec, eps, t1)
    np.testing.assert_allclose(W_bar + W_hat, rep.E_W, rtol=1e-6)


def test_mean_gramian_parts_zero_noise():
    grid = TimeGrid(1.0, 0.1)
    m = np.ones((grid.node_count, 2, 1))
    _, W_hat = mean_gramian_parts(m, -m, np.zeros((grid.node_count, 2)), 0.5, grid)
    assert not W_hat.any()
    with pytest.raises(ValueError):
        mean_gramian_parts(m[:-1], -m[:-1], np.zeros((grid.node_count, 2)), 0.5, grid)


def test_second_moment_matrix_structure(bs_spec):
    Q = second_moment_matrix(bs_spec)
    Om = bs_spec.Omega_list[0]
    np.testing.assert_allclose(Q, kron_sum(bs_spec.A, bs_spec.A) + np.kron(Om, Om))


def test_second_moment_noiseless(rng):
    A = random_stable(rng, 3)
    S0 = np.eye(3) + 0.1
    spec = LinearMultiplicativeSpec(A, np.eye(3), [np.zeros((3, 3))], np.zeros(3), S0)
    E = expm(A * 1.5)
    np.testing.assert_allclose(second_moment_propagation(spec, 1.5), E @ S0 @ E.T, rtol=1e-10)


def test_second_moment_psd_random(rng):
    for _ in range(100):
        n = rng.integers(1, 4)
        A = random_stable(rng, n)
        Oms = [0.5 * rng.normal(size=(n, n)) for _ in range(rng.integers(1, 3))]
        B = rng.normal(size=(n, n))
        spec = LinearMultiplicativeSpec(A, np.eye(n), Oms, np.zeros(n), B @ B.T)
        S = second_moment_propagation(spec, rng.uniform(0.1, 3.0))
        lam = np.linalg.eigvalsh(S)
        np.testing.assert_allclose(S, S.T, atol=1e-12 * max(1.0, np.abs(S).max()))
        assert lam[0] >= -1e-10 * max(lam[-1], 1e-300)


def test_bs_noiseless_equals_wo():
    spec = LinearMultiplicativeSpec(OSC_A, np.array([[0.0, 1.0]]), [np.zeros((2, 2))], np.zeros(2), np.zeros((2, 2)))
    rep = bs_expected_gramian(spec, 0.3, 4.0)
    np.testing.assert_allclose(rep.E_W, rep.W_O, atol=1e-14)


def test_bs_against_moment_ode(bs_spec):
    # at the Dirac origin the Kronecker route and the matrix ODE must agree
    rep = bs_expected_gramian(bs_spec, 1.0, 4.0)
    oracle = observability_expectation(bs_spec, 4.0)
    np.testing.assert_allclose(rep.E_W + rep.W_hat, oracle, rtol=1e-9, atol=1e-12)


def _verdict_oracle(spec, t1):
    return rank_with_tolerance(observability_expectation(spec, t1)) == spec.n


@pytest.mark.parametrize(
    "A, C, Om, expected",
    [
        (OSC_A, [[0.0, 1.0]], np.zeros((2, 2)), True),
        (-np.eye(2), [[1.0, 0.0]], np.zeros((2, 2)), False),
        (-np.eye(2), [[1.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]], True),
    ],
    ids=["observable_pair", "decoupled", "noise_coupled"],
)
@pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
def test_stochastic_observability_verdict(A, C, Om, expected, eps):
    spec = LinearMultiplicativeSpec(np.array(A), np.array(C), [np.array(Om)], np.zeros(2), np.zeros((2, 2)))
    out = stochastic_observability_test(spec, 5.0, eps=eps)
    assert out["observable"] is expected
    assert out["observable"] == _verdict_oracle(spec, 5.0)
    if expected:
        assert 0 < out["beta"] <= np.linalg.eigvalsh(observability_expectation(spec, 5.0))[0]
    else:
        assert out["beta"] is None


def test_noise_coupled_has_rank_deficient_wo():
    spec = LinearMultiplicativeSpec(-np.eye(2), np.array([[1.0, 0.0]]), [np.array([[0.0, 1.0], [0.0, 0.0]])], np.zeros(2), np.zeros((2, 2)))
    rep = bs_expected_gramian(spec, 1.0, 5.0)
    assert rank_with_tolerance(rep.W_O) == 1
    assert rank_with_tolerance(rep.E_W) == 2
