import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsgram.closed_form import linear_observability_gramian
from obsgram.gramian import (
    GramianResult,
    assemble_gramian,
    empirical_gramian,
    perturbation_states,
    perturbed_outputs,
)
from obsgram.integrate import IntegrationError, TimeGrid
from obsgram.systems import LinearAdditiveSpec, SystemModel, build_system, linear_to_model

from conftest import random_stable


def oscillator_oracle(t1):
    # y = x1(0) sin t + x2(0) cos t, integrate the outer product by hand
    return np.array([
        [t1 / 2 - np.sin(2 * t1) / 4, np.sin(t1) ** 2 / 2],
        [np.sin(t1) ** 2 / 2, t1 / 2 + np.sin(2 * t1) / 4],
    ])


def test_oscillator_matches_trig_integrals():
    res = empirical_gramian(build_system("oscillator"), [0, 0], None, 0.01, TimeGrid(10.0, 1e-3))
    np.testing.assert_allclose(res.W, oscillator_oracle(10.0), rtol=1e-6)
    assert res.sigma_min == pytest.approx(np.linalg.eigvalsh(oscillator_oracle(10.0))[0], rel=1e-6)
    assert res.kappa == pytest.approx(res.eigenvalues[-1] / res.eigenvalues[0])
    assert res.nu == pytest.approx(1 / res.sigma_min)


def test_unobservable_is_singular():
    res = empirical_gramian(build_system("oscillator_unobs"), [0, 0], None, 0.01, TimeGrid(10.0, 1e-3))
    assert res.sigma_min <= 1e-8
    assert res.nu == np.inf and res.kappa == np.inf


def test_perturbation_order():
    P = perturbation_states([1.0, 2.0], 0.5)
    np.testing.assert_array_equal(P, [[1.5, 2.0], [0.5, 2.0], [1.0, 2.5], [1.0, 1.5]])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2), st.floats(1e-3, 1.0))
def test_linear_empirical_equals_analytic(seed, n, p, eps):
    # for linear systems the central difference is exact for any eps
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n)
    C = rng.normal(size=(p, n))
    spec = LinearAdditiveSpec(A, C, np.zeros((n, n)), np.zeros(n), np.zeros((n, n)))
    grid = TimeGrid(2.0, 1e-3)
    W = empirical_gramian(linear_to_model(spec), rng.normal(size=n), None, eps, grid).W
    ref = linear_observability_gramian(A, C, 2.0)
    assert np.linalg.norm(W - ref) <= 1e-5 * np.linalg.norm(ref)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10.0))
def test_output_scaling_is_quadratic(c):
    base = build_system("sigma_nl")
    scaled = SystemModel(**{**base.__dict__, "output": lambda x: c * base.output(x)})
    grid = TimeGrid(2.0, 1e-2)
    W1 = empirical_gramian(base, [0.3, 1.0], None, 0.05, grid).W
    W2 = empirical_gramian(scaled, [0.3, 1.0], None, 0.05, grid).W
    np.testing.assert_allclose(W2, c * c * W1, rtol=1e-12)


def test_symmetric_psd_nonlinear():
    res = empirical_gramian(build_system("unicycle_det"), [0, 0, 0.3, 0.5], None, 0.01, TimeGrid(5.0, 1e-3))
    np.testing.assert_array_equal(res.W, res.W.T)
    assert res.eigenvalues[0] >= -1e-12


def test_stochastic_mode_is_seeded():
    m = build_system("noise_affine", {"q": 0.1})
    g = TimeGrid(2.0, 1e-3)
    a = empirical_gramian(m, [0, 1], None, 0.1, g, mode="stochastic", seed=5)
    b = empirical_gramian(m, [0, 1], None, 0.1, g, mode="stochastic", seed=5)
    c = empirical_gramian(m, [0, 1], None, 0.1, g, mode="stochastic", seed=6)
    np.testing.assert_array_equal(a.W, b.W)
    assert not np.array_equal(a.W, c.W)
    with pytest.raises(ValueError):
        empirical_gramian(m, [0, 1], None, 0.1, g, mode="stochastic")


def test_assemble_from_trajectory_list():
    m = build_system("oscillator")
    g = TimeGrid(3.0, 1e-2)
    outs = perturbed_outputs(m, [0, 0], None, 0.1, g)
    W1 = assemble_gramian(outs).W
    W2 = assemble_gramian(outs.trajectories(), eps=0.1, grid=g).W
    np.testing.assert_array_equal(W1, W2)


def test_bad_eps_and_divergence():
    m = build_system("oscillator")
    with pytest.raises(ValueError):
        empirical_gramian(m, [0, 0], None, 0.0, TimeGrid(1.0, 0.1))
    blow = SystemModel(
        name="blow", n=1, m=0, p=1, q_w=0,
        drift=lambda x, u: x**3, diffusion=lambda x, u: np.zeros(x.shape + (0,)),
        output=lambda x: x,
    )
    with pytest.raises(IntegrationError) as info:
        empirical_gramian(blow, [5.0], None, 0.1, TimeGrid(2.0, 1e-2))
    assert info.value.perturbation is not None


def test_result_to_dict_roundtrip():
    r = GramianResult.from_matrix(np.diag([2.0, 8.0]), metadata={"x": 1})
    d = r.to_dict()
    assert d["W"] == [[2.0, 0.0], [0.0, 8.0]]
    assert d["kappa"] == 4.0 and d["nu"] == 0.5 and d["sigma_min"] == 2.0
