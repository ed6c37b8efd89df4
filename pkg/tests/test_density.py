import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facetflow import density as D
from facetflow.density import ModelParams

from oracles import C_DAGGER_EXACT, symbolic_energy_flux_hessian


def test_c_dagger_closed_form():
    assert D.C_DAGGER == pytest.approx(C_DAGGER_EXACT, rel=1e-15)
    assert D.C_DAGGER == pytest.approx(5.0316210454317565, rel=1e-15)


# -- params ---------------------------------------------------------------------


def test_model_constants_defaults():
    for p, g, G in [(1.5, 0.5, 1.0), (2.0, 1.0, 1.0), (3.0, 1.0, 1.0), (6.0, 1.0, 2.0)]:
        prm = ModelParams(p=p)
        assert prm.gamma == g and prm.Gamma == G


@pytest.mark.parametrize("kw", [dict(b=-1), dict(p=1.0), dict(delta=1.0), dict(delta=0.0),
                                dict(epsilon=-0.1), dict(beta0=0.0), dict(gamma=2.0, Gamma=1.0)])
def test_params_rejects_invalid(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_joint_regime_message():
    with pytest.raises(ValueError, match="0<ε<δ/4"):
        ModelParams(delta=0.2, epsilon=0.05).require_joint()
    ModelParams(delta=0.2, epsilon=0.049).require_joint()


def test_params_roundtrip_and_unknown_keys():
    prm = ModelParams(b=0.3, p=2.5, delta=0.4, epsilon=0.01)
    assert ModelParams.from_dict(prm.to_dict()) == prm
    with pytest.raises(ValueError):
        ModelParams.from_dict({"b": 1, "q": 2})


def test_with_recomputes_model_constants():
    prm = ModelParams(p=1.5).with_(p=6.0)
    assert (prm.gamma, prm.Gamma) == (1.0, 2.0)


# -- scalar densities --------------------------------------------------------------


def test_g1_and_gp_examples():
    prm = ModelParams(b=1.0, p=2.0)
    assert D.eval_g(4.0, "g1", 0, prm) == pytest.approx(4.0)
    assert D.eval_g(1.0, "gp", 1, prm) == pytest.approx(1.0)
    prm = ModelParams(b=0.5, p=2.0, epsilon=0.5)
    # g_eps(0) = 2 b eps + eps^2
    assert D.eval_g(0.0, "g_eps", 0, prm) == pytest.approx(2 * 0.5 * 0.5 + 0.25)


def test_g_singularities():
    prm = ModelParams(b=1.0, p=1.5)
    with pytest.raises(D.DomainError):
        D.eval_g(0.0, "g1", 1, prm)
    with pytest.raises(D.DomainError):
        D.eval_g(0.0, "gp", 1, prm)
    assert D.eval_g(0.0, "gp", 0, prm) == 0.0
    assert np.isfinite(D.eval_g(0.0, "g_eps", 2, prm.with_(epsilon=0.1)))


@pytest.mark.parametrize("p", [1.3, 2.0, 3.0, 4.5])
def test_gp_derivatives_match_finite_differences(p):
    g = D.PowerDensity(p)
    for s in [0.01, 0.7, 3.0, 50.0]:
        h = 1e-6 * s
        assert g(s, 1) == pytest.approx((g(s + h) - g(s - h)) / (2 * h), rel=1e-7)
        assert g(s, 2) == pytest.approx((g(s + h, 1) - g(s - h, 1)) / (2 * h), rel=1e-6, abs=1e-12)


def test_custom_density_matches_power_density():
    p = 3.0
    cd = D.CustomDensity(lambda s: 2 * s**1.5 / 3, lambda s: s**0.5, lambda s: 0.5 * s**-0.5)
    prm_c = ModelParams(b=0.5, p=p, epsilon=0.1, density=cd)
    prm_m = ModelParams(b=0.5, p=p, epsilon=0.1)
    xi = np.random.default_rng(3).standard_normal((20, 2, 2))
    np.testing.assert_allclose(D.flux(xi, prm_c), D.flux(xi, prm_m), rtol=1e-13)
    np.testing.assert_allclose(D.hessian(xi, prm_c), D.hessian(xi, prm_m), rtol=1e-12, atol=1e-14)


# -- energy, flux, Hessian ------------------------------------------------------------


def test_energy_examples():
    assert D.energy_density(np.zeros((1, 2)), ModelParams(b=1, p=2, epsilon=0.5)) == pytest.approx(
        0.5 + 0.125)
    # |xi| = 1, b=2, p=3: 2*1 + 1/3
    assert D.energy_density([[1.0, 0.0]], ModelParams(b=2, p=3)) == pytest.approx(7 / 3)


def test_flux_examples():
    prm = ModelParams(b=2.0, p=2.0, epsilon=0.5)
    xi = np.array([[math.sqrt(3) / 2, 0.0]])
    np.testing.assert_allclose(D.flux(xi, prm), 3 * xi, rtol=1e-15)
    np.testing.assert_array_equal(D.flux(np.zeros((1, 2)), prm), 0.0)
    prm = ModelParams(b=1.0, p=2.0)
    np.testing.assert_allclose(D.flux([[3.0, 4.0]], prm), [[3.6, 4.8]], rtol=1e-15)
    # limit map is zero at the facet when eps = 0
    np.testing.assert_array_equal(D.flux(np.zeros((2, 2)), prm), 0.0)


@pytest.mark.parametrize("shape", [(1, 2), (2, 2), (2, 3)])
@pytest.mark.parametrize("b,p,eps", [(1.0, 1.5, 0.1), (0.25, 2.0, 0.01), (2.0, 3.0, 0.5)])
def test_flux_and_hessian_match_symbolic_oracle(shape, b, p, eps):
    rng = np.random.default_rng(hash((shape, b, p)) % 2**32)
    prm = ModelParams(b=b, p=p, epsilon=eps)
    for _ in range(3):
        xi = rng.standard_normal(shape) * 10 ** rng.uniform(-2, 2)
        e, g, h = symbolic_energy_flux_hessian(xi, b, p, eps)
        assert D.energy_density(xi, prm) == pytest.approx(e, rel=1e-14)
        np.testing.assert_allclose(D.flatten(D.flux(xi, prm)), g, rtol=1e-13, atol=1e-15 * abs(g).max())
        np.testing.assert_allclose(D.hessian(xi, prm), h, rtol=1e-12, atol=1e-13 * abs(h).max())


def test_hessian_eigenvalues_match_dense_spectrum():
    rng = np.random.default_rng(0)
    for prm in [ModelParams(b=1, p=1.5, epsilon=0.1), ModelParams(b=0.3, p=4, epsilon=0.01)]:
        xi = rng.standard_normal((200, 2, 3)) * 10 ** rng.uniform(-3, 3, (200, 1, 1))
        lam1, lam2 = D.hessian_eigenvalues(xi, prm)
        ev = np.linalg.eigvalsh(D.hessian(xi, prm))
        want = np.sort(np.concatenate([np.repeat(lam1[:, None], 5, 1), lam2[:, None]], 1), 1)
        err = np.abs(ev - want) / ev.max(1, keepdims=True)
        assert err.max() < 1e-12


def test_hessian_at_zero():
    prm = ModelParams(b=0.5, p=3.0, epsilon=0.2)
    H = D.hessian(np.zeros((1, 2)), prm)
    np.testing.assert_allclose(H, (0.5 / 0.2 + 0.2) * np.eye(2))
    with pytest.raises(D.DomainError):
        D.hessian(np.zeros((1, 2)), prm.with_(epsilon=0.0))


def test_ellipticity_ratio_grows_towards_the_facet():
    prm = ModelParams(b=1.0, p=2.0)
    xi = np.array([[[10.0**-k, 0.0]] for k in range(6)])
    assert np.all(np.diff(D.ellipticity_ratio(xi, prm)) > 0)
    np.testing.assert_allclose(D.ellipticity_ratio(xi, ModelParams(b=0.0, p=2.0)), 1.0)


def test_ellipticity_ratio_and_bound():
    prm = ModelParams(b=1.0, p=2.0, epsilon=0.05)
    assert D.ellipticity_bound(0.1, ModelParams(b=1.0, p=2.0)) == pytest.approx(11.0)
    # on the annulus |xi| >= delta the sampled ratio obeys R(delta) for p = 2
    rng = np.random.default_rng(1)
    xi = rng.standard_normal((5000, 1, 2))
    xi *= (0.1 + rng.exponential(1.0, (5000, 1, 1))) / D.frob(xi)[:, None, None]
    r = D.ellipticity_ratio(xi, prm)
    assert np.all(r <= D.ellipticity_bound(0.1, prm) * (1 + 1e-12))
    with pytest.raises(D.DomainError):
        D.ellipticity_ratio(np.zeros((1, 2)), ModelParams(b=1.0, p=2.0, epsilon=0.0))


def test_coefficient_matrix_is_n_by_n():
    prm = ModelParams(b=1.0, p=3.0, epsilon=0.1)
    Du = np.random.default_rng(2).standard_normal((7, 3, 2))
    C = D.coefficient_matrix_C(Du, prm)
    assert C.shape == (7, 2, 2)
    np.testing.assert_allclose(C, np.swapaxes(C, -1, -2))


# -- truncations -----------------------------------------------------------------------


def test_truncation_examples():
    np.testing.assert_allclose(D.truncate([[3.0, 4.0]], 1.0), [[2.4, 3.2]])
    np.testing.assert_array_equal(D.truncate([[0.3, 0.4]], 1.0), 0.0)
    g = D.truncate_relaxed([[0.3, 0.4]], 0.4, 0.1)
    assert D.frob(g) == pytest.approx(math.sqrt(0.26) - 0.4, rel=1e-15)
    np.testing.assert_array_equal(D.truncate_relaxed(np.zeros((1, 2)), 0.4, 0.1), 0.0)
    with pytest.raises(ValueError):
        D.truncate_relaxed([[1.0, 0.0]], 0.1, 0.1)


def test_relaxed_truncation_example_value():
    g = D.truncate_relaxed([[0.4, 0.0]], 0.25, 0.05)
    np.testing.assert_allclose(g, [[0.153113, 0.0]], atol=5e-7)
    np.testing.assert_allclose(D.truncate([[0.0, 2.0]], 1.0), [[0.0, 1.0]])


def test_gp_map_and_inverse():
    prm = ModelParams(p=3.0)
    np.testing.assert_allclose(D.gp_eps_map([[2.0, 0.0]], prm), [[8.0, 0.0]])
    np.testing.assert_allclose(D.gp_eps_inverse([[8.0, 0.0]], prm), [[2.0, 0.0]], rtol=1e-15)
    np.testing.assert_array_equal(D.gp_eps_inverse(np.zeros((1, 2)), prm), 0.0)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1.01, 12.0), eps=st.sampled_from([0.0, 0.1, 2.0]),
       r=st.floats(1e-6, 1e6), seed=st.integers(0, 2**31))
def test_gp_inverse_roundtrip(p, eps, r, seed):
    prm = ModelParams(p=p, epsilon=eps)
    xi = np.random.default_rng(seed).standard_normal((2, 2))
    xi *= r / D.frob(xi)
    back = D.gp_eps_inverse(D.gp_eps_map(xi, prm), prm)
    assert D.frob(back - xi) <= 1e-11 * r


def test_subdifferential_membership():
    assert D.subdifferential_contains(np.zeros((1, 2)), [[0.3, 0.4]])
    assert D.subdifferential_contains(np.zeros((1, 2)), [[0.6, 0.8]])
    assert not D.subdifferential_contains(np.zeros((1, 2)), [[0.6, 0.81]])
    assert D.subdifferential_contains([[3.0, 4.0]], [[0.6, 0.8]])
    assert not D.subdifferential_contains([[3.0, 4.0]], [[1.0, 0.0]])


# -- structure conditions -----------------------------------------------------------------


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 5.0])
def test_model_density_structure(p):
    prm = ModelParams(p=p)
    out = D.check_structure(D.PowerDensity(p), p, prm.gamma, prm.Gamma,
                            holder_constant=D.model_holder_constant(p))
    assert out == {"growth_prime": 0, "growth_pprime": 0, "ellipticity": 0, "holder_pprime": 0}


def test_model_gamma_alone_misses_holder_condition_for_p3():
    # the default Gamma is too small for the Hölder condition on g''
    out = D.check_structure(D.PowerDensity(3.0), 3.0, 1.0, 1.0)
    assert out["holder_pprime"] > 0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), N=st.integers(1, 3), n=st.integers(2, 3))
def test_flatten_roundtrip(seed, N, n):
    xi = np.random.default_rng(seed).standard_normal((4, N, n))
    np.testing.assert_array_equal(D.unflatten(D.flatten(xi), N, n), xi)
    # column-major: the first N entries are the first column
    np.testing.assert_array_equal(D.flatten(xi)[:, :N], xi[:, :, 0])
