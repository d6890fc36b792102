import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbfhhd.analysis import angle_errors
from rbfhhd.errors import ConfigurationError
from rbfhhd.fields import make_analytic_field, regular_grid
from rbfhhd.hhd import (
    HHDConfig,
    decompose,
    decompose_direct,
    decompose_laplace,
    decompose_weighted,
    fit_harmonic,
    gradient_matrix,
    residual_diagnostics,
    rotor_matrix,
    weighted_gradient_system,
)
from rbfhhd.kernels import Kernel
from rbfhhd.model import SampleSet, VectorPotentialModel

GAUSS = Kernel("gaussian", 1.0)
STRATEGIES = ("direct", "weighted", "laplace")


def samples_of(name, n):
    f = make_analytic_field(name)
    return f, f.vector_samples(f.grid(n))


def zero_samples(d):
    pts = regular_grid([-1] * d, [1] * d, 5 if d == 3 else 8)
    return SampleSet.from_vectors(pts, np.zeros_like(pts))


# -- configuration -------------------------------------------------------------------


def test_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        HHDConfig(GAUSS, strategy="spectral")
    with pytest.raises(ConfigurationError):
        HHDConfig(GAUSS, fit_mode="joint")
    with pytest.raises(ConfigurationError):
        HHDConfig(Kernel("tps"))
    with pytest.raises(ConfigurationError):
        HHDConfig(Kernel("wendland2"))
    with pytest.raises(ConfigurationError):
        HHDConfig(Kernel("imq", 0.0), strategy="laplace")
    with pytest.raises(ConfigurationError):
        HHDConfig(GAUSS, epsilon=-1)


def test_weighted_rejects_coarse_quadrature():
    _, s = samples_of("rotation", 10)
    with pytest.raises(ConfigurationError):
        decompose_weighted(s, HHDConfig(GAUSS, strategy="weighted", quadrature=8))


# -- matrices ---------------------------------------------------------------------------


def test_rotor_matrix_reproduces_curl():
    rng = np.random.default_rng(0)
    centres = rng.uniform(-1, 1, (6, 3))
    pts = rng.uniform(-1, 1, (9, 3))
    alpha = rng.normal(size=(6, 3))
    w = VectorPotentialModel(GAUSS, centres, alpha)
    A = rotor_matrix(GAUSS, pts, centres)
    got = (A @ alpha.T.ravel()).reshape(3, -1).T
    np.testing.assert_allclose(got, w.curl(pts), rtol=1e-13, atol=1e-14)


def test_gradient_matrix_shape_2d():
    assert gradient_matrix(GAUSS, np.zeros((4, 2)), np.ones((3, 2))).shape == (8, 3)
    assert rotor_matrix(GAUSS, np.zeros((4, 2)), np.ones((3, 2))).shape == (8, 3)


# -- zero and exact cases -------------------------------------------------------------------


@pytest.mark.parametrize("strategy", STRATEGIES)
@pytest.mark.parametrize("d", [2, 3])
def test_zero_field_gives_zero_components(strategy, d):
    s = zero_samples(d)
    r = decompose(s, HHDConfig(GAUSS, strategy=strategy, quadrature=12))
    assert np.all(r.conservative.coefficients == 0)
    assert np.all(r.solenoidal.coefficients == 0)
    assert np.all(r.harmonic == 0)
    diag = residual_diagnostics(r, s)
    assert all(v == 0 for v in diag.values())


@pytest.mark.parametrize("strategy", STRATEGIES)
@pytest.mark.parametrize("name", ["fig8", "rotation", "sincos"])
def test_exactness_identities_after_decomposition(strategy, name):
    f = make_analytic_field(name)
    n = 6 if f.dimension == 3 else 12
    s = f.vector_samples(f.grid(n))
    r = decompose(s, HHDConfig(GAUSS, strategy=strategy, quadrature=12 if f.dimension == 3 else 24))
    assert r.diagnostics["max_div_curl_w"] <= 1e-10
    assert r.diagnostics["max_curl_grad_u"] <= 1e-10


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_reconstruction_is_exact_at_samples(strategy):
    _, s = samples_of("fig8", 6)
    r = decompose(s, HHDConfig(GAUSS, strategy=strategy, quadrature=12))
    total = r.conservative_field() + r.solenoidal_field() + r.harmonic
    np.testing.assert_allclose(total, s.vector_values, rtol=0, atol=1e-12 * np.abs(s.vector_values).max())
    assert len(r.harmonic) == s.n_points


@given(c=st.floats(-50, 50).filter(lambda x: abs(x) > 1e-3))
@settings(max_examples=10, deadline=None)
def test_direct_is_linear(c):
    _, s = samples_of("sincos", 10)
    cfg = HHDConfig(Kernel("gaussian", 0.5), epsilon=0.0)
    r1 = decompose_direct(s, cfg)
    r2 = decompose_direct(s.with_vectors(c * s.vector_values), cfg)
    scale = abs(c) * np.abs(s.vector_values).max()
    assert np.max(np.abs(r2.conservative_field() - c * r1.conservative_field())) <= 1e-8 * scale
    assert np.max(np.abs(r2.solenoidal_field() - c * r1.solenoidal_field())) <= 1e-8 * scale


# -- direct ----------------------------------------------------------------------------------


def test_direct_conservative_input_angle():
    f, s = samples_of("u1", 15)
    r = decompose_direct(s, HHDConfig(GAUSS))
    assert angle_errors(f.gradient_u(s.points), r.conservative_field()).mean() <= 3.0


def test_sequential_mode_fits_rotor_to_remainder():
    f, s = samples_of("fig8", 6)
    ind = decompose_direct(s, HHDConfig(GAUSS))
    seq = decompose_direct(s, HHDConfig(GAUSS, fit_mode="sequential"))
    np.testing.assert_array_equal(ind.conservative.coefficients, seq.conservative.coefficients)
    # the remainder is smaller than the full field, so the rotor carries less energy
    assert seq.diagnostics["energy_solenoidal"] < ind.diagnostics["energy_solenoidal"]
    assert seq.diagnostics["h_rms"] <= ind.diagnostics["h_rms"]


def test_energy_fractions_are_reported():
    _, s = samples_of("rotation", 10)
    r = decompose_direct(s, HHDConfig(GAUSS))
    keys = {"energy_conservative", "energy_solenoidal", "energy_harmonic"}
    assert keys <= set(r.diagnostics)
    assert r.diagnostics["energy_solenoidal"] > 0.99


# -- weighted -----------------------------------------------------------------------------------


def test_weighted_system_is_symmetric_psd():
    _, s = samples_of("u1", 8)
    A, _ = weighted_gradient_system(s, HHDConfig(GAUSS, strategy="weighted", quadrature=16))
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.abs(A).max()
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(size=len(A))
        assert x @ A @ x >= -1e-12 * np.abs(A).max() * (x @ x)


def test_weighted_agrees_with_direct():
    f, s = samples_of("u1", 12)
    d = decompose_direct(s, HHDConfig(GAUSS))
    w = decompose_weighted(s, HHDConfig(GAUSS, strategy="weighted", quadrature=64))
    assert angle_errors(d.conservative_field(), w.conservative_field()).mean() <= 2.0


# -- laplace ------------------------------------------------------------------------------------------


def test_laplace_sends_harmonic_potential_to_h():
    # what survives in u is the surrogate's spurious divergence, so the
    # sampling must be dense enough for the interpolant to be nearly harmonic
    f, s = samples_of("u1", 20)
    r = decompose_laplace(s, HHDConfig(Kernel("gaussian", 0.5), strategy="laplace", epsilon=1e-14))
    assert np.linalg.norm(r.conservative_field()) <= 1e-3 * np.linalg.norm(s.vector_values)
    assert r.diagnostics["energy_harmonic"] > 0.99


def test_laplace_recovers_constant_laplacian():
    f, s = samples_of("paraboloid", 15)
    r = decompose_laplace(s, HHDConfig(GAUSS, strategy="laplace"))
    inner = s.points[np.all(np.abs(s.points) < 0.7, axis=1)]
    lap = r.conservative.laplacian(inner)
    assert np.max(np.abs(lap - 4.0)) <= 0.05 * 4.0


def test_laplace_reports_regularization_shift():
    _, s = samples_of("sincos", 10)
    r = decompose_laplace(s, HHDConfig(GAUSS, strategy="laplace"))
    assert r.diagnostics["regularization_shift"] >= 0
    assert isinstance(r.diagnostics["regularization_material"], bool)


# -- harmonic post-fit ------------------------------------------------------------------------------------


def test_harmonic_post_fit_interpolates_h():
    _, s = samples_of("u1", 10)
    r = decompose_laplace(s, HHDConfig(Kernel("gaussian", 5.0), strategy="laplace"))
    models = fit_harmonic(r, epsilon=1e-12)
    fitted = np.stack([m.potential(r.points) for m in models], axis=1)
    assert np.max(np.abs(fitted - r.harmonic)) <= 1e-6 * np.abs(r.harmonic).max()
