import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rbfhhd.analysis import (
    add_noise,
    angle_errors,
    compute_metrics,
    gradient_stability_bound,
    kernel_slope_sup,
    linf_error,
    regularized_pinv_norm,
    rotor_stability_bound,
)
from rbfhhd.critical import (
    classify,
    default_guesses,
    find_critical_points,
    solenoidal_jacobian_eigenvalues,
)
from rbfhhd.fields import make_analytic_field
from rbfhhd.fit import FitConfig, fit_mixed
from rbfhhd.hhd import HHDConfig, decompose_direct
from rbfhhd.kernels import Kernel
from rbfhhd.model import ScalarPotentialModel

from oracles import dense_grid_classification
from workloads import full_grid

GAUSS = Kernel("gaussian", 1.0)

fields_2d = arrays(float, st.tuples(st.integers(3, 30), st.just(2)), elements=st.integers(-1000, 1000).map(lambda i: i / 100))


# -- metrics -------------------------------------------------------------------------


def test_identical_fields():
    ref = np.random.default_rng(0).normal(size=(50, 3))
    m = compute_metrics(ref, ref)
    assert m.nc == pytest.approx(1.0)
    assert m.nrmse == 0.0
    assert all(v == 1.0 for v in m.percentiles.values())
    assert m.mean_angle_deg == pytest.approx(0.0, abs=1e-6)
    assert m.linf == 0.0


def test_anticorrelated_fields():
    ref = np.random.default_rng(1).normal(size=(50, 2))
    assert compute_metrics(ref, -ref).nc == pytest.approx(-1.0)


def test_zero_variance_is_degenerate():
    ref = np.ones((10, 2))
    m = compute_metrics(ref, ref)
    assert m.degenerate
    assert np.isnan(m.nc)
    assert "degenerate" in m.table()


def test_nrmse_uses_reference_range():
    ref = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    cand = ref + 0.5
    assert compute_metrics(ref, cand).nrmse == 0.125
    # errors of exactly 0.125 of the range are not below 0.125
    assert compute_metrics(ref, cand, thresholds=[0.125, 0.25]).percentiles == {0.125: 0.0, 0.25: 1.0}


def test_scalar_fields_have_no_angles():
    m = compute_metrics(np.arange(5.0), np.arange(5.0))
    assert np.isnan(m.mean_angle_deg)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        compute_metrics(np.zeros((3, 2)), np.zeros((4, 2)))


@given(fields_2d, st.floats(0.01, 0.5), st.floats(0.51, 1.0))
@settings(max_examples=50, deadline=None)
def test_percentiles_are_monotone(ref, k1, k2):
    cand = ref + np.sin(ref)
    p = compute_metrics(ref, cand, thresholds=[k1, k2]).percentiles
    if not np.isnan(p[k1]):
        assert 0 <= p[k1] <= p[k2] <= 1


@given(fields_2d, st.floats(0.1, 100))
@settings(max_examples=50, deadline=None)
def test_nc_is_scale_invariant(ref, c):
    cand = ref + np.cos(ref)
    a = compute_metrics(ref, cand)
    b = compute_metrics(c * ref, c * cand)
    if not a.degenerate:
        assert b.nc == pytest.approx(a.nc, abs=1e-9)


@given(fields_2d, st.floats(-100, 100))
@settings(max_examples=50, deadline=None)
def test_nrmse_is_translation_invariant(ref, t):
    cand = ref + np.cos(ref)
    a = compute_metrics(ref, cand)
    b = compute_metrics(ref + t, cand + t)
    if not a.degenerate:
        assert b.nrmse == pytest.approx(a.nrmse, rel=1e-6, abs=1e-9)


def test_angles():
    a = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    b = np.array([[0.0, 3.0], [0.0, 1.0], [-1.0, -1.0]])
    np.testing.assert_allclose(angle_errors(a, b), [90.0, 0.0, 180.0])


def test_linf_normalizes_by_candidate():
    ref = np.array([1.0, 2.0, 3.0])
    cand = np.array([1.0, 2.0, 4.0])
    assert linf_error(ref, cand) == pytest.approx(0.25)
    assert linf_error(ref + 5, ref, align_constant=True) == 0.0


# -- stability bounds ---------------------------------------------------------------------


def test_kernel_slope_sup_of_gaussian():
    # |phi'| peaks at r = 1/sqrt(2 sigma) with value sqrt(2 sigma / e)
    assert kernel_slope_sup(GAUSS, 5.0, samples=200001) == pytest.approx(np.sqrt(2 / np.e), rel=1e-8)


def test_regularized_pinv_norm_matches_svd_definition():
    M = np.random.default_rng(2).normal(size=(20, 6))
    eps = 1e-3
    P = np.linalg.solve(M.T @ M + eps * np.eye(6), M.T)
    assert regularized_pinv_norm(M, eps) == pytest.approx(np.linalg.norm(P, 2), rel=1e-10)


def test_singular_unregularized_system_raises():
    M = np.ones((4, 2))
    with pytest.raises(np.linalg.LinAlgError):
        regularized_pinv_norm(M, 0.0)


def _u1_gradient_model():
    f = make_analytic_field("u1")
    s = f.vector_samples(f.grid(8))
    return s, fit_mixed(s, FitConfig(GAUSS))


def test_bounds_vanish_for_zero_noise_and_scale_linearly():
    s, m = _u1_gradient_model()
    assert gradient_stability_bound(m, s.points, 0.0) == 0.0
    b1 = gradient_stability_bound(m, s.points, 0.1)
    assert gradient_stability_bound(m, s.points, 0.2) == pytest.approx(2 * b1, rel=1e-14)
    r = decompose_direct(make_analytic_field("rotation").vector_samples(s.points), HHDConfig(GAUSS))
    assert rotor_stability_bound(r.solenoidal, s.points, 0.0) == 0.0
    b2 = rotor_stability_bound(r.solenoidal, s.points, 0.1)
    assert rotor_stability_bound(r.solenoidal, s.points, 0.2) == pytest.approx(2 * b2, rel=1e-14)
    with pytest.raises(ValueError):
        gradient_stability_bound(m, s.points, -1.0)


def test_gradient_bound_holds_for_noise_draws():
    s, m = _u1_gradient_model()
    bound = gradient_stability_bound(m, s.points, 0.1)
    rng = np.random.default_rng(3)
    for _ in range(10):
        e = rng.normal(size=s.vector_values.shape)
        e *= 0.1 / np.linalg.norm(e)
        me = fit_mixed(s.with_vectors(s.vector_values + e), FitConfig(GAUSS, centres=m.centres))
        dev = np.linalg.norm(me.gradient(s.points) - m.gradient(s.points), axis=1).max()
        assert dev <= bound


# -- noise --------------------------------------------------------------------------------------


def test_zero_noise_is_identity():
    _, s = full_grid("u1", 5)
    assert add_noise(s, 0.0, seed=1) is s


def test_noise_level_matches_target():
    pts = np.random.default_rng(0).uniform(-1, 1, (20000, 2))
    f = make_analytic_field("u1")
    s = f.vector_samples(pts)
    noisy = add_noise(s, 0.1, seed=4)
    rms = np.sqrt(np.mean(s.vector_values**2, axis=0))
    std = (noisy.vector_values - s.vector_values).std(axis=0)
    np.testing.assert_allclose(std, 0.1 * rms, rtol=0.05)


def test_noise_is_seeded():
    _, s = full_grid("u1", 5)
    a, b, c = add_noise(s, 0.2, 1), add_noise(s, 0.2, 1), add_noise(s, 0.2, 2)
    assert np.array_equal(a.vector_values, b.vector_values)
    assert not np.array_equal(a.vector_values, c.vector_values)
    assert np.array_equal(a.points, s.points)


def test_negative_noise_level():
    _, s = full_grid("u1", 5)
    with pytest.raises(ValueError):
        add_noise(s, -0.1)


# -- critical points ---------------------------------------------------------------------------------


def test_classify():
    assert classify([1.0, 2.0]) == "minimum"
    assert classify([-1.0, -2.0]) == "maximum"
    assert classify([-1.0, 2.0]) == "saddle"
    assert classify([1e-12, 2.0]) == "degenerate"
    assert classify([0.0, 0.0]) == "degenerate"


def test_default_guesses_are_cell_centres():
    m = ScalarPotentialModel(GAUSS, np.array([[0.0, 0.0], [1.0, 1.0]]), np.zeros(2))
    g = default_guesses(m)
    assert len(g) == 25
    assert g.min() == pytest.approx(0.1) and g.max() == pytest.approx(0.9)


def test_fitted_saddle_of_u1():
    f, s = full_grid("u1", 15)
    m = fit_mixed(s, FitConfig(GAUSS))
    cps = [c for c in find_critical_points(m, [[0.2, -0.1]], box=f.box) if c.converged]
    assert len(cps) == 1
    assert np.linalg.norm(cps[0].location) < 1e-3
    assert cps[0].classification == "saddle"


def test_fitted_bump_has_one_maximum_and_one_minimum():
    f, s = full_grid("bump", 30)
    m = fit_mixed(s, FitConfig(GAUSS))
    guesses = [[0.5, 0.2], [-0.6, -0.1], [0.9, -0.3], [-0.8, 0.3]]
    cps = [c for c in find_critical_points(m, guesses, box=((-1.5, -1.5), (1.5, 1.5))) if c.converged]
    kinds = sorted(c.classification for c in cps)
    assert kinds == ["maximum", "minimum"]
    for c in cps:
        x = 1 / np.sqrt(2) if c.classification == "maximum" else -1 / np.sqrt(2)
        assert np.linalg.norm(c.location - [x, 0.0]) < 1e-3


def test_sincos_run_converges_fast():
    # the attainable gradient floor scales with the coefficient magnitude,
    # which stays near 1 on this grid
    f, s = full_grid("sincos", 16)
    m = fit_mixed(s, FitConfig(GAUSS))
    rng = np.random.default_rng(8)
    lo, hi = (np.asarray(b) for b in f.box)
    runs = find_critical_points(m, rng.uniform(lo, hi, (5, 2)), tol=1e-15, max_iter=30, box=f.box, dedupe=False)
    good = [c for c in runs if c.converged]
    assert good, [c.gradient_norm for c in runs]
    assert min(c.gradient_norm for c in good) <= 1e-15


def test_traces_are_monotone_after_first_step():
    f, s = full_grid("sincos", 24)
    m = fit_mixed(s, FitConfig(GAUSS))
    for cp in find_critical_points(m, box=f.box, dedupe=False):
        norms = [t[2] for t in cp.trace]
        assert all(b <= a for a, b in zip(norms[1:], norms[2:]))
        assert [t[0] for t in cp.trace] == sorted(t[0] for t in cp.trace)


def test_classification_matches_brute_force_oracle():
    f, s = full_grid("sincos", 24)
    m = fit_mixed(s, FitConfig(GAUSS))
    for cp in find_critical_points(m, box=f.box):
        if cp.converged and cp.classification != "degenerate":
            _, kind = dense_grid_classification(f.potential_u, cp.location)
            assert kind == cp.classification


def test_unconverged_runs_are_reported():
    f, s = full_grid("sincos", 16)
    m = fit_mixed(s, FitConfig(GAUSS))
    runs = find_critical_points(m, [[0.3, 0.2]], max_iter=1, tol=1e-15, box=f.box)
    assert len(runs) == 1 and not runs[0].converged
    assert runs[0].iterations == 1


def test_leaving_the_box_is_flagged():
    # a single wide Gaussian bump centred outside the search box: the only
    # stationary point is its centre
    m = ScalarPotentialModel(Kernel("gaussian", 0.1), np.array([[5.0, 5.0]]), np.array([1.0]))
    runs = find_critical_points(m, [[0.5, 0.5]], box=((0.0, 0.0), (1.0, 1.0)))
    assert not runs[0].converged
    assert runs[0].flag == "left-domain"


def test_stationary_point_in_the_padding_is_not_reported():
    # with sigma = 1 the fit decays past the last samples and grows a spurious
    # extremum beyond the corner of the sampled square
    f, s = full_grid("sincos", 32)
    m = fit_mixed(s, FitConfig(GAUSS))
    corner = 2 * np.pi * 0.8
    run = find_critical_points(m, [[corner, corner]], box=f.box)[0]
    assert not run.converged
    assert run.flag == "left-domain"
    assert run.location[0] > 2 * np.pi


def test_solenoidal_jacobian_eigenvalues_of_rotation():
    s = make_analytic_field("rotation").vector_samples(make_analytic_field("rotation").grid(15))
    r = decompose_direct(s, HHDConfig(GAUSS, fit_mode="sequential", epsilon=1e-12))
    eig = solenoidal_jacobian_eigenvalues(r.solenoidal, [[0.0, 0.0]])[0]
    # v = (-y, x) has Jacobian eigenvalues +-i; a curl field stays trace free
    np.testing.assert_allclose(sorted(eig.imag), [-1.0, 1.0], atol=2e-2)
    np.testing.assert_allclose(eig.real, 0.0, atol=1e-12)
