import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbfhhd.errors import CentreSingularityError, KernelConfigError, UndefinedDerivativeError
from rbfhhd.kernels import (
    FAMILIES,
    Kernel,
    basis_hessians,
    default_support_radius,
    existence_flags,
    rbf_gradient,
    rbf_hessian,
    rbf_laplacian,
)

from oracles import fd1, fd_gradient, fd_hessian, fd_radii as radii, fd_steps as steps, relative_error

SIGMAS = (0.5, 1.0, 2.0)


def kernels(families=FAMILIES, sigmas=SIGMAS):
    return [Kernel(f, s) for f in families for s in sigmas]


# -- closed-form values ---------------------------------------------------------


def test_eval_examples():
    assert Kernel("gaussian", 1).eval(0.0) == 1.0
    assert Kernel("mq", 1).eval(0.0) == 1.0
    assert Kernel("tps", 1).eval(1.0) == 0.0
    assert Kernel("tps", 1).eval(0.0) == 0.0


def test_first_derivative_examples():
    assert Kernel("gaussian", 1).eval_d1(0.0) == 0.0
    assert Kernel("cubic", 1).eval_d1(2.0) == pytest.approx(12.0, rel=1e-15)
    assert Kernel("mq", 1).eval_d1(0.0) == 0.0


def test_second_derivative_examples():
    assert Kernel("gaussian", 1).eval_d2(0.0) == pytest.approx(-2.0, rel=1e-15)
    assert Kernel("cubic", 1).eval_d2(0.0) == 0.0
    assert Kernel("mq", 2).eval_d2(0.0) == pytest.approx(0.5, rel=1e-15)


def test_tps_derivative_at_zero_is_undefined():
    k = Kernel("tps", 1)
    with pytest.raises(UndefinedDerivativeError):
        k.eval_d1(0.0)
    with pytest.raises(UndefinedDerivativeError):
        k.eval_d2(0.0)


def test_imq_sigma_zero_second_derivative_undefined():
    with pytest.raises(UndefinedDerivativeError):
        Kernel("imq", 0.0).eval_d2(0.0)


def test_configuration_errors():
    with pytest.raises(KernelConfigError):
        Kernel("mq", 0.0)
    with pytest.raises(KernelConfigError):
        Kernel("spline", 1.0)
    with pytest.raises(KernelConfigError):
        Kernel("gaussian", -1.0)
    with pytest.raises(KernelConfigError):
        Kernel("wendland4", 1.0, support_radius=0.0)


def test_long_names_are_accepted():
    assert Kernel("ThinPlateSpline").family == "tps"
    assert Kernel("LocalPoly2").family == "wendland2"


def test_text_record():
    assert Kernel("gaussian", 0.5).to_record() == "gaussian,0.5"
    assert Kernel("wendland4", 1.0, 2.0).to_record() == "wendland4,1.0,2.0"
    k = Kernel("imq", 2.0)
    assert Kernel.from_dict(k.to_dict()) == k


# -- derivative oracles ----------------------------------------------------------


@pytest.mark.parametrize("kernel", kernels(), ids=str)
def test_d1_matches_finite_differences(kernel):
    r = radii(kernel)
    err = relative_error(kernel.eval_d1(r), fd1(kernel.eval, r, steps(kernel, r)))
    assert err.max() < 1e-5


@pytest.mark.parametrize("kernel", kernels(), ids=str)
def test_d2_matches_finite_differences(kernel):
    r = radii(kernel, seed=1)
    err = relative_error(kernel.eval_d2(r), fd1(kernel.eval_d1, r, steps(kernel, r)))
    assert err.max() < 1e-5


@pytest.mark.parametrize("kernel", [k for k in kernels() if existence_flags(k).gradient_exists], ids=str)
def test_slope_vanishes_at_zero_when_gradient_exists(kernel):
    assert kernel.eval_d1(0.0) == 0.0


@pytest.mark.parametrize("family", ["wendland2", "wendland4"])
def test_local_kernels_vanish_beyond_support(family):
    k = Kernel(family, 1.0, support_radius=0.7)
    r = np.linspace(0.7, 5, 50)
    assert np.all(k.eval(r) == 0)
    assert np.all(k.eval_d1(r) == 0)
    assert np.all(k.eval_d2(r) == 0)
    assert rbf_laplacian(k, [0.0, 0.0], [1.0, 0.0]) == 0.0


def test_wendland4_laplacian_at_centre_is_zero_outside_support_in_3d():
    k = Kernel("wendland4", support_radius=1.0)
    assert rbf_laplacian(k, [0, 0, 0], [2.0, 0, 0]) == 0.0


# -- existence flags --------------------------------------------------------------


def test_existence_flags():
    tps = existence_flags(Kernel("tps"))
    assert (tps.gradient_exists, tps.hessian_exists) == (False, False)
    imq = existence_flags(Kernel("imq", 0.5))
    assert (imq.gradient_exists, imq.hessian_exists) == (True, True)
    g = existence_flags(Kernel("gaussian"))
    assert (g.gradient_exists, g.hessian_exists) == (True, True)
    assert existence_flags(Kernel("cubic", 0.0)).gradient_exists


# -- RBFs in R^d ---------------------------------------------------------------------


def test_rbf_gradient_examples():
    g = Kernel("gaussian", 1)
    assert np.array_equal(rbf_gradient(g, [0, 0], [0, 0]), [0.0, 0.0])
    np.testing.assert_allclose(rbf_gradient(g, [0, 0], [1, 0]), [-2 * np.exp(-1), 0.0], rtol=1e-14)
    fd = fd_gradient(lambda p: g.eval(np.linalg.norm(p)), np.array([1.0, 0.0]), h=1e-6)
    np.testing.assert_allclose(rbf_gradient(g, [0, 0], [1, 0]), fd, rtol=1e-8, atol=1e-10)


def test_rbf_gradient_at_centre_raises_without_flat_slope():
    with pytest.raises(CentreSingularityError):
        rbf_gradient(Kernel("wendland2"), [0, 0], [0, 0])
    with pytest.raises(CentreSingularityError):
        rbf_gradient(Kernel("tps"), [0, 0], [0, 0])


@pytest.mark.parametrize("kernel", kernels([f for f in FAMILIES if f != "tps"], (1.0,)), ids=str)
def test_rbf_gradient_matches_finite_differences(kernel):
    rng = np.random.default_rng(3)
    c = rng.normal(size=3)
    for _ in range(20):
        p = c + rng.uniform(-0.9, 0.9, 3)
        if kernel.is_local and abs(np.linalg.norm(p - c) - kernel.rho) < 1e-3:
            continue
        fd = fd_gradient(lambda q: kernel.eval(np.linalg.norm(q - c)), p)
        exact = rbf_gradient(kernel, c, p)
        assert np.linalg.norm(exact - fd) <= 1e-5 * max(np.linalg.norm(exact), 1e-8)


@pytest.mark.parametrize("kernel", kernels(["cubic", "gaussian", "imq", "mq", "wendland4"], (1.0,)), ids=str)
def test_rbf_hessian_matches_finite_differences(kernel):
    rng = np.random.default_rng(4)
    c = np.zeros(3)
    for _ in range(20):
        p = rng.uniform(-0.6, 0.6, 3)
        fd = fd_hessian(lambda q: kernel.eval(np.linalg.norm(q - c)), p)
        exact = rbf_hessian(kernel, c, p)
        assert np.linalg.norm(exact - fd) <= 1e-4 * np.linalg.norm(exact)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.sampled_from(["cubic", "gaussian", "imq", "mq"]))
@settings(max_examples=60, deadline=None)
def test_rbf_hessian_is_symmetric(p, family):
    H_ = rbf_hessian(Kernel(family, 1.0), [0.1, -0.2, 0.3], p)
    assert np.array_equal(H_, H_.T)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=3), st.sampled_from(["cubic", "gaussian", "imq", "mq", "wendland4"]))
@settings(max_examples=60, deadline=None)
def test_rbf_gradient_is_antisymmetric(offset, family):
    k = Kernel(family, 1.0, 2.0 if family == "wendland4" else None)
    c = np.zeros(len(offset))
    off = np.asarray(offset)
    assert np.array_equal(rbf_gradient(k, c, c + off), -rbf_gradient(k, c, c - off))


def test_hessian_at_centre():
    assert np.array_equal(rbf_hessian(Kernel("cubic", 1), [0, 0, 0], [0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(rbf_hessian(Kernel("gaussian", 1), [0, 0], [0, 0]), -2 * np.eye(2))
    with pytest.raises(UndefinedDerivativeError):
        rbf_hessian(Kernel("imq", 0.0), [0, 0], [0, 0])


def test_laplacian_is_hessian_trace():
    k = Kernel("gaussian", 1.0)
    assert rbf_laplacian(k, [0, 0, 0], [0, 0, 0]) == pytest.approx(-6.0, rel=1e-15)
    rng = np.random.default_rng(5)
    p = rng.normal(size=(10, 3))
    for q in p:
        assert rbf_laplacian(k, [0, 0, 0], q) == pytest.approx(np.trace(rbf_hessian(k, [0, 0, 0], q)), rel=1e-12)


def test_basis_hessians_shape():
    k = Kernel("gaussian")
    assert basis_hessians(k, np.zeros((4, 2)), np.ones((3, 2))).shape == (4, 3, 2, 2)


def test_default_support_radius_is_twice_mean_spacing():
    centres = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    # nearest distances 1, 1, 2
    assert default_support_radius(centres) == pytest.approx(2 * 4 / 3)
    k = Kernel("wendland4").with_default_support(centres)
    assert k.support_radius == pytest.approx(8 / 3)
