"""Meshless Helmholtz-Hodge decomposition ``v = grad u + curl w + h``.

Three strategies share the same representation of the potentials as RBF
expansions:

``direct``
    least-squares fit of ``grad u`` and ``curl w`` to the samples.
``weighted``
    the same energies integrated over a box with midpoint quadrature, using a
    componentwise interpolant of the samples as integrand.
``laplace``
    ``Delta u = div v`` and ``Delta w = -curl v`` collocated at the samples.

No boundary conditions are imposed, so this is the natural (unconstrained)
decomposition: ``u`` and ``w`` are unique only as least-squares coefficient
vectors, and harmonic gradients may move between the components.

In 2D ``w`` is a scalar stream potential with ``curl w = (d_y w, -d_x w)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._linalg import CG_THRESHOLD, DEFAULT_EPSILON, solve_normal_equations, solve_spd
from .errors import ConfigurationError, SampleError
from .fit import FitConfig, fit_componentwise, resolve_centres
from .kernels import Kernel, basis_gradients, basis_laplacians, existence_flags
from .model import (
    HHDResult,
    SampleSet,
    ScalarPotentialModel,
    VectorPotentialModel,
    eval_field_divergence_curl,
)
from .fields import regular_grid

DIAGNOSTIC_POINTS = 200
MATERIAL_SHIFT = 1e-3
# matrix entries assembled per quadrature chunk
_QUAD_BUDGET = 4_000_000


class Strategy(str, Enum):
    DIRECT = "direct"
    WEIGHTED = "weighted"
    LAPLACE = "laplace"


class FitMode(str, Enum):
    INDEPENDENT = "independent"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class HHDConfig:
    """Settings shared by the decomposition strategies.

    Parameters
    ----------
    kernel : Kernel
        Needs an RBF gradient; the Laplace strategy also needs the Hessian.
    centres : array_like, optional
        Defaults to the vector sample points.
    strategy : {"direct", "weighted", "laplace"}
    epsilon : float
        Ridge term added to every normal matrix.
    quadrature : int
        Nodes per axis of the weighted strategy's midpoint grid.
    fit_mode : {"independent", "sequential"}
        ``sequential`` fits the rotor to ``v - grad u`` instead of ``v``.
    padding : float
        Relative padding of the quadrature box around the samples.
    auto_regularize : bool
        Add ``DEFAULT_EPSILON * I`` when a system with ``epsilon = 0`` is singular.
    """

    kernel: Kernel
    centres: Optional[np.ndarray] = None
    strategy: Strategy = Strategy.DIRECT
    epsilon: float = DEFAULT_EPSILON
    quadrature: int = 32
    fit_mode: FitMode = FitMode.INDEPENDENT
    padding: float = 0.0
    auto_regularize: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "strategy", Strategy(str(getattr(self.strategy, "value", self.strategy)).lower()))
            object.__setattr__(self, "fit_mode", FitMode(str(getattr(self.fit_mode, "value", self.fit_mode)).lower()))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if not self.epsilon >= 0:
            raise ConfigurationError(f"epsilon must be >= 0, got {self.epsilon}")
        if int(self.quadrature) < 2:
            raise ConfigurationError("quadrature needs at least 2 nodes per axis")
        flags = existence_flags(self.kernel)
        if not flags.gradient_exists:
            raise ConfigurationError(
                f"{self.kernel.family} kernel has no RBF gradient at its centres; "
                "it cannot represent decomposition potentials"
            )
        if self.strategy is Strategy.LAPLACE and not flags.hessian_exists:
            raise ConfigurationError(f"laplace strategy needs a C2 kernel; {self.kernel.family} is not")


# -- system assembly -----------------------------------------------------------


def gradient_matrix(kernel: Kernel, points, centres):
    """Stacked ``[Phi_x; Phi_y; (Phi_z)]`` of shape (d t, k)."""
    g = basis_gradients(kernel, points, centres)
    return np.concatenate([g[:, :, a] for a in range(g.shape[2])], axis=0)


def rotor_matrix(kernel: Kernel, points, centres):
    """Matrix mapping the potential coefficients to ``curl w`` at ``points``.

    3D: rows are blocks of curl components, columns blocks of the three
    components of ``w``::

        [[ 0,   -Phi_z,  Phi_y],
         [ Phi_z,  0,   -Phi_x],
         [-Phi_y,  Phi_x,  0  ]]

    2D: ``[Phi_y; -Phi_x]`` for the scalar stream potential.
    """
    g = basis_gradients(kernel, points, centres)
    gx, gy = g[:, :, 0], g[:, :, 1]
    if g.shape[2] == 2:
        return np.concatenate([gy, -gx], axis=0)
    gz = g[:, :, 2]
    z = np.zeros_like(gx)
    return np.block([[z, -gz, gy], [gz, z, -gx], [-gy, gx, z]])


def _stack(v):
    return np.concatenate([v[:, a] for a in range(v.shape[1])])


def _unstack(x, d):
    return x.reshape(d, -1).T


def _vector_model(kernel, centres, alpha, meta):
    d = centres.shape[1]
    coeffs = alpha.reshape(-1, 1) if d == 2 else alpha.reshape(3, -1).T
    return VectorPotentialModel(kernel, centres, coeffs, metadata=meta)


def _check_samples(samples: SampleSet):
    if len(samples.vector_index) == 0:
        raise SampleError("decomposition needs vector samples")


def _centres(samples, config):
    return resolve_centres(samples, config.centres, config.kernel, samples.vector_index)


# -- strategies ------------------------------------------------------------------


def decompose(samples: SampleSet, config: HHDConfig) -> HHDResult:
    """Dispatch on ``config.strategy``."""
    fn = {
        Strategy.DIRECT: decompose_direct,
        Strategy.WEIGHTED: decompose_weighted,
        Strategy.LAPLACE: decompose_laplace,
    }[config.strategy]
    return fn(samples, config)


def decompose_direct(samples: SampleSet, config: HHDConfig) -> HHDResult:
    """Least-squares fit of ``grad u`` and ``curl w`` to the vector samples."""
    _check_samples(samples)
    centres, kernel = _centres(samples, config)
    pts, v = samples.vector_points, samples.vector_values
    d = samples.dimension
    G = gradient_matrix(kernel, pts, centres)
    alpha_u, info_u = solve_normal_equations(G, _stack(v), config.epsilon, config.auto_regularize)
    u = ScalarPotentialModel(kernel, centres, alpha_u, metadata={"solver": info_u.as_dict()})
    target = v
    if config.fit_mode is FitMode.SEQUENTIAL:
        target = v - _unstack(G @ alpha_u, d)
    A = rotor_matrix(kernel, pts, centres)
    blocks = A.shape[1] // len(centres)
    alpha_w, info_w = solve_normal_equations(
        A, _stack(target), config.epsilon, config.auto_regularize, cg_threshold=CG_THRESHOLD * blocks
    )
    w = _vector_model(kernel, centres, alpha_w, {"solver": info_w.as_dict()})
    return _finish(samples, config, u, w, {"solver_u": info_u.as_dict(), "solver_w": info_w.as_dict()})


def quadrature_nodes(samples: SampleSet, config: HHDConfig):
    """Midpoint nodes of a ``quadrature^d`` box grid and the cell volume."""
    lo, hi = samples.bounding_box(config.padding)
    n = int(config.quadrature)
    h = (hi - lo) / n
    nodes = regular_grid(lo + h / 2, hi - h / 2, n)
    return nodes, float(np.prod(h))


def _surrogate(samples, config):
    fc = FitConfig(config.kernel, epsilon=config.epsilon)
    return fit_componentwise(samples, fc)


def _accumulate(builder, nodes, surrogate_values, volume, n_cols):
    """Gram matrix ``vol * B^T B`` and ``vol * B^T y`` summed over node chunks."""
    N = b = None
    d = nodes.shape[1]
    step = max(16, _QUAD_BUDGET // (n_cols * d))
    for start in range(0, len(nodes), step):
        sl = slice(start, start + step)
        B = builder(nodes[sl])
        y = _stack(surrogate_values[sl])
        if N is None:
            N = np.zeros((B.shape[1], B.shape[1]))
            b = np.zeros(B.shape[1])
        N += volume * (B.T @ B)
        b += volume * (B.T @ y)
    return N, b


def weighted_gradient_system(samples: SampleSet, config: HHDConfig):
    """The Galerkin system ``A alpha = b`` of the weighted conservative energy.

    ``A[i, j]`` approximates the integral of ``<grad phi_i, grad phi_j>`` and
    ``b[i]`` that of ``<grad phi_i, v~>`` over the box.
    """
    _check_samples(samples)
    centres, kernel = _centres(samples, config)
    nodes, vol = quadrature_nodes(samples, config)
    if len(nodes) < len(centres):
        raise ConfigurationError(
            f"quadrature grid has {len(nodes)} nodes for {len(centres)} centres; increase quadrature"
        )
    vt = np.stack([m.potential(nodes) for m in _surrogate(samples, config)], axis=1)
    return _accumulate(lambda p: gradient_matrix(kernel, p, centres), nodes, vt, vol, len(centres))


def decompose_weighted(samples: SampleSet, config: HHDConfig) -> HHDResult:
    """Minimise the integrated energies ``1/2 int ||grad u - v~||^2`` and
    ``1/2 int ||curl w - v~||^2`` over the sample bounding box."""
    _check_samples(samples)
    centres, kernel = _centres(samples, config)
    nodes, vol = quadrature_nodes(samples, config)
    if len(nodes) < len(centres):
        raise ConfigurationError(
            f"quadrature grid has {len(nodes)} nodes for {len(centres)} centres; increase quadrature"
        )
    surrogate = _surrogate(samples, config)
    vt = np.stack([m.potential(nodes) for m in surrogate], axis=1)
    d = samples.dimension
    Nu, bu = _accumulate(lambda p: gradient_matrix(kernel, p, centres), nodes, vt, vol, len(centres))
    alpha_u, info_u = solve_spd(Nu, bu, config.epsilon, config.auto_regularize)
    u = ScalarPotentialModel(kernel, centres, alpha_u, metadata={"solver": info_u.as_dict()})
    if config.fit_mode is FitMode.SEQUENTIAL:
        vt = vt - u.gradient(nodes)
    blocks = 1 if d == 2 else 3
    Nw, bw = _accumulate(lambda p: rotor_matrix(kernel, p, centres), nodes, vt, vol, blocks * len(centres))
    alpha_w, info_w = solve_spd(Nw, bw, config.epsilon, config.auto_regularize, cg_threshold=CG_THRESHOLD * blocks)
    w = _vector_model(kernel, centres, alpha_w, {"solver": info_w.as_dict()})
    diag = {
        "solver_u": info_u.as_dict(),
        "solver_w": info_w.as_dict(),
        "quadrature_nodes": len(nodes),
        "cell_volume": vol,
        "dimension": d,
    }
    return _finish(samples, config, u, w, diag)


def _laplace_solve(L, rhs, config):
    """Regularized solve plus the relative shift against the min-norm solution."""
    x, info = solve_normal_equations(L, rhs, max(config.epsilon, 0.0), config.auto_regularize)
    ref = sla.lstsq(L, rhs, lapack_driver="gelsd", check_finite=False)[0]
    scale = np.linalg.norm(ref)
    shift = float(np.linalg.norm(x - ref) / scale) if scale > 0 else float(np.linalg.norm(x))
    return x, info, shift


def decompose_laplace(samples: SampleSet, config: HHDConfig) -> HHDResult:
    """Collocate ``Delta u = div v~`` and ``Delta w = -curl v~`` at the samples.

    ``v~`` interpolates the samples componentwise, so its divergence and curl
    are analytic. The sign of the ``w`` equation follows from
    ``curl curl w = grad div w - Delta w``. Harmonic parts of ``v`` (zero
    divergence and curl) end up in ``h``.
    """
    _check_samples(samples)
    centres, kernel = _centres(samples, config)
    pts = samples.vector_points
    surrogate = _surrogate(samples, config)
    div, curl = eval_field_divergence_curl(surrogate, pts)
    L = basis_laplacians(kernel, pts, centres)
    alpha_u, info_u, shift_u = _laplace_solve(L, div, config)
    u = ScalarPotentialModel(kernel, centres, alpha_u, metadata={"solver": info_u.as_dict()})
    rhs = -curl.reshape(len(pts), -1)
    cols, shifts = [], []
    for j in range(rhs.shape[1]):
        a, info_w, s = _laplace_solve(L, rhs[:, j], config)
        cols.append(a)
        shifts.append(s)
    w = VectorPotentialModel(kernel, centres, np.stack(cols, axis=1), metadata={"solver": info_w.as_dict()})
    shift = max([shift_u] + shifts)
    diag = {
        "solver_u": info_u.as_dict(),
        "solver_w": info_w.as_dict(),
        "regularization_shift": shift,
        "regularization_material": shift > MATERIAL_SHIFT,
    }
    return _finish(samples, config, u, w, diag)


def _finish(samples, config, u, w, diag):
    pts = samples.vector_points
    h = samples.vector_values - u.gradient(pts) - w.curl(pts)
    diag = dict(diag)
    diag.update(strategy=config.strategy.value, fit_mode=config.fit_mode.value, n_centres=u.n_centres)
    result = HHDResult(u, w, pts.copy(), h, diag)
    result.diagnostics.update(residual_diagnostics(result, samples))
    return result


# -- diagnostics -------------------------------------------------------------------


def residual_diagnostics(result: HHDResult, samples: SampleSet, n_points: int = DIAGNOSTIC_POINTS, seed: int = 0):
    """Exactness identities at random interior points, ``h`` statistics and
    the energy fraction of each component at the samples."""
    lo, hi = samples.bounding_box()
    rng = np.random.default_rng(seed)
    p = lo + (hi - lo) * rng.random((n_points, samples.dimension))
    div_curl = np.abs(result.solenoidal.divergence_of_curl(p))
    curl_grad = np.abs(result.conservative.curl_of_gradient(p))
    if curl_grad.ndim == 2:
        curl_grad = np.linalg.norm(curl_grad, axis=1)
    hn = np.linalg.norm(result.harmonic, axis=1)
    v = samples.vector_values
    total = float(np.sum(v * v))
    g = result.conservative_field()
    c = result.solenoidal_field()

    def frac(x):
        return float(np.sum(x * x) / total) if total > 0 else 0.0

    return {
        "max_div_curl_w": float(div_curl.max()),
        "max_curl_grad_u": float(curl_grad.max()),
        "h_max": float(hn.max()) if len(hn) else 0.0,
        "h_mean": float(hn.mean()) if len(hn) else 0.0,
        "h_rms": float(np.sqrt(np.mean(hn * hn))) if len(hn) else 0.0,
        "energy_conservative": frac(g),
        "energy_solenoidal": frac(c),
        "energy_harmonic": frac(result.harmonic),
    }


def fit_harmonic(result: HHDResult, kernel: Optional[Kernel] = None, epsilon: float = DEFAULT_EPSILON):
    """Componentwise interpolant of the harmonic samples, one model per axis."""
    kernel = kernel or result.conservative.kernel
    samples = SampleSet.from_vectors(result.points, result.harmonic)
    return fit_componentwise(samples, FitConfig(kernel, epsilon=epsilon))


def with_strategy(config: HHDConfig, strategy) -> HHDConfig:
    return dataclasses.replace(config, strategy=strategy)
