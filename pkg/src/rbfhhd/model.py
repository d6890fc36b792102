"""Sample sets and fitted meshless potentials."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import SampleError
from .kernels import Kernel, basis_gradients, basis_hessians, basis_laplacians, basis_values

COINCIDENCE_TOL = 1e-12

# rows * centres * dim per evaluation chunk
_CHUNK_BUDGET = 2_000_000


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Scattered points carrying scalar and/or vector constraints.

    ``scalar_index`` / ``vector_index`` index into ``points``; the two sets
    may overlap.
    """

    points: np.ndarray
    scalar_index: np.ndarray = None
    scalar_values: np.ndarray = None
    vector_index: np.ndarray = None
    vector_values: np.ndarray = None
    check_coincident: bool = True

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise SampleError(f"points must have shape (n, 2) or (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise SampleError("points contain non-finite coordinates")
        n, d = pts.shape
        si = np.zeros(0, int) if self.scalar_index is None else np.asarray(self.scalar_index, int).ravel()
        sv = np.zeros(0) if self.scalar_values is None else np.asarray(self.scalar_values, float).ravel()
        vi = np.zeros(0, int) if self.vector_index is None else np.asarray(self.vector_index, int).ravel()
        vv = np.zeros((0, d)) if self.vector_values is None else np.asarray(self.vector_values, float)
        vv = vv.reshape(-1, d) if vv.size else np.zeros((0, d))
        if len(si) != len(sv):
            raise SampleError("scalar_index and scalar_values differ in length")
        if len(vi) != len(vv):
            raise SampleError("vector_index and vector_values differ in length")
        for name, idx in (("scalar", si), ("vector", vi)):
            if len(idx) and (idx.min() < 0 or idx.max() >= n):
                raise SampleError(f"{name} constraint index out of range [0, {n})")
            if len(np.unique(idx)) != len(idx):
                raise SampleError(f"duplicate {name} constraint index")
        if not (np.all(np.isfinite(sv)) and np.all(np.isfinite(vv))):
            raise SampleError("constraint values contain non-finite entries")
        if self.check_coincident:
            pairs = coincident_pairs(pts)
            if pairs:
                shown = ", ".join(f"{i}~{j}" for i, j in pairs[:10])
                raise SampleError(
                    f"{len(pairs)} pair(s) of coincident points: {shown}",
                    indices=sorted({j for _, j in pairs}),
                )
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "scalar_index", _frozen(si, int))
        object.__setattr__(self, "scalar_values", _frozen(sv))
        object.__setattr__(self, "vector_index", _frozen(vi, int))
        object.__setattr__(self, "vector_values", _frozen(vv))

    @classmethod
    def from_vectors(cls, points, vectors, **kw) -> "SampleSet":
        points = np.asarray(points, float)
        return cls(points, vector_index=np.arange(len(points)), vector_values=vectors, **kw)

    @classmethod
    def from_scalars(cls, points, values, **kw) -> "SampleSet":
        points = np.asarray(points, float)
        return cls(points, scalar_index=np.arange(len(points)), scalar_values=values, **kw)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def constrained_index(self) -> np.ndarray:
        """Indices carrying at least one constraint, each counted once."""
        return np.union1d(self.scalar_index, self.vector_index)

    @property
    def vector_points(self) -> np.ndarray:
        return self.points[self.vector_index]

    @property
    def scalar_points(self) -> np.ndarray:
        return self.points[self.scalar_index]

    def bounding_box(self, pad: float = 0.0):
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        ext = (hi - lo) * pad
        return lo - ext, hi + ext

    def with_vectors(self, vectors) -> "SampleSet":
        return dataclasses.replace(self, vector_values=vectors, check_coincident=False)

    def with_scalars(self, values) -> "SampleSet":
        return dataclasses.replace(self, scalar_values=values, check_coincident=False)

    def vector_field_at_points(self) -> np.ndarray:
        """(n, d) array with the vector constraint at each point, NaN elsewhere."""
        out = np.full(self.points.shape, np.nan)
        out[self.vector_index] = self.vector_values
        return out

    def deduplicated(self, tol: float = COINCIDENCE_TOL) -> "SampleSet":
        """Drop points coincident (within ``tol``) with an earlier point,
        together with their constraints."""
        drop = {j for _, j in coincident_pairs(self.points, tol)}
        keep = np.array([i for i in range(self.n_points) if i not in drop], dtype=int)
        remap = -np.ones(self.n_points, dtype=int)
        remap[keep] = np.arange(len(keep))
        sm = remap[self.scalar_index] >= 0
        vm = remap[self.vector_index] >= 0
        return SampleSet(
            self.points[keep],
            remap[self.scalar_index][sm],
            self.scalar_values[sm],
            remap[self.vector_index][vm],
            self.vector_values[vm],
        )


def coincident_pairs(points, tol: float = COINCIDENCE_TOL):
    """Sorted pairs ``(i, j)``, ``i < j``, of points closer than ``tol``."""
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return []
    pairs = np.sort(pairs, axis=1)
    return sorted(map(tuple, pairs.tolist()))


def _chunks(n, k, d):
    step = max(1, _CHUNK_BUDGET // max(1, k * d))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _points(p, d):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {p.shape[1]}")
    return p, single


@dataclass(frozen=True, eq=False)
class ScalarPotentialModel:
    """``u(p) = sum_i alpha_i phi(||p - c_i||)``."""

    kernel: Kernel
    centres: np.ndarray
    coefficients: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centres, float))
        a = np.asarray(self.coefficients, float).ravel()
        if len(a) != len(c):
            raise ValueError("coefficients and centres differ in length")
        object.__setattr__(self, "centres", _frozen(c))
        object.__setattr__(self, "coefficients", _frozen(a))

    @property
    def dimension(self) -> int:
        return self.centres.shape[1]

    @property
    def n_centres(self) -> int:
        return len(self.centres)

    def potential(self, points):
        p, single = _points(points, self.dimension)
        out = np.empty(len(p))
        for s in _chunks(len(p), self.n_centres, 1):
            out[s] = basis_values(self.kernel, p[s], self.centres) @ self.coefficients
        return out[0] if single else out

    def gradient(self, points):
        p, single = _points(points, self.dimension)
        out = np.empty(p.shape)
        for s in _chunks(len(p), self.n_centres, self.dimension):
            g = basis_gradients(self.kernel, p[s], self.centres)
            out[s] = np.einsum("nkd,k->nd", g, self.coefficients)
        return out[0] if single else out

    def hessian(self, points):
        p, single = _points(points, self.dimension)
        d = self.dimension
        out = np.empty((len(p), d, d))
        for s in _chunks(len(p), self.n_centres, d * d):
            h = basis_hessians(self.kernel, p[s], self.centres)
            out[s] = np.einsum("nkab,k->nab", h, self.coefficients)
        return out[0] if single else out

    def laplacian(self, points):
        p, single = _points(points, self.dimension)
        out = np.empty(len(p))
        for s in _chunks(len(p), self.n_centres, 1):
            out[s] = basis_laplacians(self.kernel, p[s], self.centres) @ self.coefficients
        return out[0] if single else out

    def curl_of_gradient(self, points):
        """Analytic curl of ``grad u``: (n, 3) in 3D, (n,) in 2D."""
        h = self.hessian(np.atleast_2d(points))
        if self.dimension == 2:
            return h[:, 0, 1] - h[:, 1, 0]
        return np.stack(
            [h[:, 1, 2] - h[:, 2, 1], h[:, 2, 0] - h[:, 0, 2], h[:, 0, 1] - h[:, 1, 0]], axis=1
        )


@dataclass(frozen=True, eq=False)
class VectorPotentialModel:
    """Vector potential ``w`` whose rotor gives the solenoidal component.

    In 3D ``coefficients`` has shape (k, 3), one column per component of
    ``w``. In 2D it has shape (k, 1): a scalar stream potential with planar
    rotor ``(d_y w, -d_x w)``.
    """

    kernel: Kernel
    centres: np.ndarray
    coefficients: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centres, float))
        a = np.asarray(self.coefficients, float)
        a = a.reshape(len(c), -1) if a.size else np.zeros((len(c), 0))
        expected = 3 if c.shape[1] == 3 else 1
        if a.shape != (len(c), expected):
            raise ValueError(f"expected coefficients of shape {(len(c), expected)}, got {a.shape}")
        object.__setattr__(self, "centres", _frozen(c))
        object.__setattr__(self, "coefficients", _frozen(a))

    @property
    def dimension(self) -> int:
        return self.centres.shape[1]

    @property
    def n_centres(self) -> int:
        return len(self.centres)

    @property
    def n_components(self) -> int:
        return self.coefficients.shape[1]

    def potential(self, points):
        p, single = _points(points, self.dimension)
        out = np.empty((len(p), self.n_components))
        for s in _chunks(len(p), self.n_centres, 1):
            out[s] = basis_values(self.kernel, p[s], self.centres) @ self.coefficients
        return out[0] if single else out

    def potential_jacobian(self, points):
        """(n, m, d): ``d w_m / d x_d``."""
        p, _ = _points(points, self.dimension)
        out = np.empty((len(p), self.n_components, self.dimension))
        for s in _chunks(len(p), self.n_centres, self.dimension):
            g = basis_gradients(self.kernel, p[s], self.centres)
            out[s] = np.einsum("nkd,km->nmd", g, self.coefficients)
        return out

    def curl(self, points):
        p, single = _points(points, self.dimension)
        j = self.potential_jacobian(p)
        if self.dimension == 2:
            out = np.stack([j[:, 0, 1], -j[:, 0, 0]], axis=1)
        else:
            out = np.stack(
                [j[:, 2, 1] - j[:, 1, 2], j[:, 0, 2] - j[:, 2, 0], j[:, 1, 0] - j[:, 0, 1]], axis=1
            )
        return out[0] if single else out

    def potential_hessians(self, points):
        """(n, m, d, d) second derivatives of each component of ``w``."""
        p, _ = _points(points, self.dimension)
        d = self.dimension
        out = np.empty((len(p), self.n_components, d, d))
        for s in _chunks(len(p), self.n_centres, d * d):
            h = basis_hessians(self.kernel, p[s], self.centres)
            out[s] = np.einsum("nkab,km->nmab", h, self.coefficients)
        return out

    def curl_jacobian(self, points):
        """(n, d, d) Jacobian ``d (curl w)_a / d x_b``."""
        h = self.potential_hessians(points)
        if self.dimension == 2:
            return np.stack([h[:, 0, 1, :], -h[:, 0, 0, :]], axis=1)
        return np.stack(
            [h[:, 2, 1, :] - h[:, 1, 2, :], h[:, 0, 2, :] - h[:, 2, 0, :], h[:, 1, 0, :] - h[:, 0, 1, :]],
            axis=1,
        )

    def divergence_of_curl(self, points):
        h = self.potential_hessians(np.atleast_2d(points))
        if self.dimension == 2:
            return h[:, 0, 0, 1] - h[:, 0, 1, 0]
        return (
            (h[:, 2, 1, 0] - h[:, 1, 2, 0])
            + (h[:, 0, 2, 1] - h[:, 2, 0, 1])
            + (h[:, 1, 0, 2] - h[:, 0, 1, 2])
        )


@dataclass(frozen=True, eq=False)
class HHDResult:
    """``v = grad u + curl w + h`` at the input points."""

    conservative: ScalarPotentialModel
    solenoidal: VectorPotentialModel
    points: np.ndarray
    harmonic: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def conservative_field(self, points=None):
        return self.conservative.gradient(self.points if points is None else points)

    def solenoidal_field(self, points=None):
        return self.solenoidal.curl(self.points if points is None else points)


def eval_potential(model: ScalarPotentialModel, p):
    return model.potential(p)


def eval_gradient(model: ScalarPotentialModel, p):
    return model.gradient(p)


def eval_curl(model: VectorPotentialModel, p):
    return model.curl(p)


def eval_field_divergence_curl(models: Sequence[ScalarPotentialModel], p):
    """Divergence and curl of the field whose j-th component is ``models[j]``.

    Returns ``(divergence, curl)``; curl is (n, 3) in 3D and (n,) in 2D.
    """
    d = models[0].dimension
    if len(models) != d:
        raise ValueError(f"need {d} component models, got {len(models)}")
    pts = np.atleast_2d(np.asarray(p, float))
    # jac[n, j, b] = d v_j / d x_b
    jac = np.stack([m.gradient(pts) for m in models], axis=1)
    div = np.trace(jac, axis1=1, axis2=2)
    if d == 2:
        curl = jac[:, 1, 0] - jac[:, 0, 1]
    else:
        curl = np.stack(
            [jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0], jac[:, 1, 0] - jac[:, 0, 1]], axis=1
        )
    if np.asarray(p).ndim == 1:
        return div[0], curl[0]
    return div, curl


def zero_scalar_model(kernel: Kernel, centres) -> ScalarPotentialModel:
    centres = np.atleast_2d(centres)
    return ScalarPotentialModel(kernel, centres, np.zeros(len(centres)))


def bounding_box(points, pad: float = 0.0):
    points = np.atleast_2d(points)
    lo, hi = points.min(axis=0), points.max(axis=0)
    ext = (hi - lo) * pad
    return lo - ext, hi + ext
