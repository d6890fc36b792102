"""Quality metrics, noise stability bounds and noise injection."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import DEFAULT_EPSILON
from .hhd import gradient_matrix, rotor_matrix
from .model import SampleSet, ScalarPotentialModel, VectorPotentialModel
from .critical import CriticalPoint, find_critical_points, solenoidal_jacobian_eigenvalues  # noqa: F401

DEFAULT_THRESHOLDS = (0.05, 0.10)


@dataclass
class MetricsReport:
    """Agreement between a reference and a candidate field.

    ``percentiles`` maps a threshold ``k`` to the fraction of points whose
    error, relative to the reference range, is below ``k``. Angles are only
    defined for vector fields and are ``nan`` for scalars.
    """

    nc: float
    nrmse: float
    percentiles: dict
    mean_angle_deg: float
    max_angle_deg: float
    linf: float
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def rows(self):
        out = [("NC", self.nc), ("NRMSE", self.nrmse)]
        out += [(f"P_{k:g}", v) for k, v in sorted(self.percentiles.items())]
        out += [("mean angle (deg)", self.mean_angle_deg), ("max angle (deg)", self.max_angle_deg)]
        out.append(("linf", self.linf))
        return out

    def table(self) -> str:
        width = max(len(name) for name, _ in self.rows())
        lines = [f"{name:<{width}}  {value:.6g}" for name, value in self.rows()]
        if self.degenerate:
            lines.append("# degenerate: " + "; ".join(self.notes))
        return "\n".join(lines)


def _columns(a):
    a = np.asarray(a, float)
    return a[:, None] if a.ndim == 1 else a


def _angles(ref, cand):
    nr = np.linalg.norm(ref, axis=1)
    nc = np.linalg.norm(cand, axis=1)
    both = (nr > 0) & (nc > 0)
    cos = np.ones(len(ref))
    cos[both] = np.einsum("ij,ij->i", ref[both], cand[both]) / (nr[both] * nc[both])
    # exactly one vanishing vector has no direction to agree with
    cos[(nr > 0) ^ (nc > 0)] = 0.0
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def angle_errors(reference, candidate):
    """Pointwise angle in degrees between two vector fields."""
    return _angles(_columns(reference), _columns(candidate))


def linf_error(reference, candidate, align_constant: bool = False) -> float:
    """``max |reference - candidate| / max |candidate|`` with pointwise norms.

    With ``align_constant`` the mean offset is removed first, which is the
    natural comparison for a potential fitted from gradients only.
    """
    ref, cand = _columns(reference), _columns(candidate)
    if align_constant:
        cand = cand + (ref - cand).mean(axis=0)
    diff = ref - cand
    scale = np.linalg.norm(cand, axis=1).max() if len(cand) else 0.0
    err = np.linalg.norm(diff, axis=1).max() if len(diff) else 0.0
    if scale == 0:
        return 0.0 if err == 0 else float("inf")
    return float(err / scale)


def compute_metrics(reference, candidate, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                    align_constant: bool = False) -> MetricsReport:
    """NC, NRMSE, P_k, angles and ``linf`` averaged over the field components.

    Parameters
    ----------
    reference, candidate : array_like, shape (n,) or (n, m)
    thresholds : sequence of float
        Relative error levels for the P_k fractions.
    align_constant : bool
        Remove the mean offset before comparing (see :func:`linf_error`).
    """
    ref, cand = _columns(reference), _columns(candidate)
    if ref.shape != cand.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {cand.shape}")
    if align_constant:
        cand = cand + (ref - cand).mean(axis=0)
    notes = []
    nc, nrmse, rel = [], [], []
    for j in range(ref.shape[1]):
        a, b = ref[:, j], cand[:, j]
        da, db = a - a.mean(), b - b.mean()
        denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
        if denom > 0:
            nc.append(float(np.sum(da * db) / denom))
        else:
            notes.append(f"component {j}: zero variance, NC undefined")
        span = float(np.ptp(a))
        if span > 0:
            nrmse.append(float(np.sqrt(np.mean((a - b) ** 2)) / span))
            rel.append(np.abs(a - b) / span)
        else:
            notes.append(f"component {j}: zero range, NRMSE and P_k undefined")
    percentiles = {}
    for k in sorted(thresholds):
        percentiles[float(k)] = float(np.mean([np.mean(r < k) for r in rel])) if rel else float("nan")
    if ref.shape[1] > 1:
        ang = _angles(ref, cand)
        mean_ang, max_ang = float(ang.mean()), float(ang.max())
    else:
        mean_ang = max_ang = float("nan")
    return MetricsReport(
        nc=float(np.mean(nc)) if nc else float("nan"),
        nrmse=float(np.mean(nrmse)) if nrmse else float("nan"),
        percentiles=percentiles,
        mean_angle_deg=mean_ang,
        max_angle_deg=max_ang,
        linf=linf_error(ref, cand),
        degenerate=bool(notes),
        notes=notes,
    )


# -- stability bounds ---------------------------------------------------------------


def kernel_slope_sup(kernel, diameter: float, samples: int = 4097) -> float:
    """``sup |phi'(r)|`` over ``[0, diameter]`` by dense sampling."""
    r = np.linspace(0.0, float(diameter), samples)
    if kernel.family == "tps" or (kernel.family == "imq" and kernel.sigma == 0):
        r = r[1:]
    return float(np.max(np.abs(kernel.eval_d1(r))))


def _diameter(points, centres):
    pts = np.vstack([points, centres])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def regularized_pinv_norm(M, epsilon: float) -> float:
    """Spectral norm of ``(M^T M + eps I)^{-1} M^T``: ``max s / (s^2 + eps)``."""
    s = np.linalg.svd(M, compute_uv=False)
    s = s[s > 0]
    if len(s) == 0:
        return 0.0
    if epsilon == 0 and s.min() <= s.max() * np.finfo(float).eps * max(M.shape):
        raise np.linalg.LinAlgError("singular least-squares matrix without regularization")
    return float(np.max(s / (s * s + epsilon)))


def _model_epsilon(model, epsilon):
    if epsilon is not None:
        return epsilon
    return model.metadata.get("solver", {}).get("epsilon", DEFAULT_EPSILON)


def gradient_stability_bound(model: ScalarPotentialModel, points, noise_norm: float, epsilon=None) -> float:
    """Upper bound on ``|grad u_e(p) - grad u(p)|`` when the vector samples
    at ``points`` are perturbed by noise of Euclidean norm ``noise_norm``.

    ``sqrt(k) * sup|phi'| * ||(G^T G + eps I)^{-1} G^T||_2 * ||e||_2`` with G
    the stacked gradient matrix of the direct fit; ``sup|phi'|`` is taken
    over ``[0, diameter]`` of the points and centres.
    """
    if noise_norm < 0:
        raise ValueError("noise_norm must be >= 0")
    if noise_norm == 0:
        return 0.0
    points = np.atleast_2d(points)
    eps = _model_epsilon(model, epsilon)
    G = gradient_matrix(model.kernel, points, model.centres)
    slope = kernel_slope_sup(model.kernel, _diameter(points, model.centres))
    return float(np.sqrt(model.n_centres) * slope * regularized_pinv_norm(G, eps) * noise_norm)


def rotor_stability_bound(model: VectorPotentialModel, points, noise_norm: float, epsilon=None) -> float:
    """Upper bound on ``|curl w_e(p) - curl w(p)|`` for noise of norm
    ``noise_norm``: ``sqrt(6 k) * sup|phi'| * ||(A^T A + eps I)^{-1} A^T||_2 * ||e||_2``."""
    if noise_norm < 0:
        raise ValueError("noise_norm must be >= 0")
    if noise_norm == 0:
        return 0.0
    points = np.atleast_2d(points)
    eps = _model_epsilon(model, epsilon)
    A = rotor_matrix(model.kernel, points, model.centres)
    slope = kernel_slope_sup(model.kernel, _diameter(points, model.centres))
    return float(np.sqrt(6 * model.n_centres) * slope * regularized_pinv_norm(A, eps) * noise_norm)


# -- noise ------------------------------------------------------------------------


def add_noise(samples: SampleSet, relative_level: float, seed: int = 0) -> SampleSet:
    """Zero-mean Gaussian noise with standard deviation ``relative_level``
    times the per-component RMS of the vector values (and of the scalar
    values, if any)."""
    if relative_level < 0:
        raise ValueError("relative_level must be >= 0")
    if relative_level == 0:
        return samples
    rng = np.random.default_rng(seed)
    v = samples.vector_values
    f = samples.scalar_values
    if len(v):
        rms = np.sqrt(np.mean(v * v, axis=0))
        v = v + rng.normal(size=v.shape) * (relative_level * rms)
    if len(f):
        f = f + rng.normal(size=f.shape) * (relative_level * np.sqrt(np.mean(f * f)))
    return dataclasses.replace(samples, vector_values=v, scalar_values=f, check_coincident=False)
