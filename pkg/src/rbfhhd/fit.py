"""Least-squares meshless potentials from mixed scalar/vector samples.

The potential ``u = sum_k alpha_k phi_k`` minimises

    E(alpha) = sum_{i in I} |u(p_i) - f_i|^2 + delta * sum_{j in J} ||grad u(p_j) - v_j||^2

over the scalar constraints I and the vector constraints J.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import DEFAULT_EPSILON, solve_normal_equations, solve_square
from .errors import ConfigurationError, SampleError
from .kernels import Kernel, basis_gradients, basis_values, existence_flags
from .model import SampleSet, ScalarPotentialModel

RANGE_RATIO_WARNING = 1e3


@dataclass(frozen=True)
class FitConfig:
    """Kernel, centres and weights for a least-squares fit.

    ``centres=None`` places one centre at each constrained point. With
    ``normalize`` the vector weight is multiplied by ``(rms f / rms v)^2`` so
    the two energy terms have comparable magnitude.
    """

    kernel: Kernel
    centres: Optional[np.ndarray] = None
    delta: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    normalize: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be > 0, got {self.delta}")
        if not self.epsilon >= 0:
            raise ConfigurationError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass
class ResidualReport:
    scalar_index: np.ndarray
    scalar_residuals: np.ndarray
    vector_index: np.ndarray
    vector_residuals: np.ndarray
    delta: float
    energy: float

    def rows(self):
        """``(constraint index, type, residual)`` rows; vector residuals as norms."""
        out = [(int(i), "scalar", float(r)) for i, r in zip(self.scalar_index, self.scalar_residuals)]
        norms = np.linalg.norm(self.vector_residuals, axis=1) if len(self.vector_residuals) else []
        out += [(int(i), "vector", float(r)) for i, r in zip(self.vector_index, norms)]
        return out


def resolve_centres(samples: SampleSet, centres, kernel: Kernel, default_index=None):
    if centres is None:
        idx = samples.constrained_index if default_index is None else default_index
        centres = samples.points[idx]
    centres = np.atleast_2d(np.asarray(centres, float))
    if centres.shape[1] != samples.dimension:
        raise ConfigurationError("centre dimension does not match the samples")
    return centres, kernel.with_default_support(centres)


def assemble_mixed_system(samples: SampleSet, kernel: Kernel, centres, delta: float = 1.0):
    """Stacked matrix ``[Phi~; sqrt(delta) Phi_x; sqrt(delta) Phi_y; ...]`` and
    right-hand side ``[f; sqrt(delta) v_x; ...]``."""
    blocks, rhs = [], []
    if len(samples.scalar_index):
        blocks.append(basis_values(kernel, samples.scalar_points, centres))
        rhs.append(samples.scalar_values)
    if len(samples.vector_index):
        g = basis_gradients(kernel, samples.vector_points, centres)
        w = np.sqrt(delta)
        for a in range(samples.dimension):
            blocks.append(w * g[:, :, a])
            rhs.append(w * samples.vector_values[:, a])
    return np.vstack(blocks), np.concatenate(rhs)


def _effective_delta(samples: SampleSet, config: FitConfig) -> float:
    delta = config.delta
    if not (len(samples.scalar_index) and len(samples.vector_index)):
        return delta
    f_rms = np.sqrt(np.mean(samples.scalar_values**2))
    v_rms = np.sqrt(np.mean(samples.vector_values**2))
    if config.normalize:
        if f_rms > 0 and v_rms > 0:
            delta *= (f_rms / v_rms) ** 2
        return delta
    f_range = np.ptp(samples.scalar_values)
    v_range = np.ptp(samples.vector_values)
    lo, hi = sorted((f_range, v_range))
    if lo > 0 and hi / lo > RANGE_RATIO_WARNING:
        warnings.warn(
            f"scalar and vector value ranges differ by a factor {hi / lo:.1e}; "
            "consider normalizing or adjusting delta",
            RuntimeWarning,
            stacklevel=3,
        )
    return delta


def fit_mixed(samples: SampleSet, config: FitConfig) -> ScalarPotentialModel:
    """Least-squares potential matching scalar values and gradient vectors."""
    if len(samples.scalar_index) == 0 and len(samples.vector_index) == 0:
        raise SampleError("no constraints to fit")
    if len(samples.vector_index) and not existence_flags(config.kernel).gradient_exists:
        raise ConfigurationError(
            f"{config.kernel.family} kernel has no RBF gradient at its centres; "
            "it cannot fit vector constraints"
        )
    centres, kernel = resolve_centres(samples, config.centres, config.kernel)
    delta = _effective_delta(samples, config)
    M, b = assemble_mixed_system(samples, kernel, centres, delta)
    alpha, info = solve_normal_equations(M, b, config.epsilon)
    meta = {"solver": info.as_dict(), "delta": delta}
    return ScalarPotentialModel(kernel, centres, alpha, metadata=meta)


def fit_componentwise(samples: SampleSet, config: FitConfig):
    """One scalar model per vector component, fitted to the vector samples.

    When the centres are the vector sample points the Gram system
    ``(Phi + eps I) alpha = v_j`` is solved directly (interpolation);
    otherwise in the least-squares sense.
    """
    if len(samples.vector_index) == 0:
        raise SampleError("componentwise fit needs vector constraints")
    pts = samples.vector_points
    centres, kernel = resolve_centres(samples, config.centres, config.kernel, samples.vector_index)
    Phi = basis_values(kernel, pts, centres)
    V = samples.vector_values
    if Phi.shape[0] == Phi.shape[1] and np.array_equal(centres, pts):
        pd = kernel.family in ("gaussian", "imq", "wendland2", "wendland4")
        coeffs, info = solve_square(Phi, V, config.epsilon, symmetric_pd=pd)
    else:
        coeffs, info = solve_normal_equations(Phi, V, config.epsilon)
    meta = {"solver": info.as_dict()}
    return [ScalarPotentialModel(kernel, centres, coeffs[:, j], metadata=dict(meta))
            for j in range(samples.dimension)]


def residual_report(model: ScalarPotentialModel, samples: SampleSet, delta: float = 1.0) -> ResidualReport:
    """Per-constraint residuals and the weighted least-squares energy."""
    if len(samples.scalar_index):
        sres = model.potential(samples.scalar_points) - samples.scalar_values
    else:
        sres = np.zeros(0)
    if len(samples.vector_index):
        vres = model.gradient(samples.vector_points) - samples.vector_values
    else:
        vres = np.zeros((0, samples.dimension))
    energy = float(np.sum(sres**2) + delta * np.sum(vres**2))
    return ResidualReport(samples.scalar_index.copy(), sres, samples.vector_index.copy(), vres, delta, energy)


def with_centres(config: FitConfig, centres) -> FitConfig:
    return dataclasses.replace(config, centres=np.asarray(centres, float))
