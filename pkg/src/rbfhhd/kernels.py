"""Generating kernels for radial basis functions and their derivatives.

Each kernel is a 1D function ``phi(r; sigma)`` of the distance ``r`` to a
centre. The induced RBF ``phi_i(p) = phi(||p - c_i||)`` has

* gradient   ``phi'(r) (p - c) / r``
* Hessian    ``phi''(r) eta eta^T + phi'(r)/r (I - eta eta^T)``, ``eta = (p - c)/r``
* Laplacian  ``phi''(r) + (d - 1) phi'(r) / r``

The gradient is continuous at the centre iff ``phi'(0) = 0``; in that case the
Hessian limit at the centre is ``phi''(0) I``.

====================  ======================================  =========  =========
family                phi(r)                                  gradient   Hessian
====================  ======================================  =========  =========
``cubic``             ``sigma r^3``                           yes        yes
``gaussian``          ``exp(-sigma r^2)``                     yes        yes
``tps``               ``r^2 log(sigma r)``                    no         no
``imq``               ``(r^2 + sigma^2)^(-1/2)``              sigma > 0  sigma > 0
``mq``                ``(r^2 + sigma^2)^(1/2)``, sigma != 0   yes        yes
``wendland2``         ``(1 - t)_+^2``                         no         no
``wendland4``         ``(1 - t)_+^4 (4 t + 1)``               yes        yes
====================  ======================================  =========  =========

For the two compactly supported families ``t = r / rho`` where ``rho`` is the
kernel's ``support_radius`` (1 when unset); their ``sigma`` is unused.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import CentreSingularityError, KernelConfigError, UndefinedDerivativeError

FAMILIES = ("cubic", "gaussian", "tps", "imq", "mq", "wendland2", "wendland4")
LOCAL_FAMILIES = frozenset({"wendland2", "wendland4"})

_ALIASES = {
    "thinplatespline": "tps",
    "thin_plate_spline": "tps",
    "inversemultiquadric": "imq",
    "inverse_multiquadric": "imq",
    "multiquadric": "mq",
    "localpoly2": "wendland2",
    "localpoly4": "wendland4",
}


@dataclass(frozen=True)
class DerivativeExistence:
    gradient_exists: bool
    hessian_exists: bool
    condition_note: str = ""


@dataclass(frozen=True)
class Kernel:
    """A generating kernel ``phi(r; sigma)``.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES` (a few long-form aliases are accepted).
    sigma : float
        Shape parameter.
    support_radius : float, optional
        Truncation scale of the compactly supported families.
    """

    family: str
    sigma: float = 1.0
    support_radius: Optional[float] = None

    def __post_init__(self):
        fam = str(self.family).strip().lower()
        fam = _ALIASES.get(fam, fam)
        if fam not in FAMILIES:
            raise KernelConfigError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        sigma = float(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        if not np.isfinite(sigma) or sigma < 0:
            raise KernelConfigError(f"sigma must be finite and >= 0, got {sigma}")
        if fam == "mq" and sigma == 0:
            raise KernelConfigError("multiquadric kernel requires sigma != 0")
        if fam == "tps" and sigma == 0:
            raise KernelConfigError("thin-plate spline requires sigma > 0 (log(sigma r))")
        if self.support_radius is not None:
            rho = float(self.support_radius)
            if not np.isfinite(rho) or rho <= 0:
                raise KernelConfigError(f"support_radius must be > 0, got {rho}")
            object.__setattr__(self, "support_radius", rho)

    # -- configuration -----------------------------------------------------

    @property
    def is_local(self) -> bool:
        return self.family in LOCAL_FAMILIES

    @property
    def rho(self) -> float:
        return self.support_radius if self.support_radius is not None else 1.0

    def existence_flags(self) -> DerivativeExistence:
        return existence_flags(self)

    def with_default_support(self, centres) -> "Kernel":
        """Return a copy with ``support_radius`` set to twice the mean
        nearest-neighbour spacing of ``centres`` (local families only)."""
        if not self.is_local or self.support_radius is not None:
            return self
        return dataclasses.replace(self, support_radius=default_support_radius(centres))

    def to_dict(self) -> dict:
        return {"family": self.family, "sigma": self.sigma, "support_radius": self.support_radius}

    @classmethod
    def from_dict(cls, data: dict) -> "Kernel":
        return cls(data["family"], data.get("sigma", 1.0), data.get("support_radius"))

    def to_record(self) -> str:
        """Text record ``family,sigma[,support_radius]``."""
        fields = [self.family, repr(self.sigma)]
        if self.support_radius is not None:
            fields.append(repr(self.support_radius))
        return ",".join(fields)

    @classmethod
    def from_record(cls, text: str) -> "Kernel":
        parts = [p.strip() for p in text.strip().split(",") if p.strip()]
        if not 1 <= len(parts) <= 3:
            raise KernelConfigError(f"bad kernel record {text!r}")
        try:
            sigma = float(parts[1]) if len(parts) > 1 else 1.0
            rho = float(parts[2]) if len(parts) > 2 else None
        except ValueError as exc:
            raise KernelConfigError(f"bad kernel record {text!r}") from exc
        return cls(parts[0], sigma, rho)

    # -- 1D evaluation -----------------------------------------------------

    def eval(self, r):
        """phi(r)."""
        r, scalar = _as_radius(r)
        f, s = self.family, self.sigma
        if f == "cubic":
            out = s * r**3
        elif f == "gaussian":
            out = np.exp(-s * r * r)
        elif f == "tps":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(r > 0, r * r * np.log(s * r), 0.0)
        elif f == "imq":
            if s == 0 and np.any(r == 0):
                raise CentreSingularityError("inverse multiquadric with sigma=0 is singular at r=0")
            out = 1.0 / np.sqrt(r * r + s * s)
        elif f == "mq":
            out = np.sqrt(r * r + s * s)
        else:
            t = r / self.rho
            c = np.clip(1.0 - t, 0.0, None)
            out = c**2 if f == "wendland2" else c**4 * (4.0 * t + 1.0)
        return _ret(out, scalar)

    def eval_d1(self, r):
        """phi'(r)."""
        r, scalar = _as_radius(r)
        f, s = self.family, self.sigma
        if f == "cubic":
            out = 3.0 * s * r * r
        elif f == "gaussian":
            out = -2.0 * s * r * np.exp(-s * r * r)
        elif f == "tps":
            _reject_zero(r, "thin-plate spline derivative is undefined at r=0")
            out = 2.0 * r * np.log(s * r) + r
        elif f == "imq":
            if s == 0:
                _reject_zero(r, "inverse multiquadric with sigma=0 has no derivative at r=0")
            out = -r * (r * r + s * s) ** -1.5
        elif f == "mq":
            out = r / np.sqrt(r * r + s * s)
        else:
            rho = self.rho
            t = r / rho
            c = np.clip(1.0 - t, 0.0, None)
            out = -2.0 * c / rho if f == "wendland2" else -20.0 * t * c**3 / rho
        return _ret(out, scalar)

    def eval_d2(self, r):
        """phi''(r)."""
        r, scalar = _as_radius(r)
        f, s = self.family, self.sigma
        if f == "cubic":
            out = 6.0 * s * r
        elif f == "gaussian":
            out = -2.0 * s * (1.0 - 2.0 * s * r * r) * np.exp(-s * r * r)
        elif f == "tps":
            _reject_zero(r, "thin-plate spline second derivative is undefined at r=0")
            out = 2.0 * np.log(s * r) + 3.0
        elif f == "imq":
            if s == 0:
                _reject_zero(r, "inverse multiquadric with sigma=0 has no second derivative at r=0")
            q = r * r + s * s
            out = q**-1.5 * (3.0 * r * r / q - 1.0)
        elif f == "mq":
            out = s * s * (r * r + s * s) ** -1.5
        else:
            rho = self.rho
            t = r / rho
            c = np.clip(1.0 - t, 0.0, None)
            if f == "wendland2":
                out = np.where(t < 1.0, 2.0, 0.0) / rho**2
            else:
                out = -20.0 * c**2 * (1.0 - 4.0 * t) / rho**2
        return _ret(out, scalar)

    def d1_over_r(self, r):
        """phi'(r) / r, continued to r = 0 by phi''(0) where phi'(0) = 0."""
        r, scalar = _as_radius(r)
        f, s = self.family, self.sigma
        if f == "cubic":
            out = 3.0 * s * r
        elif f == "gaussian":
            out = -2.0 * s * np.exp(-s * r * r)
        elif f == "imq" and s > 0:
            out = -((r * r + s * s) ** -1.5)
        elif f == "mq":
            out = (r * r + s * s) ** -0.5
        elif f == "wendland4":
            c = np.clip(1.0 - r / self.rho, 0.0, None)
            out = -20.0 * c**3 / self.rho**2
        else:
            _reject_zero(r, f"{f} kernel: RBF gradient is singular at its centre", centre=True)
            out = self.eval_d1(r) / r
        return _ret(out, scalar)


def _as_radius(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("radius must be non-negative")
    return arr, arr.ndim == 0


def _ret(out, scalar):
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out


def _reject_zero(r, message, centre=False):
    if np.any(r == 0):
        raise (CentreSingularityError if centre else UndefinedDerivativeError)(message)


def existence_flags(kernel: Kernel) -> DerivativeExistence:
    """Whether the RBF gradient / Hessian exist everywhere, centres included."""
    f = kernel.family
    if f == "cubic":
        return DerivativeExistence(True, True, "phi'(0)=0 for every sigma")
    if f == "gaussian":
        return DerivativeExistence(True, True)
    if f == "tps":
        return DerivativeExistence(False, False, "phi'' diverges at r=0")
    if f == "imq":
        if kernel.sigma > 0:
            return DerivativeExistence(True, True, "requires sigma != 0")
        return DerivativeExistence(False, False, "requires sigma != 0")
    if f == "mq":
        return DerivativeExistence(True, True, "requires sigma != 0")
    if f == "wendland2":
        return DerivativeExistence(False, False, "phi'(0) = -2/rho != 0: gradient jumps at the centre")
    return DerivativeExistence(True, True)


def default_support_radius(centres) -> float:
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    if len(centres) < 2:
        return 1.0
    dist, _ = cKDTree(centres).query(centres, k=2)
    spacing = float(np.mean(dist[:, 1]))
    return 2.0 * spacing if spacing > 0 else 1.0


# -- RBFs in R^d -------------------------------------------------------------


def pairwise_differences(points, centres):
    """``points[:, None, :] - centres[None, :, :]`` and the distances."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    diff = points[:, None, :] - centres[None, :, :]
    return diff, np.sqrt(np.einsum("nkd,nkd->nk", diff, diff))


def basis_values(kernel: Kernel, points, centres):
    """(n, k) matrix of ``phi_j(p_i)``."""
    _, r = pairwise_differences(points, centres)
    return kernel.eval(r)


def basis_gradients(kernel: Kernel, points, centres):
    """(n, k, d) array of ``grad phi_j(p_i)``.

    Raises CentreSingularityError if a point coincides with a centre and the
    kernel has ``phi'(0) != 0``.
    """
    diff, r = pairwise_differences(points, centres)
    g = _d1_over_r_checked(kernel, r)
    return g[..., None] * diff


def basis_hessians(kernel: Kernel, points, centres):
    """(n, k, d, d) array of RBF Hessians."""
    diff, r = pairwise_differences(points, centres)
    g = _d1_over_r_checked(kernel, r)
    if np.any(r == 0):
        # phi''(0) must exist; eval_d2 raises otherwise
        kernel.eval_d2(0.0)
    pos = r > 0
    safe = np.where(pos, r, 1.0)
    a = np.where(pos, (kernel.eval_d2(r) - g) / (safe * safe), 0.0)
    d = diff.shape[-1]
    # outer product first so H[a, b] and H[b, a] are bitwise equal
    outer = diff[..., :, None] * diff[..., None, :]
    return a[..., None, None] * outer + g[..., None, None] * np.eye(d)


def basis_laplacians(kernel: Kernel, points, centres):
    """(n, k) matrix of ``Laplacian phi_j(p_i)``."""
    diff, r = pairwise_differences(points, centres)
    d = diff.shape[-1]
    g = _d1_over_r_checked(kernel, r)
    return kernel.eval_d2(r) + (d - 1) * g


def _d1_over_r_checked(kernel, r):
    if np.any(r == 0) and not existence_flags(kernel).gradient_exists:
        raise CentreSingularityError(
            f"{kernel.family} kernel: RBF derivative evaluated at its own centre"
        )
    return kernel.d1_over_r(r)


def rbf_gradient(kernel: Kernel, centre, p):
    """Gradient of the RBF centred at ``centre``, evaluated at ``p``."""
    return basis_gradients(kernel, np.atleast_2d(p), np.atleast_2d(centre))[0, 0]


def rbf_hessian(kernel: Kernel, centre, p):
    return basis_hessians(kernel, np.atleast_2d(p), np.atleast_2d(centre))[0, 0]


def rbf_laplacian(kernel: Kernel, centre, p):
    return float(basis_laplacians(kernel, np.atleast_2d(p), np.atleast_2d(centre))[0, 0])
