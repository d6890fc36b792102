"""Critical points of a meshless potential.

Stationary points solve ``grad u(p) = 0``. Each guess runs a dogleg
trust-region iteration on ``1/2 ||grad u||^2`` with the analytic Hessian as
Jacobian; converged points are merged and classified by the signs of the
Hessian eigenvalues.

Trust-region constants: initial radius 1, contraction 0.25 when the
agreement ratio is below 0.25, expansion 2 when it is above 0.75 and the
step hit the boundary, steps accepted for ratio above 0.1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UndefinedDerivativeError
from .fields import regular_grid
from .model import ScalarPotentialModel, VectorPotentialModel

INITIAL_RADIUS = 1.0
SHRINK, GROW = 0.25, 2.0
ACCEPT = 0.1
DEDUP_DISTANCE = 1e-6
DEGENERACY = 1e-8
GUESSES_PER_AXIS = 5


@dataclass
class CriticalPoint:
    """Outcome of one trust-region run.

    ``trace`` holds ``(iteration, evaluations, ||grad u||)`` after every
    accepted step, starting with the initial guess.
    """

    location: np.ndarray
    gradient_norm: float
    classification: str
    eigenvalues: np.ndarray
    iterations: int
    path: list = field(default_factory=list)
    converged: bool = False
    trace: list = field(default_factory=list)
    flag: str = ""


def classify(eigenvalues, tol: float = DEGENERACY) -> str:
    """``minimum``, ``maximum``, ``saddle`` or ``degenerate``."""
    lam = np.asarray(eigenvalues, float)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if scale == 0 or np.any(np.abs(lam) < tol * scale):
        return "degenerate"
    if np.all(lam > 0):
        return "minimum"
    if np.all(lam < 0):
        return "maximum"
    return "saddle"


def _dogleg(g, H, radius):
    """Dogleg step for the Gauss-Newton model ``1/2 ||g + H s||^2``."""
    descent = H @ g
    try:
        newton = -np.linalg.solve(H, g)
        if not np.all(np.isfinite(newton)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        newton = None
    if newton is not None and np.linalg.norm(newton) <= radius:
        return newton
    hd = H @ descent
    dd = float(descent @ descent)
    if dd == 0:
        return np.zeros_like(g) if newton is None else newton * (radius / np.linalg.norm(newton))
    cauchy = -(dd / float(hd @ hd)) * descent
    nc = np.linalg.norm(cauchy)
    if newton is None or nc >= radius:
        return cauchy * (radius / nc)
    # walk from the Cauchy point towards the Newton point up to the boundary
    diff = newton - cauchy
    a = diff @ diff
    b = 2 * cauchy @ diff
    c = cauchy @ cauchy - radius * radius
    tau = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return cauchy + tau * diff


def _trust_region(model, start, tol, max_iter, lo, hi):
    p = np.array(start, float)
    g = model.gradient(p)
    evals = 1
    gn = float(np.linalg.norm(g))
    path = [p.copy()]
    trace = [(0, evals, gn)]
    radius = INITIAL_RADIUS
    it = 0
    flag = ""
    while gn > tol and it < max_iter:
        it += 1
        try:
            H = model.hessian(p)
        except UndefinedDerivativeError:
            flag = "centre-singularity"
            break
        s = _dogleg(g, H, radius)
        sn = float(np.linalg.norm(s))
        if sn == 0:
            break
        trial = p + s
        g_new = model.gradient(trial)
        evals += 1
        predicted = gn * gn - float(np.sum((g + H @ s) ** 2))
        actual = gn * gn - float(g_new @ g_new)
        rho = actual / predicted if predicted > 0 else (1.0 if actual > 0 else -1.0)
        if rho < 0.25:
            radius *= SHRINK
        elif rho > 0.75 and sn >= 0.99 * radius:
            radius *= GROW
        if rho > ACCEPT:
            p, g = trial, g_new
            gn = float(np.linalg.norm(g))
            path.append(p.copy())
            trace.append((it, evals, gn))
            if lo is not None and (np.any(p < lo) or np.any(p > hi)):
                flag = "left-domain"
                break
        if radius < 1e-15 * max(1.0, float(np.linalg.norm(p))):
            break
    return p, gn, it, path, trace, flag


def default_guesses(model: ScalarPotentialModel, per_axis: int = GUESSES_PER_AXIS, box=None):
    """Cell centres of a ``per_axis^d`` grid over ``box``."""
    lo, hi = box if box is not None else (model.centres.min(axis=0), model.centres.max(axis=0))
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    h = (hi - lo) / per_axis
    return regular_grid(lo + h / 2, hi - h / 2, per_axis)


def find_critical_points(model: ScalarPotentialModel, guesses=None, tol: float = 1e-12, max_iter: int = 100,
                         box: Optional[tuple] = None, dedupe: bool = True):
    """Run the trust-region solver from every guess.

    Parameters
    ----------
    model : ScalarPotentialModel
    guesses : array_like, optional
        Starting points; defaults to the cell centres of a ``5^d`` grid over ``box``.
    tol : float
        Convergence threshold on ``||grad u||``.
    max_iter : int
    box : (lo, hi), optional
        Search domain. Iterates may cross the box by up to 10% of its
        extent; a run that leaves the padded box, or ends outside the box
        itself, is reported unconverged with flag ``left-domain``. Defaults
        to the bounding box of the centres.
    dedupe : bool
        Merge converged points closer than 1e-6, keeping the smallest
        gradient norm.

    Returns
    -------
    list of CriticalPoint
        Merged converged points followed by every unconverged run.
    """
    if box is None:
        box = (model.centres.min(axis=0), model.centres.max(axis=0))
    lo, hi = (np.asarray(b, float) for b in box)
    pad = 0.1 * (hi - lo)
    if guesses is None:
        guesses = default_guesses(model, box=(lo, hi))
    guesses = np.atleast_2d(np.asarray(guesses, float))
    found, failed = [], []
    for start in guesses:
        p, gn, it, path, trace, flag = _trust_region(model, start, tol, max_iter, lo - pad, hi + pad)
        if not flag and (np.any(p < lo) or np.any(p > hi)):
            # a stationary point in the padding is an extrapolation artefact
            flag = "left-domain"
        converged = gn <= tol and not flag
        eig = np.full(model.dimension, np.nan)
        kind = "unknown"
        if flag != "centre-singularity":
            try:
                eig = np.linalg.eigvalsh(model.hessian(p))
                kind = classify(eig)
            except UndefinedDerivativeError:
                flag = "centre-singularity"
        cp = CriticalPoint(p, gn, kind, eig, it, path, converged, trace, flag)
        (found if converged else failed).append(cp)
    if dedupe:
        found = _merge(found)
    return found + failed


def _merge(points):
    kept = []
    for cp in sorted(points, key=lambda c: c.gradient_norm):
        if all(np.linalg.norm(cp.location - k.location) >= DEDUP_DISTANCE for k in kept):
            kept.append(cp)
    return kept


def solenoidal_jacobian_eigenvalues(model: VectorPotentialModel, points):
    """Eigenvalues of the Jacobian of ``curl w`` at ``points``, without
    any classification."""
    return np.linalg.eigvals(model.curl_jacobian(np.atleast_2d(points)))
