"""Dense least-squares solves shared by the fitting and decomposition code."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import cg

from .errors import IllConditionedError

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-10
CG_THRESHOLD = 2000
_RCOND_FLOOR = 10 * np.finfo(float).eps


@dataclass
class SolveInfo:
    method: str
    epsilon: float
    iterations: int = 0
    condition: Optional[float] = None
    residual_norm: Optional[float] = None
    auto_regularized: bool = False

    def as_dict(self):
        return asdict(self)


def solve_spd(N, rhs, epsilon=DEFAULT_EPSILON, auto_regularize=False, cg_threshold=CG_THRESHOLD):
    """Solve ``(N + epsilon I) x = rhs`` for symmetric positive semi-definite N.

    Cholesky for ``k <= cg_threshold``, conjugate gradient above. With
    ``epsilon == 0`` a numerically singular N raises IllConditionedError,
    unless ``auto_regularize`` is set, in which case DEFAULT_EPSILON is added.
    """
    N = np.asarray(N, float)
    rhs = np.asarray(rhs, float)
    k = N.shape[0]
    if k == 0:
        return np.zeros(rhs.shape), SolveInfo("empty", epsilon)
    A = N + epsilon * np.eye(k) if epsilon else N
    if k > cg_threshold:
        return _solve_cg(A, rhs, epsilon)
    anorm = np.linalg.norm(A, 1)
    try:
        c, low = sla.cho_factor(A, lower=False, check_finite=False)
        rcond, _ = sla.lapack.dpocon(c, anorm)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        c, rcond = None, 0.0
    condition = 1.0 / rcond if rcond > 0 else np.inf
    if c is None or rcond < _RCOND_FLOOR:
        if auto_regularize and epsilon < DEFAULT_EPSILON:
            logger.info("singular normal matrix (cond %.3e); adding %g I", condition, DEFAULT_EPSILON)
            x, info = solve_spd(N, rhs, DEFAULT_EPSILON, auto_regularize=False, cg_threshold=cg_threshold)
            info.auto_regularized = True
            return x, info
        if epsilon == 0:
            raise IllConditionedError("normal equations are numerically singular", condition)
        if c is None:
            x = sla.lstsq(A, rhs, lapack_driver="gelsd", check_finite=False)[0]
            return x, SolveInfo("lstsq", epsilon, condition=float(condition))
    x = sla.cho_solve((c, low), rhs, check_finite=False)
    return x, SolveInfo("cholesky", epsilon, condition=float(condition))


def _solve_cg(A, rhs, epsilon):
    cols = rhs.reshape(len(rhs), -1)
    out = np.empty_like(cols)
    iters = 0
    for j in range(cols.shape[1]):
        count = [0]

        def _cb(_):
            count[0] += 1

        x, flag = cg(A, cols[:, j], rtol=1e-10, atol=0.0, maxiter=max(1000, 5 * len(A)), callback=_cb)
        if flag > 0:
            logger.warning("conjugate gradient stopped after %d iterations without converging", flag)
        out[:, j] = x
        iters = max(iters, count[0])
    return out.reshape(rhs.shape), SolveInfo("cg", epsilon, iterations=iters)


def solve_normal_equations(M, b, epsilon=DEFAULT_EPSILON, auto_regularize=False, cg_threshold=CG_THRESHOLD):
    """Least-squares solution of ``M x ~ b`` satisfying ``(M^T M + eps I) x = M^T b``.

    Up to ``cg_threshold`` unknowns the system is not formed explicitly: the
    stacked problem ``[M; sqrt(eps) I] x ~ [b; 0]`` has the same minimiser and
    is solved by a QR factorization, which keeps the conditioning of M instead
    of squaring it. Above the threshold conjugate gradient runs on the normal
    equations.
    """
    M = np.asarray(M, float)
    b = np.asarray(b, float)
    k = M.shape[1]
    if k > cg_threshold:
        x, info = solve_spd(M.T @ M, M.T @ b, epsilon, auto_regularize, cg_threshold)
    else:
        x, info = _solve_qr(M, b, epsilon, auto_regularize)
    info.residual_norm = float(np.linalg.norm(M @ x - b))
    return x, info


def _solve_qr(M, b, epsilon, auto_regularize):
    k = M.shape[1]
    if k == 0:
        return np.zeros((0,) + b.shape[1:]), SolveInfo("empty", epsilon)
    if epsilon:
        A = np.vstack([M, np.sqrt(epsilon) * np.eye(k)])
        rhs = np.concatenate([b, np.zeros((k,) + b.shape[1:])])
    else:
        A, rhs = M, b
    if A.shape[0] < k:
        rcond = 0.0
    else:
        q, r = sla.qr(A, mode="economic", check_finite=False)
        rcond, _ = sla.lapack.dtrcon(r, norm="1", uplo="U", diag="N")
    condition = 1.0 / rcond if rcond > 0 else np.inf
    if epsilon == 0 and rcond < _RCOND_FLOOR:
        if auto_regularize:
            logger.info("rank-deficient system (cond %.3e); adding %g I", condition, DEFAULT_EPSILON)
            x, info = _solve_qr(M, b, DEFAULT_EPSILON, False)
            info.auto_regularized = True
            return x, info
        raise IllConditionedError("least-squares system is numerically singular", condition)
    x = sla.solve_triangular(r, q.T @ rhs, check_finite=False)
    return x, SolveInfo("qr", epsilon, condition=float(condition))


def solve_square(A, b, epsilon=DEFAULT_EPSILON, symmetric_pd=False):
    """Solve the square system ``(A + eps I) x = b``."""
    A = np.asarray(A, float)
    k = A.shape[0]
    A = A + epsilon * np.eye(k) if epsilon else A
    anorm = np.linalg.norm(A, 1)
    if symmetric_pd:
        try:
            c, low = sla.cho_factor(A, check_finite=False)
            rcond, _ = sla.lapack.dpocon(c, anorm)
            x = sla.cho_solve((c, low), b, check_finite=False)
            return x, SolveInfo("cholesky", epsilon, condition=float(1 / rcond) if rcond > 0 else np.inf)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            pass
    lu, piv = sla.lu_factor(A, check_finite=False)
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if rcond < _RCOND_FLOOR:
        raise IllConditionedError("square system is numerically singular", 1 / rcond if rcond > 0 else np.inf)
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    return x, SolveInfo("lu", epsilon, condition=float(1 / rcond))
