"""Sparse SPD solves: direct factorization with refinement, or block-Jacobi CG."""
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_LIMIT = 200_000
BACKWARD_EPS = 64 * np.finfo(float).eps


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def block_jacobi(K, block):
    """Inverse of the ``block x block`` diagonal blocks of ``K`` as a LinearOperator."""
    n = K.shape[0]
    if n % block:
        raise ValueError("matrix size is not a multiple of the block size")
    nb = n // block
    idx = np.arange(n).reshape(nb, block)
    D = np.asarray(K[idx[:, :, None], idx[:, None, :]].todense()) if sp.issparse(K) else \
        K[idx[:, :, None], idx[:, None, :]]
    D = D.reshape(nb, block, block)
    Dinv = np.linalg.inv(D)

    def matvec(x):
        return np.einsum('bij,bj->bi', Dinv, x.reshape(nb, block)).reshape(-1)

    return spla.LinearOperator((n, n), matvec=matvec, dtype=float)


def backward_error(K, u, f):
    """Componentwise (Oettli-Prager) backward error ``max |f - K u|_i / (|K| |u| + |f|)_i``."""
    r = np.abs(f - K @ u)
    denom = abs(K) @ np.abs(u) + np.abs(f)
    mask = denom > 0
    if np.any(r[~mask] > 0):
        return np.inf
    return float(np.max(r[mask] / denom[mask], initial=0.0))


def solve_spd(K, f, rtol=1e-11, method='auto', block=1, maxiter=None, refine=3):
    """
    Solve ``K u = f`` for a sparse SPD ``K``.

    ``method='auto'`` factorizes directly below :data:`DIRECT_LIMIT` unknowns
    and otherwise runs conjugate gradients preconditioned by block Jacobi
    (``block`` unknowns per node). Raises :class:`SolverError` if the final
    relative residual exceeds ``rtol``, unless the componentwise backward
    error is already at rounding level (:data:`BACKWARD_EPS`): then the
    solution is as accurate as double precision allows for this matrix and
    only a warning is logged.
    """
    K = sp.csc_matrix(K)
    n = K.shape[0]
    fnorm = np.linalg.norm(f)
    if n == 0 or fnorm == 0.0:
        return np.zeros(n), 0.0
    if method == 'auto':
        method = 'direct' if n < DIRECT_LIMIT else 'cg'
    if method == 'direct':
        lu = spla.splu(K, permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
        u = lu.solve(f)
        for _ in range(refine):
            r = f - K @ u
            if np.linalg.norm(r) <= 1e-3 * rtol * fnorm:
                break
            u = u + lu.solve(r)
    elif method == 'cg':
        M = block_jacobi(K, block)
        maxiter = maxiter or 20 * n
        u, info = spla.cg(K, f, rtol=rtol, atol=0.0, M=M, maxiter=maxiter)
        if info > 0:
            res = np.linalg.norm(f - K @ u) / fnorm
            raise SolverError(f"CG did not converge in {maxiter} iterations "
                              f"(relative residual {res:.3e})", res)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(f - K @ u) / fnorm
    log.debug("solve n=%d method=%s residual=%.3e", n, method, res)
    if np.isfinite(res) and res > rtol and method == 'direct':
        berr = backward_error(K, u, f)
        if berr <= BACKWARD_EPS:
            log.warning("relative residual %.3e above %.1e is at the rounding floor "
                        "(backward error %.1e)", res, rtol, berr)
            return u, res
    if not np.isfinite(res) or res > rtol:
        raise SolverError(f"linear solve failed: relative residual {res:.3e} > {rtol:.1e}", res)
    return u, res
