"""Iterative eigen-solvers used by the chain and Fourier-kernel modules.

Dense ``numpy.linalg.eig`` is deliberately not used here; the test-suite keeps
it as the independent oracle for these routines.
"""

import numpy as np

from .errors import NoConvergence

MAX_ITER = 100_000
TOL = 1e-13


def power_iteration(M, x0=None, tol=TOL, maxiter=MAX_ITER):
    """Dominant eigenpair of ``M`` by normalised power iteration.

    Returns ``(lam, v)`` with ``v`` scaled to unit max-modulus.  Convergence is
    declared once ``||Mv - lam v|| <= tol * |lam|``.
    """
    M = np.asarray(M)
    n = M.shape[0]
    v = np.ones(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    v /= np.max(np.abs(v))
    for _ in range(maxiter):
        w = M @ v
        lam = np.vdot(v, w) / np.vdot(v, v)
        res = np.linalg.norm(w - lam * v) / np.linalg.norm(v)
        scale = np.max(np.abs(w))
        if scale == 0.0:
            return 0.0 + 0.0j, v
        if res <= tol * abs(lam):
            return lam, v
        v = w / scale
    raise NoConvergence(f"power iteration did not reach {tol:g} in {maxiter} steps")


def subspace_eigenvalues(M, k=2, tol=TOL, maxiter=MAX_ITER, seed=0):
    """The ``k`` eigenvalues of largest modulus, by block power iteration.

    A block of ``m = min(n, k + 6)`` vectors is iterated and orthonormalised;
    Rayleigh-Ritz on the block resolves complex-conjugate and negative
    eigenvalues that defeat single-vector power iteration.  Returned in order
    of decreasing modulus.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    k = min(k, n)
    m = min(n, k + 6)
    if m == n:
        # the block spans the whole space: Rayleigh-Ritz is exact in one pass
        ritz = np.linalg.eigvals(M)
        return ritz[np.argsort(-np.abs(ritz), kind="stable")][:k]
    rng = np.random.default_rng(seed)
    X, _ = np.linalg.qr(rng.standard_normal((n, m)) + 0j)
    prev = None
    for _ in range(maxiter):
        Y = M @ X
        H = X.conj().T @ Y
        ritz = np.linalg.eigvals(H)
        ritz = ritz[np.argsort(-np.abs(ritz), kind="stable")][:k]
        if prev is not None:
            scale = max(1.0, abs(ritz[0]))
            if np.max(np.abs(np.abs(ritz) - np.abs(prev))) <= tol * scale:
                return ritz
        prev = ritz
        X, _ = np.linalg.qr(Y)
    raise NoConvergence("subspace iteration did not converge")


def spectral_radius(M, **kwargs):
    return float(abs(subspace_eigenvalues(M, k=1, **kwargs)[0]))
