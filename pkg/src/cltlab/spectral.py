"""Fourier kernels ``Q(t)`` and their dominant spectral data.

For ``t`` near zero the kernel splits as ``Q(t)^n = lambda(t)^n v(t) phi(t)^T
+ N(t)^n``; this module computes that split by power iteration, checks it
against a resolvent contour integral, and measures the perturbation constants
around ``t = 0``.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import power_iteration, spectral_radius, subspace_eigenvalues
from .chain import _as_values, stationary_distribution, subdominant_modulus
from .errors import (
    AuditFailed,
    DegenerateVariance,
    EmptyGrid,
    NoConvergence,
    NoSpectralGap,
    RankNotOne,
    SingularResolvent,
)
from .poisson import sigma_squared

GAP_RATIO_MAX = 1.0 - 1e-6


@dataclass(frozen=True, eq=False)
class FourierKernel:
    t: float
    M: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralData:
    t: float
    lam: complex
    v: np.ndarray
    phi: np.ndarray
    N: np.ndarray
    rho: float
    gap_ratio: float
    M: np.ndarray

    def decomposition_residual(self, n_max=20):
        """Max entrywise gap between ``Q(t)^n`` and
        ``lam^n v phi^T + N^n`` over ``1 <= n <= n_max``."""
        proj = np.outer(self.v, self.phi)
        Mn = np.eye(len(self.v), dtype=complex)
        Nn = np.eye(len(self.v), dtype=complex)
        worst = 0.0
        for n in range(1, n_max + 1):
            Mn = self.M @ Mn
            Nn = self.N @ Nn
            worst = max(worst, float(np.max(np.abs(Mn - self.lam**n * proj - Nn))))
        return worst

    def normalization_residuals(self, nu):
        """``(|<phi,v> - 1|, |<nu,v> - 1|, ||phi N||, ||N v||)``."""
        return (
            abs(self.phi @ self.v - 1.0),
            abs(nu @ self.v - 1.0),
            float(np.linalg.norm(self.phi @ self.N)),
            float(np.linalg.norm(self.N @ self.v)),
        )


def build_kernel(chain, xi, t) -> FourierKernel:
    xi = _as_values(xi)
    if t == 0:
        return FourierKernel(0.0, chain.P.astype(complex))
    return FourierKernel(float(t), chain.P * np.exp(1j * t * xi)[None, :])


def spectral_decompose(chain, xi, t, nu=None) -> SpectralData:
    """Dominant eigentriple of ``Q(t)`` and the remainder ``N(t)``.

    ``lambda`` and ``v`` come from power iteration, ``phi`` from power
    iteration on the transpose; the eigenvalue is then recomputed as the
    two-sided quotient ``phi M v / phi v``, whose error is quadratic in the
    two residuals.  Normalised so ``<nu, v> = 1`` and ``<phi, v> = 1``.
    """
    if nu is None:
        nu = stationary_distribution(chain).weights
    M = build_kernel(chain, xi, t).M
    top = subspace_eigenvalues(M, k=2)
    if abs(top[0]) == 0.0:
        raise NoSpectralGap(f"Q({t}) is nilpotent")
    ratio = abs(top[1]) / abs(top[0]) if len(top) > 1 else 0.0
    if ratio > GAP_RATIO_MAX:
        raise NoSpectralGap(f"modulus ratio {ratio:.12f} at t={t}")
    try:
        _, v = power_iteration(M)
        _, phi = power_iteration(M.T, nu.astype(complex))
    except NoConvergence as exc:
        raise NoConvergence(f"t={t}: {exc}") from None
    lam = (phi @ M @ v) / (phi @ v)
    nv = nu @ v
    if abs(nv) < 1e-12:
        raise NoSpectralGap(f"<nu, v(t)> vanishes at t={t}")
    v = v / nv
    phi = phi / (phi @ v)
    N = M - lam * np.outer(v, phi)
    rho = spectral_radius(N)
    return SpectralData(
        t=float(t), lam=complex(lam), v=v, phi=phi, N=N, rho=rho, gap_ratio=ratio, M=M
    )


def certified_interval(chain, xi, t_grid):
    """Largest ``T`` such that every grid point with ``|t| <= T`` keeps the
    dominant/sub-dominant modulus ratio at most ``1 - 1e-6``."""
    ts = np.sort(np.unique(np.abs(np.asarray(t_grid, dtype=float))))
    T = 0.0
    for t in ts:
        M = build_kernel(chain, xi, t).M
        top = subspace_eigenvalues(M, k=2)
        if abs(top[0]) == 0.0 or abs(top[1]) / abs(top[0]) > GAP_RATIO_MAX:
            break
        T = float(t)
    return T


def default_circles(chain, nu=None):
    """Default contours ``(center, radius)`` from the unperturbed spectrum:
    one small circle around 1 and one around 0 enclosing the rest."""
    k0 = subdominant_modulus(chain, nu)
    gamma1 = (1.0 + 0.0j, (1.0 - k0) / 2.0)
    gamma0 = (0.0 + 0.0j, (1.0 + k0) / 2.0)
    return gamma1, gamma0


def resolvent_contour(M, center, radius, quad_points=128, power=0):
    """Trapezoid rule for ``(1/2 pi i) int z^power (z - M)^{-1} dz`` on a circle."""
    if quad_points < 64:
        raise ValueError("quad_points must be >= 64")
    n = M.shape[0]
    theta = 2.0 * np.pi * np.arange(quad_points) / quad_points
    eye = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for th in theta:
        e = np.exp(1j * th)
        z = center + radius * e
        A = z * eye - M
        if np.linalg.svd(A, compute_uv=False)[-1] < 1e-8:
            raise SingularResolvent(f"node z={z} is within 1e-8 of the spectrum")
        acc += (z**power) * radius * e * np.linalg.inv(A)
    return acc / quad_points


def contour_projector(chain, xi, t, center=None, radius=None, quad_points=128):
    """Spectral projector onto the eigenvalue enclosed by the circle."""
    M = build_kernel(chain, xi, t).M
    if center is None or radius is None:
        (c1, r1), _ = default_circles(chain)
        center = c1 if center is None else center
        radius = r1 if radius is None else radius
    Pi = resolvent_contour(M, center, radius, quad_points)
    sv = np.linalg.svd(Pi, compute_uv=False)
    if len(sv) > 1 and sv[1] > 1e-6:
        raise RankNotOne(f"second singular value {sv[1]:.3e}")
    return Pi


def resolvent_difference_bound(chain, xi, t_grid, circles=None, weight="sup", quad_points=64):
    """Empirical constant in ``nu(|(z-Q(t))^{-1} f - (z-Q)^{-1} f|) <= C |t| ||f||``.

    Maximised over the grid, the quadrature nodes of each circle and the
    unit-norm coordinate probes ``f = W_y e_y``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise EmptyGrid("empty t grid")
    nu = stationary_distribution(chain).weights
    if circles is None:
        circles = default_circles(chain, nu)
    w = chain.weight(weight)
    n = chain.n_states
    eye = np.eye(n)
    worst = 0.0
    for center, radius in circles:
        for th in 2.0 * np.pi * np.arange(quad_points) / quad_points:
            z = center + radius * np.exp(1j * th)
            A0 = z * eye - chain.P
            if np.linalg.svd(A0, compute_uv=False)[-1] < 1e-8:
                raise SingularResolvent(f"z={z} hits the spectrum of Q")
            R0 = np.linalg.inv(A0)
            for t in t_grid:
                if t == 0:
                    continue
                At = z * eye - build_kernel(chain, xi, t).M
                if np.linalg.svd(At, compute_uv=False)[-1] < 1e-8:
                    raise SingularResolvent(f"z={z} hits the spectrum of Q({t})")
                D = np.abs(np.linalg.inv(At) - R0)
                val = float(np.max((nu @ D) * w)) / abs(t)
                worst = max(worst, val)
    return worst


def lambda_expansion_check(chain, xi, u_grid, sigma2=None):
    """Fit of ``r(u) = |lambda(u) - 1 + sigma^2 u^2 / 2|`` against ``|u|``.

    Returns ``(slope, max_residual)``: the least-squares slope of ``log r``
    against ``log |u|`` and the largest ``r(u)`` on the grid.
    """
    if sigma2 is None:
        sigma2 = sigma_squared(chain, xi)
    if sigma2 <= 1e-14:
        raise DegenerateVariance("sigma^2 = 0")
    u = np.asarray(u_grid, dtype=float)
    nu = stationary_distribution(chain).weights
    lam = np.array([spectral_decompose(chain, xi, ui, nu).lam for ui in u])
    r = np.abs(lam - 1.0 + 0.5 * sigma2 * u**2)
    slope = np.polyfit(np.log(np.abs(u)), np.log(r), 1)[0]
    return float(slope), float(r.max())


def perturbation_bounds(chain, xi, t_grid, n_max=20):
    """Empirical constants of the three perturbation bounds with exponent 1:
    ``<nu,|v(t)-1|>/|t|``, ``|<phi(t),1> - 1|/|t|`` and
    ``max_n <nu,|N(t)^n 1|> / (rho^n |t|)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid == 0):
        raise ValueError("t_grid must exclude 0")
    nu = stationary_distribution(chain).weights
    b1 = b2 = b3 = 0.0
    for t in t_grid:
        sd = spectral_decompose(chain, xi, t, nu)
        b1 = max(b1, float(nu @ np.abs(sd.v - 1.0)) / abs(float(t)))
        b2 = max(b2, float(abs(sd.phi.sum() - 1.0)) / abs(float(t)))
        b3 = max(b3, _b3_ratio(sd, nu, n_max))
    return b1, b2, b3


def _b3_ratio(sd, nu, n_max):
    g = np.ones(len(nu), dtype=complex)
    worst = 0.0
    for n in range(1, n_max + 1):
        g = sd.N @ g
        num = float(nu @ np.abs(g))
        den = sd.rho**n * abs(sd.t)
        if num <= 1e-15:
            continue
        if den == 0.0:
            return float("inf")
        worst = max(worst, num / den)
    return worst


def lambda_lipschitz(chain, xi, t_grid):
    """Continuity check of ``t -> lambda(t)`` on a sorted grid.

    Returns ``(L, jump_free)`` where ``L`` is the largest difference quotient
    and ``jump_free`` is False if some quotient exceeds 10 times the median.
    """
    ts = np.sort(np.asarray(t_grid, dtype=float))
    nu = stationary_distribution(chain).weights
    lam = np.array([spectral_decompose(chain, xi, t, nu).lam for t in ts])
    q = np.abs(np.diff(lam)) / np.diff(ts)
    if q.size == 0:
        return 0.0, True
    med = float(np.median(q))
    return float(q.max()), bool(np.all(q <= 10.0 * max(med, 1e-300)) or med == 0.0)


@dataclass(frozen=True)
class DoeblinFortet:
    kappa_hat: float
    C_hat: float
    drift_ratio: float
    max_modulus: float


def drift_ratios(chain, weight):
    w = chain.weight(weight)
    return (chain.P @ w) / w


def doeblin_fortet_audit(chain, xi, weight="sup", t_grid=(0.0,), n_max=30, n_random=100, seed=0):
    """Fit ``||Q(t)^n f|| <= C kappa^n ||f|| + C nu(|f|)`` in the weighted
    sup norm.

    ``kappa_hat`` is the largest sub-dominant modulus over the grid (``t = 0``
    is always included); any smaller rate would leave the non-dominant part
    unbounded in ``n``.  ``C_hat`` is then the smallest constant making the
    inequality hold on all probes, ``t`` and ``n <= n_max``.  Probes are the
    coordinate functions rescaled by ``W`` plus ``n_random`` seeded random
    unit vectors.  Raises :class:`AuditFailed` when ``Q(t)`` loses its
    spectral gap somewhere on the grid.
    """
    w = chain.weight(weight)
    if np.any(w < 1.0):
        raise ValueError("weight must be >= 1")
    nu = stationary_distribution(chain).weights
    ts = np.unique(np.concatenate([[0.0], np.asarray(t_grid, dtype=float)]))
    n = chain.n_states
    rng = np.random.default_rng(seed)
    rand = rng.uniform(-1.0, 1.0, (n, n_random)) + 1j * rng.uniform(-1.0, 1.0, (n, n_random))
    rand /= np.max(np.abs(rand) / w[:, None], axis=0)
    probes = np.concatenate([np.diag(w).astype(complex), rand], axis=1)
    weak = nu @ np.abs(probes)

    kappa_hat = 0.0
    for t in ts:
        try:
            sd = spectral_decompose(chain, xi, t, nu)
        except (NoSpectralGap, NoConvergence) as exc:
            raise AuditFailed(f"no spectral gap at t={t}: {exc}", witness={"t": float(t)}) from None
        kappa_hat = max(kappa_hat, sd.rho)
    if kappa_hat >= 1.0 - 1e-9:
        raise AuditFailed(f"kappa_hat = {kappa_hat} is not < 1", witness={"kappa": kappa_hat})

    C_hat = 0.0
    max_mod = 0.0
    witness = None
    for t in ts:
        M = build_kernel(chain, xi, t).M
        G = probes.copy()
        for k in range(1, n_max + 1):
            G = M @ G
            strong = np.max(np.abs(G) / w[:, None], axis=0)
            max_mod = max(max_mod, float(strong.max()))
            need = strong / (kappa_hat**k + weak)
            j = int(np.argmax(need))
            if need[j] > C_hat:
                C_hat = float(need[j])
                witness = {"t": float(t), "n": k, "probe": j}
    if not np.isfinite(C_hat):
        raise AuditFailed("no finite constant fits", witness=witness)
    return DoeblinFortet(
        kappa_hat=float(kappa_hat),
        C_hat=C_hat,
        drift_ratio=float(drift_ratios(chain, weight).max()),
        max_modulus=max_mod,
    )
