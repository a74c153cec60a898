"""Poisson solution, asymptotic variance and the conditional-variance
correction ``psi``, with the H2/H3 audits built on them."""

from dataclasses import dataclass

import numpy as np

from .chain import (
    _as_values,
    check_centered,
    ergodicity_profile,
    stationary_distribution,
)
from .errors import DimensionMismatch, EmptyGrid, IdentityViolated, NoConvergence, NotCentered

SERIES_TOL = 1e-10
H2_TAIL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CltDiagnostics:
    xi_breve: np.ndarray
    q_xi_breve: np.ndarray
    sigma2: float
    psi: np.ndarray
    psi_breve: np.ndarray
    h2_value: float
    series_terms_used: int
    nu: np.ndarray


def _fundamental_solve(chain, nu, rhs):
    n = chain.n_states
    Z = np.eye(n) - chain.P + np.outer(np.ones(n), nu)
    return np.linalg.solve(Z, rhs)


def _series_length(profile, f_sup, tol):
    """Smallest N with ``C kappa0^N ||f|| / (1 - kappa0) <= tol``."""
    k, C = profile.kappa0, max(profile.C, 1.0)
    if f_sup == 0.0 or k == 0.0:
        return 1
    target = tol * (1.0 - k) / (C * f_sup)
    if target >= 1.0:
        return 1
    return int(np.ceil(np.log(target) / np.log(k)))


def solve_poisson(chain, xi, check=True):
    """Solution of ``g - Qg = xi`` with ``nu(g) = 0``.

    Uses the fundamental matrix ``(I - Q + 1 nu^T)``; with ``check`` the result
    is compared against the truncated series ``sum_n Q^n xi``.
    """
    xi = _as_values(xi)
    if xi.shape[0] != chain.n_states:
        raise DimensionMismatch("observable length differs from state count")
    nu = stationary_distribution(chain).weights
    if not check_centered(chain, xi, nu):
        raise NotCentered(f"nu(xi) = {nu @ xi!r}")
    profile = ergodicity_profile(chain)
    g = _fundamental_solve(chain, nu, xi)
    if check:
        sup = float(np.max(np.abs(xi), initial=0.0))
        N = _series_length(profile, sup, SERIES_TOL)
        acc = np.zeros_like(xi)
        term = xi.copy()
        for _ in range(N):
            acc += term
            term = chain.P @ term
        scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))
        err = float(np.max(np.abs(acc - g), initial=0.0))
        if err > 10 * SERIES_TOL * scale:
            raise NoConvergence(f"Poisson series disagrees with direct solve by {err:.3e}")
    return g


def sigma_squared(chain, xi):
    """``nu(g^2) - nu((Qg)^2)`` for the Poisson solution ``g``."""
    g = solve_poisson(chain, xi)
    nu = stationary_distribution(chain).weights
    qg = chain.P @ g
    return float(nu @ g**2 - nu @ qg**2)


def covariance_series_variance(chain, xi, max_terms=500):
    """Independent variance route: ``nu(xi^2) + 2 sum_k nu(xi Q^k xi)``.

    Returns ``(value, tail_bound)``; the tail beyond ``max_terms`` is bounded
    through the measured ergodicity constants and added to ``value``.
    """
    xi = _as_values(xi)
    nu = stationary_distribution(chain).weights
    if not check_centered(chain, xi, nu):
        raise NotCentered(f"nu(xi) = {nu @ xi!r}")
    profile = ergodicity_profile(chain)
    weighted = nu * xi
    total = float(weighted @ xi)
    term = xi.copy()
    for _ in range(max_terms):
        term = chain.P @ term
        total += 2.0 * float(weighted @ term)
    k, C = profile.kappa0, profile.C
    sup = float(np.max(np.abs(xi), initial=0.0))
    tail = 2.0 * float(nu @ np.abs(xi)) * C * sup * k ** (max_terms + 1) / (1.0 - k)
    return total, tail


def psi_function(chain, xi):
    g = solve_poisson(chain, xi)
    nu = stationary_distribution(chain).weights
    qg = chain.P @ g
    s2 = float(nu @ g**2 - nu @ qg**2)
    psi = chain.P @ g**2 - qg**2 - s2
    scale = max(1.0, float(np.max(np.abs(g**2), initial=0.0)))
    if abs(nu @ psi) > 1e-10 * scale:
        raise IdentityViolated(f"nu(psi) = {nu @ psi!r}", witness="nu(psi)")
    return psi


def green_sum(chain, f, nu=None):
    """``sum_p Q^p f`` for ``nu(f) = 0``, by one fundamental-matrix solve."""
    if nu is None:
        nu = stationary_distribution(chain).weights
    return _fundamental_solve(chain, nu, np.asarray(f, dtype=float))


def h2_series(chain, xi):
    """Value of ``sum_p nu(|Q^p psi|^{3/2})^{2/3}`` and the number of terms
    summed explicitly.

    Terms are added until the geometric tail bound ``C kappa0^p ||psi|| /
    (1 - kappa0)`` drops below ``1e-12``; that bound is then included, so the
    result is an upper value that is exact to within ``1e-12``.
    """
    psi = psi_function(chain, xi)
    return _h2_from_psi(chain, psi)


def _h2_from_psi(chain, psi):
    nu = stationary_distribution(chain).weights
    profile = ergodicity_profile(chain)
    k, C = profile.kappa0, max(profile.C, 1.0)
    sup = float(np.max(np.abs(psi), initial=0.0))
    total = 0.0
    term = psi.copy()
    p = 0
    while True:
        total += float(nu @ np.abs(term) ** 1.5) ** (2.0 / 3.0)
        p += 1
        tail = C * sup * k**p / (1.0 - k) if sup > 0 else 0.0
        if tail < H2_TAIL_TOL:
            return total + tail, p
        term = chain.P @ term


def h3_audit(chain, xi, weight_kind="sup", t_grid=()):
    """``max_t nu(|exp(i t xi) - 1| W) / |t|`` over the grid.

    For a weighted sup norm the supremum over the unit ball is attained at
    ``|f| = W``, so this is the exact H3 ratio at each grid point.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise EmptyGrid("h3_audit needs at least one t")
    if np.any(t_grid == 0):
        raise ValueError("t_grid must exclude 0")
    xi = _as_values(xi)
    nu = stationary_distribution(chain).weights
    w = chain.weight(weight_kind)
    phase = np.abs(np.exp(1j * np.outer(t_grid, xi)) - 1.0)
    ratios = (phase * w) @ nu / np.abs(t_grid)
    return float(ratios.max())


def clt_diagnostics(chain, xi) -> CltDiagnostics:
    """Everything derived from the Poisson solution in one bundle."""
    g = solve_poisson(chain, xi)
    nu = stationary_distribution(chain).weights
    qg = chain.P @ g
    s2 = float(nu @ g**2 - nu @ qg**2)
    psi = chain.P @ g**2 - qg**2 - s2
    h2, terms = _h2_from_psi(chain, psi)
    return CltDiagnostics(
        xi_breve=g,
        q_xi_breve=qg,
        sigma2=max(s2, 0.0),
        psi=psi,
        psi_breve=green_sum(chain, psi, nu),
        h2_value=h2,
        series_terms_used=terms,
        nu=nu,
    )
