"""Characteristic functions, exact lattice laws and Kolmogorov distances of
additive functionals ``S_n = xi(X_1) + ... + xi(X_n)``."""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .chain import Distribution, _as_values, stationary_distribution
from .errors import (
    DegenerateVariance,
    EmptySample,
    GridTooLarge,
    IdentityViolated,
    NotLattice,
    QuadratureFailure,
)
from .poisson import clt_diagnostics, sigma_squared

SIGMA_MIN = 1e-7
MAX_CELLS = 10**6
ESSEEN_HOLE = 1e-8


def normal_cdf(x):
    return ndtr(x)


def _mu0_weights(chain, mu0):
    if mu0 is None or (isinstance(mu0, str) and mu0 == "stationary"):
        return stationary_distribution(chain).weights
    if isinstance(mu0, Distribution):
        return mu0.weights
    w = np.asarray(mu0, dtype=float)
    Distribution(w)
    return w


def _sigma(chain, xi, sigma):
    if sigma is None:
        s2 = sigma_squared(chain, xi)
        sigma = np.sqrt(max(s2, 0.0))
    if sigma <= SIGMA_MIN:
        raise DegenerateVariance(f"sigma = {sigma!r}")
    return float(sigma)


def cf_unnormalized(chain, xi, mu0, n, u):
    """``E[exp(i u S_n)] = <mu0, Q(u)^n 1>`` for scalar or array ``u``.

    Evaluated by ``n`` kernel applications, vectorised over ``u``.
    """
    xi = _as_values(xi)
    mu = _mu0_weights(chain, mu0)
    u = np.asarray(u, dtype=float)
    flat = np.atleast_1d(u).ravel()
    phase = np.exp(1j * np.outer(xi, flat))
    G = np.ones((chain.n_states, flat.size), dtype=complex)
    for _ in range(n):
        G = chain.P @ (phase * G)
    out = mu @ G
    return out.reshape(u.shape) if u.ndim else complex(out[0])


def exact_cf_sn(chain, xi, mu0=None, n=1, t=0.0, sigma=None, normalize=True):
    """Characteristic function of ``S_n / (sigma sqrt(n))`` at ``t``
    (or of ``S_n`` itself with ``normalize=False``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if normalize:
        t = np.asarray(t, dtype=float) / (_sigma(chain, xi, sigma) * np.sqrt(n))
    return cf_unnormalized(chain, xi, mu0, n, t)


# -- martingale part ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairChain:
    """Chain of consecutive pairs ``(X_{k-1}, X_k)`` carrying the martingale
    increment ``u(x, y) = g(y) - Qg(x)`` for the Poisson solution ``g``."""

    base: object
    xi_breve: np.ndarray
    q_xi_breve: np.ndarray

    @property
    def n_states(self):
        return self.base.n_states**2

    def matrix(self):
        n = self.base.n_states
        P2 = np.zeros((n, n, n, n))
        for y in range(n):
            P2[:, y, y, :] = self.base.P[y]
        return P2.reshape(n * n, n * n)

    def stationary(self, nu=None):
        if nu is None:
            nu = stationary_distribution(self.base).weights
        return (nu[:, None] * self.base.P).ravel()

    def observable(self):
        return (self.xi_breve[None, :] - self.q_xi_breve[:, None]).ravel()

    def apply(self, g):
        """``(P_2 g)(x, y) = sum_z P(y, z) g(y, z)`` without forming ``P_2``."""
        n = self.base.n_states
        G = np.reshape(g, (n, n) + np.shape(g)[1:])
        h = np.einsum("yz,yz...->y...", self.base.P, G)
        return np.broadcast_to(h[None], (n,) + h.shape).reshape(np.shape(g))


def pair_chain(chain, xi):
    d = clt_diagnostics(chain, xi)
    return PairChain(chain, d.xi_breve, d.q_xi_breve)


def exact_cf_tn(chain, xi, n, t, sigma=None):
    """``E[exp(i t T_n / (sigma sqrt(n)))]`` for the martingale ``T_n``,
    stationary start, computed on the pair chain."""
    pc = pair_chain(chain, xi)
    s = _sigma(chain, xi, sigma)
    t = np.asarray(t, dtype=float)
    u = np.atleast_1d(t).ravel() / (s * np.sqrt(n))
    obs = pc.observable()
    phase = np.exp(1j * np.outer(obs, u))
    # Z_1 ~ nu(x)P(x,y); T_n = sum_{k=1}^n u(Z_k)
    G = np.ones((pc.n_states, u.size), dtype=complex)
    for _ in range(n - 1):
        G = pc.apply(phase * G)
    out = pc.stationary() @ (phase * G)
    return out.reshape(t.shape) if t.ndim else complex(out[0])


def default_t_grid(n, points=512):
    pos = np.linspace(0.0, np.sqrt(n), points + 1)[1:]
    return np.concatenate([-pos[::-1], pos])


def cf_gap_profile(chain, xi, mu0=None, n_list=(16, 64, 256), t_grid=None, sigma=None):
    """``[(n, sqrt(n) * sup_t |phi_n(t) - exp(-t^2/2)| / |t|)]``; the
    supremum runs over ``t_grid`` (default: 1024 points filling
    ``[-sqrt(n), sqrt(n)]``)."""
    s = _sigma(chain, xi, sigma)
    out = []
    for n in n_list:
        ts = default_t_grid(n) if t_grid is None else np.asarray(t_grid, dtype=float)
        ts = ts[ts != 0]
        cf = exact_cf_sn(chain, xi, mu0, n, ts, sigma=s)
        gap = np.abs(cf - np.exp(-0.5 * ts**2)) / np.abs(ts)
        out.append((int(n), float(np.sqrt(n) * gap.max())))
    return out


@dataclass(frozen=True)
class MartingaleReport:
    increment_mean: float
    conditional_variance: float
    lag_identity: float
    path_identity: float
    green_identity: float
    paths_checked: int


def martingale_audit(chain, xi, horizon=10, path_length=4, tol=1e-10, max_paths=100_000, seed=0):
    """Exact checks of the martingale decomposition ``S_n = T_n + V_n``.

    Each field of the returned report is the largest deviation found:

    * ``increment_mean``: ``E[U | X_prev = x]``
    * ``conditional_variance``: ``E[U^2 - sigma^2 | X_prev] - psi``
    * ``lag_identity``: ``E[W_k | X_{l-1}] - Q^{k-l} psi`` for lags ``0..horizon``
    * ``path_identity``: ``S_n - T_n - V_n`` on enumerated paths
    * ``green_identity``: ``sum_p E[W_{p+l} | X_{l-1}] - psi_breve``

    Raises :class:`IdentityViolated` if any exceeds ``tol`` (relative to the
    size of the quantities involved).
    """
    xi = _as_values(xi)
    d = clt_diagnostics(chain, xi)
    P, g, qg, psi, s2 = chain.P, d.xi_breve, d.q_xi_breve, d.psi, d.sigma2
    n = chain.n_states
    U = g[None, :] - qg[:, None]
    scale = max(1.0, float(np.max(np.abs(U))) ** 2)

    inc = float(np.max(np.abs((P * U).sum(axis=1))))
    _check(inc, tol * scale, "E[U_n | X_{n-1}]", int(np.argmax(np.abs((P * U).sum(axis=1)))))

    # conditional mean of W from the pair-chain law, independent of psi's formula
    w_cond = (P * (U**2 - s2)).sum(axis=1)
    cv = float(np.max(np.abs(w_cond - psi)))
    _check(cv, tol * scale, "E[W | X_prev] = psi", int(np.argmax(np.abs(w_cond - psi))))

    lag_err = 0.0
    Pk = np.eye(n)
    partial = np.zeros(n)
    for lag in range(horizon + 1):
        lhs = Pk @ w_cond  # E[W_{l+lag} | X_{l-1}] via lag-step law then one pair step
        rhs = psi.copy()
        for _ in range(lag):
            rhs = P @ rhs
        lag_err = max(lag_err, float(np.max(np.abs(lhs - rhs))))
        partial += lhs
        Pk = Pk @ P
    _check(lag_err, tol * scale, "lagged conditional mean", None)

    # Z'_l: continue the series until its geometric tail is negligible
    nu = d.nu
    term = Pk @ w_cond
    for _ in range(100_000):
        term = term - nu @ term  # nu(term) = nu(psi) = 0 up to roundoff
        if np.max(np.abs(term)) < 1e-16 * scale:
            break
        partial += term
        term = P @ term
    green = float(np.max(np.abs(partial - d.psi_breve)))
    _check(green, 1e2 * tol * scale, "Z' = psi_breve", int(np.argmax(np.abs(partial - d.psi_breve))))

    path_err = 0.0
    checked = 0
    rng = np.random.default_rng(seed)
    for L in range(1, path_length + 1):
        if n ** (L + 1) <= max_paths:
            paths = np.array(list(itertools.product(range(n), repeat=L + 1)))
        else:
            paths = rng.integers(0, n, size=(max_paths, L + 1))
        S = xi[paths[:, 1:]].sum(axis=1)
        T = (g[paths[:, 1:]] - qg[paths[:, :-1]]).sum(axis=1)
        V = qg[paths[:, 0]] - qg[paths[:, -1]]
        err = np.abs(S - T - V)
        if err.max() > path_err:
            path_err = float(err.max())
            worst_path = paths[int(np.argmax(err))].tolist()
        checked += len(paths)
        _check(path_err, tol * scale, "S_n = T_n + V_n", worst_path if path_err else None)

    return MartingaleReport(
        increment_mean=inc,
        conditional_variance=cv,
        lag_identity=lag_err,
        path_identity=path_err,
        green_identity=green,
        paths_checked=checked,
    )


def _check(err, tol, name, witness):
    if err > tol:
        raise IdentityViolated(f"{name} violated by {err:.3e}", witness=witness)


# -- exact laws and distances ------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatticeCdf:
    """Atoms of the law of ``S_n``, values strictly increasing."""

    values: np.ndarray
    probs: np.ndarray
    n: int

    @property
    def atoms(self):
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def characteristic(self, t, sigma):
        x = self.values / (sigma * np.sqrt(self.n))
        return np.exp(1j * np.multiply.outer(np.asarray(t, dtype=float), x)) @ self.probs


def exact_cdf_lattice(chain, xi, mu0=None, n=1, scale=1.0):
    """Exact law of ``S_n`` when ``scale * xi`` is integer valued.

    Dynamic programme over (current state, partial sum); values are returned
    in the original (unscaled) units.
    """
    xi = _as_values(xi)
    scaled = xi * scale
    ints = np.rint(scaled)
    if np.any(np.abs(scaled - ints) > 1e-9 * np.maximum(1.0, np.abs(scaled))):
        raise NotLattice("scale * xi is not integer valued")
    ints = ints.astype(np.int64)
    lo, hi = int(ints.min()), int(ints.max())
    width = hi - lo
    cells = n * width + 1
    if cells > MAX_CELLS or cells * chain.n_states > 50 * MAX_CELLS:
        raise GridTooLarge(f"{cells} cells on {chain.n_states} states is too large")
    mu = _mu0_weights(chain, mu0)
    shift = ints - lo
    k = chain.n_states
    # prob[x, j] = P(X_m = x, S_m = m*lo + j)
    prob = np.zeros((k, cells))
    prob[:, 0] = mu
    PT = chain.P.T
    for m in range(n):
        used = m * width + 1
        moved = PT @ prob[:, :used]
        nxt = np.zeros_like(prob)
        for y in range(k):
            s = shift[y]
            nxt[y, s : s + used] = moved[y]
        prob = nxt
    total = prob.sum(axis=0)
    keep = total > 0
    values = (n * lo + np.flatnonzero(keep)) / scale
    return LatticeCdf(values=values.astype(float), probs=total[keep], n=n)


def kolmogorov_distance_exact(cdf, sigma):
    """``sup_x |P(S_n / (sigma sqrt n) <= x) - Phi(x)|`` for a lattice law."""
    if sigma <= SIGMA_MIN:
        raise DegenerateVariance(f"sigma = {sigma!r}")
    x = cdf.values / (sigma * np.sqrt(cdf.n))
    right = np.cumsum(cdf.probs)
    left = right - cdf.probs
    phi = normal_cdf(x)
    return float(max(np.max(np.abs(right - phi)), np.max(np.abs(left - phi))))


def kolmogorov_distance_mc(samples, sigma=1.0):
    """Kolmogorov distance between the empirical law of ``samples / sigma``
    and N(0,1).

    ``samples`` are draws of ``S_n / sqrt(n)``.  The statistical floor is of
    order ``M**-0.5`` for ``M`` samples (DKW: ``P(D > e) <= 2 exp(-2 M e^2)``).
    """
    z = np.sort(np.asarray(samples, dtype=float).ravel())
    if z.size == 0:
        raise EmptySample("no samples")
    if sigma <= SIGMA_MIN:
        raise DegenerateVariance(f"sigma = {sigma!r}")
    M = z.size
    phi = normal_cdf(z / sigma)
    i = np.arange(1, M + 1)
    return float(max(np.max(np.abs(i / M - phi)), np.max(np.abs((i - 1) / M - phi))))


def dkw_radius(M, confidence=0.99):
    """Half-width ``e`` with ``P(D_M > e) <= 1 - confidence``."""
    return float(np.sqrt(np.log(2.0 / (1.0 - confidence)) / (2.0 * M)))


# -- smoothing inequality ----------------------------------------------------

_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(20)


def _adaptive_gauss(f, a, b, tol=1e-9, max_rounds=30):
    """Adaptive composite Gauss-Legendre on ``[a, b]`` with vectorised ``f``.

    Panels are bisected while the 10- and 20-point rules disagree by more
    than their share of ``tol``; each round evaluates all open panels in one
    call to ``f``.
    """
    panels = [(a, b)]
    total = 0.0
    err_total = 0.0
    for _ in range(max_rounds):
        if not panels:
            return total, err_total
        lo = np.array([p[0] for p in panels])
        hi = np.array([p[1] for p in panels])
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x_lo = mid[:, None] + half[:, None] * _GL_LO[0][None, :]
        x_hi = mid[:, None] + half[:, None] * _GL_HI[0][None, :]
        vals = f(np.concatenate([x_lo.ravel(), x_hi.ravel()]))
        v_lo = vals[: x_lo.size].reshape(x_lo.shape)
        v_hi = vals[x_lo.size :].reshape(x_hi.shape)
        i_lo = half * (v_lo @ _GL_LO[1])
        i_hi = half * (v_hi @ _GL_HI[1])
        err = np.abs(i_hi - i_lo)
        share = tol * (hi - lo) / (b - a)
        done = err <= np.maximum(share, 1e-15)
        total += float(i_hi[done].sum())
        err_total += float(err[done].sum())
        panels = [
            half_panel
            for (l, h), m in zip(zip(lo[~done], hi[~done]), mid[~done])
            for half_panel in ((l, m), (m, h))
        ]
    raise QuadratureFailure(f"{len(panels)} panels unresolved after {max_rounds} rounds")


def esseen_bound(chain, xi, mu0=None, n=1, T=None, sigma=None, cf=None, tol=1e-9):
    """Smoothing-inequality bound on the Kolmogorov distance:

        (1/pi) int_{-T}^{T} |phi_n(t) - exp(-t^2/2)| / |t| dt + 24 / (pi T sqrt(2 pi))

    ``phi_n`` defaults to the exact characteristic function; ``cf`` may
    inject another one.  The integrand is even for real ``mu0`` and ``xi``,
    so the integral is twice that over ``(0, T]``.  The interval
    ``(0, 1e-8)`` is excluded and replaced by a bound on its contribution.
    """
    if T is None:
        T = np.sqrt(n)
    if T <= 0:
        raise ValueError("T must be positive")
    if cf is None:
        s = _sigma(chain, xi, sigma)

        def cf(t):
            return exact_cf_sn(chain, xi, mu0, n, t, sigma=s)

        # |phi_n(t) - 1| <= |t| E|S_n| / (sigma sqrt n) and |1 - exp(-t^2/2)| <= t^2 / 2
        xi_sup = float(np.max(np.abs(_as_values(xi)), initial=0.0))
        slope = np.sqrt(n) * xi_sup / s + ESSEEN_HOLE
    else:
        slope = None

    def integrand(t):
        return np.abs(cf(t) - np.exp(-0.5 * t**2)) / t

    integral, _ = _adaptive_gauss(integrand, ESSEEN_HOLE, float(T), tol=tol)
    if slope is None:
        slope = float(np.atleast_1d(integrand(np.array([ESSEEN_HOLE])))[0])
    hole = ESSEEN_HOLE * slope
    return float((2.0 * (integral + hole)) / np.pi + 24.0 / (np.pi * T * np.sqrt(2.0 * np.pi)))
