"""Example chains: two-state oracles, a V-weighted birth-death chain, and
affine iterative models ``X_n = A X_{n-1} + b_n`` with their moment checks
and finite-state discretisation."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .chain import ergodicity_profile, validate_chain
from .errors import AuditFailed, BadRadius, InsufficientSamples, NoSpectralGap, OutOfRange


def make_two_state(a, b):
    """``[[1-a, a], [b, 1-b]]`` with invariant law ``(b, a) / (a + b)``."""
    for name, p in (("a", a), ("b", b)):
        if not 0.0 < p <= 1.0:
            raise OutOfRange(f"{name}={p} must lie in (0, 1]")
    return validate_chain([[1.0 - a, a], [b, 1.0 - b]], labels=[0.0, 1.0])


def make_iid(weights):
    w = np.asarray(weights, dtype=float)
    return validate_chain(np.tile(w, (len(w), 1)))


def make_v_ergodic_example(grid_size, drift_param=0.0):
    """Birth-death chain on ``{0, ..., grid_size-1}`` pulled towards 0.

    Interior states move up with probability ``(1 - d)/3``, down with
    ``(1 + d)/3`` and stay otherwise; ``V(x) = 1 + x^2``.  The holding
    probability keeps the chain aperiodic.
    """
    if grid_size < 3:
        raise OutOfRange("grid_size must be >= 3")
    d = float(drift_param)
    if not 0.0 <= d < 1.0:
        raise OutOfRange("drift_param must lie in [0, 1)")
    up, down = (1.0 - d) / 3.0, (1.0 + d) / 3.0
    P = np.zeros((grid_size, grid_size))
    for x in range(grid_size):
        if x + 1 < grid_size:
            P[x, x + 1] = up
        if x > 0:
            P[x, x - 1] = down
        P[x, x] = 1.0 - P[x].sum()
    x = np.arange(grid_size, dtype=float)
    chain = validate_chain(P, labels=x, V=1.0 + x**2)
    try:
        ergodicity_profile(chain, "V")
    except NoSpectralGap as exc:
        raise AuditFailed(f"V-norm ergodicity failed: {exc}") from None
    return chain


def dominance_constant(xi, V, power=3):
    """Smallest ``c`` with ``|xi|^power <= c V`` on the states."""
    return float(np.max(np.abs(np.asarray(xi, dtype=float)) ** power / np.asarray(V, dtype=float)))


# -- affine iterative models -------------------------------------------------


@dataclass(frozen=True)
class NoiseLaw:
    """Law of each coordinate of ``b``.

    kinds: ``uniform_sign`` (``+-scale``), ``uniform_interval`` (``[low, high]``),
    ``truncated_normal`` (``N(0, scale^2)`` cut at ``+-bound``) and
    ``pareto_sign`` (symmetric Pareto with tail index ``alpha``, heavy-tailed
    fixture).
    """

    kind: str = "uniform_sign"
    scale: float = 1.0
    low: float = -1.0
    high: float = 1.0
    bound: float = 3.0
    alpha: float = 2.0

    def sample(self, rng, size):
        if self.kind == "uniform_sign":
            return self.scale * rng.choice(np.array([-1.0, 1.0]), size=size)
        if self.kind == "uniform_interval":
            return rng.uniform(self.low, self.high, size=size)
        if self.kind == "truncated_normal":
            return self.scale * stats.truncnorm.rvs(
                -self.bound, self.bound, size=size, random_state=rng
            )
        if self.kind == "pareto_sign":
            signs = rng.choice(np.array([-1.0, 1.0]), size=size)
            return self.scale * signs * (rng.pareto(self.alpha, size=size) + 1.0)
        raise ValueError(f"unknown noise law {self.kind!r}")

    @property
    def mean(self):
        return 0.5 * (self.low + self.high) if self.kind == "uniform_interval" else 0.0

    @property
    def variance(self):
        if self.kind == "uniform_sign":
            return self.scale**2
        if self.kind == "uniform_interval":
            return (self.high - self.low) ** 2 / 12.0
        if self.kind == "truncated_normal":
            return self.scale**2 * float(stats.truncnorm.var(-self.bound, self.bound))
        if self.kind == "pareto_sign":
            a = self.alpha
            return self.scale**2 * a / (a - 2.0) if a > 2 else float("inf")
        raise ValueError(self.kind)

    def atoms(self, resolution=2000):
        """Equal-weight support points (exact for ``uniform_sign``)."""
        if self.kind == "uniform_sign":
            return np.array([-self.scale, self.scale]), np.array([0.5, 0.5])
        q = (np.arange(resolution) + 0.5) / resolution
        if self.kind == "uniform_interval":
            pts = self.low + q * (self.high - self.low)
        elif self.kind == "truncated_normal":
            pts = self.scale * stats.truncnorm.ppf(q, -self.bound, self.bound)
        else:
            raise ValueError(f"no atoms for {self.kind!r}")
        return pts, np.full(resolution, 1.0 / resolution)


@dataclass(frozen=True, eq=False)
class IterativeModel:
    """``X_n = A X_{n-1} + b_n`` with fixed ``A`` and i.i.d. ``b_n``.

    The base point is the origin, so ``c(g) = ||A||`` (operator 2-norm) and
    ``d(g x0, x0) = ||b||``.
    """

    A: np.ndarray
    noise: NoiseLaw = field(default_factory=NoiseLaw)
    n0: int = 1

    @property
    def dim(self):
        return self.A.shape[0]

    def sample_maps(self, rng, size):
        b = self.noise.sample(rng, (size, self.dim))
        return np.broadcast_to(self.A, (size, self.dim, self.dim)), b


def ar1_scalar(a, noise=None):
    return IterativeModel(np.array([[float(a)]]), noise or NoiseLaw())


def ar1_vector(A, noise=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    return IterativeModel(A, noise or NoiseLaw())


def simulate_iterative(model, x_init, n, seed):
    """One path ``X_0, ..., X_n`` as an ``(n + 1, d)`` array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    _, b = model.sample_maps(rng, n)
    x = np.empty((n + 1, model.dim))
    x[0] = np.broadcast_to(np.asarray(x_init, dtype=float), (model.dim,))
    A = model.A
    for k in range(n):
        x[k + 1] = A @ x[k] + b[k]
    return x


def stationary_mean(model):
    d = model.dim
    return np.linalg.solve(np.eye(d) - model.A, np.full(d, model.noise.mean))


def linear_observable_variance(model, c):
    """Asymptotic variance of ``sum <c, X_k>``: ``c^T (I-A)^{-1} S (I-A)^{-T} c``
    with ``S`` the noise covariance."""
    d = model.dim
    inv = np.linalg.inv(np.eye(d) - model.A)
    v = inv.T @ np.asarray(c, dtype=float)
    return float(model.noise.variance * v @ v)


def _shard_sums(model, xi, n, size, seq, burn_in, x_init):
    rng = np.random.default_rng(seq)
    d = model.dim
    x = np.broadcast_to(np.asarray(x_init, dtype=float), (size, d)).copy()
    At = model.A.T
    for _ in range(burn_in):
        x = x @ At + model.noise.sample(rng, (size, d))
    s = np.zeros(size)
    for _ in range(n):
        x = x @ At + model.noise.sample(rng, (size, d))
        s += xi(x)
    return s


def sample_sums(model, xi, n, n_paths, seed, burn_in=64, x_init=0.0, shards=8, threads=1):
    """Draws of ``S_n = xi(X_1) + ... + xi(X_n)`` over independent paths.

    ``xi`` maps an ``(m, d)`` array of states to ``m`` values.  Paths are
    split into ``shards`` blocks with independent seed streams, so the
    result depends only on ``seed`` and ``shards``, not on ``threads``.
    """
    seqs = np.random.SeedSequence(seed).spawn(shards)
    sizes = [n_paths // shards + (i < n_paths % shards) for i in range(shards)]
    jobs = [(sz, sq) for sz, sq in zip(sizes, seqs) if sz > 0]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda j: _shard_sums(model, xi, n, j[0], j[1], burn_in, x_init), jobs))
    else:
        parts = [_shard_sums(model, xi, n, sz, sq, burn_in, x_init) for sz, sq in jobs]
    return np.concatenate(parts)


@dataclass(frozen=True)
class ConditionStar:
    moment1: float
    moment2: float
    moment2_se: float
    passed: bool
    moment1_stable: bool


def check_condition_star(model, mc_samples=10_000, seed=0, n0=None):
    """Monte Carlo estimates of the two integrals of the iterative-model
    moment condition:

    * ``E[Gamma^3 (1 + c^(1/2))]`` with ``Gamma = 1 + c + ||b||``;
    * ``E[c^(1/2) max(c, 1)^3]`` for the product of ``n0`` maps.

    Passes when the first estimate is stable under doubling the sample size
    and the second is below 1 by two standard errors.
    """
    if mc_samples < 10_000:
        raise InsufficientSamples("need at least 1e4 samples")
    n0 = model.n0 if n0 is None else n0
    rng = np.random.default_rng(seed)
    A, b = model.sample_maps(rng, mc_samples)
    c = np.linalg.norm(A, ord=2, axis=(1, 2))
    gamma = 1.0 + c + np.linalg.norm(b, axis=1)
    terms1 = gamma**3 * (1.0 + np.sqrt(c))
    m1 = float(terms1.mean())

    prod = np.broadcast_to(np.eye(model.dim), (mc_samples, model.dim, model.dim)).copy()
    for _ in range(n0):
        Ak, _ = model.sample_maps(rng, mc_samples)
        prod = Ak @ prod
    cp = np.linalg.norm(prod, ord=2, axis=(1, 2))
    terms2 = np.sqrt(cp) * np.maximum(cp, 1.0) ** 3
    m2 = float(terms2.mean())
    se2 = float(terms2.std(ddof=1) / np.sqrt(mc_samples))

    stable = _mean_is_stable(terms1)
    passed = bool(np.isfinite(m1) and stable and m2 + 2.0 * se2 < 1.0)
    return ConditionStar(m1, m2, se2, passed, stable)


def _mean_is_stable(terms, rounds=4):
    """Heavy-tail screen on nested prefixes of sizes M/2^rounds ... M.

    Flags divergence when the running mean keeps climbing across doublings
    or a single draw carries more than 5% of the total.
    """
    M = len(terms)
    means = [terms[: M >> k].mean() for k in range(rounds, -1, -1)]
    climbing = means[-1] > 1.25 * means[0]
    dominated = terms.max() > 0.05 * terms.sum()
    return not (climbing or dominated)


# -- discretisation ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscretizedModel:
    grid: np.ndarray
    chain: object
    truncation_radius: float


def discretize_ar1(model, grid_size=61, radius=3.0, check_radius=True, seed=0):
    """Finite surrogate of a scalar AR(1) on an evenly spaced grid.

    The mass of ``A x + b`` is split linearly between the two neighbouring
    grid points, which keeps ``E[next state]`` exact in the interior; mass
    beyond ``+-radius`` is folded onto the boundary points.  States carry
    ``V(x) = 1 + x^2``.
    """
    if model.dim != 1:
        raise ValueError("discretize_ar1 needs a scalar model")
    a = float(model.A[0, 0])
    if not abs(a) < 1.0:
        raise OutOfRange(f"|A| = {abs(a)} must be < 1")
    grid = np.linspace(-radius, radius, grid_size)
    h = grid[1] - grid[0]
    pts, wts = model.noise.atoms()
    P = np.zeros((grid_size, grid_size))
    for i, x in enumerate(grid):
        y = np.clip(a * x + pts, -radius, radius)
        pos = (y + radius) / h
        j = np.clip(np.floor(pos).astype(int), 0, grid_size - 2)
        frac = pos - j
        np.add.at(P[i], j, wts * (1.0 - frac))
        np.add.at(P[i], j + 1, wts * frac)
    P /= P.sum(axis=1, keepdims=True)
    if check_radius:
        path = simulate_iterative(model, 0.0, 100_000, seed)[1000:, 0]
        outside = float(np.mean(np.abs(path) > radius))
        if outside >= 1e-3:
            raise BadRadius(f"{outside:.2e} of stationary mass lies beyond radius {radius}")
    chain = validate_chain(P, labels=grid, V=1.0 + grid**2)
    try:
        ergodicity_profile(chain)
    except NoSpectralGap as exc:
        raise AuditFailed(f"discretised chain has no spectral gap: {exc}") from None
    return DiscretizedModel(grid=grid, chain=chain, truncation_radius=float(radius))
