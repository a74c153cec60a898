"""Finite-state transition kernels, their invariant law and ergodicity profile."""

from dataclasses import dataclass, field
from math import gcd
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ._linalg import spectral_radius
from .errors import (
    DimensionMismatch,
    NegativeEntry,
    NoConvergence,
    NoSpectralGap,
    Reducible,
    RowSumInvalid,
)

ROW_TOL = 1e-12
GAP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """A validated row-stochastic matrix, optionally carrying state labels
    and a weight function ``V >= 1``."""

    P: np.ndarray
    labels: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def weight(self, kind="sup"):
        """Weight vector for a weighted sup norm.

        ``"sup"`` is the constant 1, ``"V"`` the chain's own weight, ``"W"``
        and ``"U"`` the powers ``V**(1/3)`` and ``V**(2/3)``.
        """
        if not isinstance(kind, str):
            w = np.asarray(kind, dtype=float)
            if w.shape != (self.n_states,):
                raise DimensionMismatch("weight vector has wrong length")
            return w
        if kind == "sup":
            return np.ones(self.n_states)
        if self.V is None:
            raise ValueError(f"weight {kind!r} needs a chain carrying V")
        power = {"V": 1.0, "W": 1.0 / 3.0, "U": 2.0 / 3.0}[kind]
        return self.V ** power


@dataclass(frozen=True, eq=False)
class Distribution:
    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if np.any(w < 0) or abs(w.sum() - 1.0) > ROW_TOL:
            raise ValueError("distribution must be nonnegative and sum to 1")

    def expect(self, f):
        return self.weights @ f


@dataclass(frozen=True, eq=False)
class Observable:
    values: np.ndarray
    centered: bool = False


@dataclass(frozen=True)
class ErgodicityProfile:
    kappa0: float
    C: float
    norm_kind: str
    horizon: int
    dimension_factor: int = field(default=1)

    def bound(self, n, f_norm=1.0):
        return self.C * self.kappa0**n * f_norm


def _as_values(xi):
    if isinstance(xi, Observable):
        return np.asarray(xi.values, dtype=float)
    return np.asarray(xi, dtype=float)


def validate_chain(P, labels=None, V=None) -> FiniteChain:
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got {P.shape}")
    if np.any(P < 0):
        i, j = np.argwhere(P < 0)[0]
        raise NegativeEntry(f"P[{i},{j}] = {P[i, j]} < 0")
    sums = P.sum(axis=1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > ROW_TOL):
        i = int(np.argmax(dev))
        raise RowSumInvalid(f"row {i} sums to {sums[i]!r}")
    P = P / sums[:, None]
    n = P.shape[0]
    if labels is not None:
        labels = np.asarray(labels, dtype=float)
        if labels.shape[0] != n:
            raise DimensionMismatch("one label per state required")
    if V is not None:
        V = np.asarray(V, dtype=float)
        if V.shape != (n,):
            raise DimensionMismatch("one weight per state required")
        if np.any(V < 1.0):
            raise ValueError("weight function V must be >= 1")
    P.setflags(write=False)
    return FiniteChain(P=P, labels=labels, V=V)


def closed_classes(chain):
    """Recurrent communicating classes (strong components with no exit)."""
    adj = chain.P > 0
    ncomp, comp = connected_components(adj, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = np.flatnonzero(comp == c)
        others = comp != c
        if not adj[np.ix_(members, others)].any():
            closed.append(members)
    return closed


def is_irreducible(chain):
    adj = chain.P > 0
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


def period(chain):
    """Period of the (unique) closed class, from BFS levels.

    The period equals gcd over edges u->v inside the class of
    ``level(u) + 1 - level(v)``.
    """
    classes = closed_classes(chain)
    if len(classes) != 1:
        raise Reducible(f"{len(classes)} closed classes")
    members = classes[0]
    sub = chain.P[np.ix_(members, members)] > 0
    order, pred = breadth_first_order(sub.astype(np.int8), 0, directed=True, return_predecessors=True)
    level = np.full(len(members), -1)
    level[0] = 0
    for node in order[1:]:
        level[node] = level[pred[node]] + 1
    d = 0
    for u, v in np.argwhere(sub):
        d = gcd(d, int(abs(level[u] + 1 - level[v])))
    return d


def stationary_distribution(chain, check=True) -> Distribution:
    """Invariant law from the balance equations with one row replaced by the
    normalisation constraint; cross-checked by lazy power iteration."""
    classes = closed_classes(chain)
    if len(classes) != 1:
        raise Reducible(f"chain has {len(classes)} closed classes")
    n = chain.n_states
    A = chain.P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    nu = np.linalg.solve(A, rhs)
    # one step of iterative refinement
    nu += np.linalg.solve(A, rhs - A @ nu)
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    if check:
        lazy = 0.5 * (chain.P + np.eye(n))
        mu = np.full(n, 1.0 / n)
        for _ in range(100_000):
            nxt = mu @ lazy
            if np.max(np.abs(nxt - mu)) < 1e-15:
                mu = nxt
                break
            mu = nxt
        else:
            raise NoConvergence("power-iteration cross-check of nu did not converge")
        if np.max(np.abs(mu - nu)) > 1e-10:
            raise NoConvergence(
                f"linear solve and power iteration disagree by {np.max(np.abs(mu - nu)):.3e}"
            )
    return Distribution(nu)


def apply_Q(chain, f):
    f = np.asarray(f)
    if f.shape[0] != chain.n_states:
        raise DimensionMismatch(f"vector of length {f.shape[0]} on {chain.n_states} states")
    return chain.P @ f


def subdominant_modulus(chain, nu=None):
    """Spectral radius of ``P - 1 nu^T``, i.e. the second-largest modulus."""
    if nu is None:
        nu = stationary_distribution(chain).weights
    R = chain.P - np.outer(np.ones(chain.n_states), nu)
    return spectral_radius(R)


def ergodicity_profile(chain, norm_kind="sup", N_max=200) -> ErgodicityProfile:
    """Measured geometric-ergodicity constants ``(kappa0, C)``.

    ``kappa0`` is the sub-dominant modulus.  ``C`` is the smallest constant
    with ``||Q^n f - nu(f) 1|| <= C kappa0^n ||f||`` for ``n <= N_max`` over
    the coordinate probes (rescaled by the weight for weighted norms).  The
    operator constant is at most ``C * n_states``, reported as
    ``dimension_factor``.
    """
    nu = stationary_distribution(chain).weights
    if period(chain) != 1:
        raise NoSpectralGap("chain is periodic")
    kappa0 = subdominant_modulus(chain, nu)
    if kappa0 > 1.0 - GAP_TOL:
        raise NoSpectralGap(f"sub-dominant modulus {kappa0!r}")
    w = chain.weight(norm_kind)
    n = chain.n_states
    R = chain.P - np.outer(np.ones(n), nu)
    # probe f_y = w_y e_y has unit weighted norm; column y of R^k times w_y
    Rk = np.eye(n)
    C = 0.0
    for k in range(1, N_max + 1):
        Rk = R @ Rk
        resp = np.max(np.abs(Rk) * w[None, :] / w[:, None], axis=0)
        worst = float(resp.max())
        scale = kappa0**k
        if worst <= 1e-14 * max(1.0, float(w.max())):
            continue
        if scale == 0.0:
            raise NoSpectralGap("nonzero remainder with kappa0 = 0")
        C = max(C, worst / scale)
    return ErgodicityProfile(
        kappa0=float(kappa0), C=C, norm_kind=str(norm_kind), horizon=N_max, dimension_factor=n
    )


def center_observable(chain, xi) -> Observable:
    values = _as_values(xi)
    if values.shape[0] != chain.n_states:
        raise DimensionMismatch("observable length differs from state count")
    nu = stationary_distribution(chain).weights
    return Observable(values - nu @ values, centered=True)


def check_centered(chain, xi, nu=None, tol=1e-10):
    values = _as_values(xi)
    if nu is None:
        nu = stationary_distribution(chain).weights
    return abs(nu @ values) <= tol * max(1.0, float(np.max(np.abs(values), initial=0.0)))


# -- plain-text chain files --------------------------------------------------


def parse_chain_text(text) -> FiniteChain:
    """Read the chain file format.

    ::

        # comments and blank lines are ignored
        n
        p_11 ... p_1n        (n rows of n probabilities)
        ...
        labels:              (optional) n reals, any line layout
        x_1 ... x_n
        V:                   (optional) n reals >= 1, any line layout
        v_1 ... v_n
    """
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise ValueError("empty chain file")
    n = int(lines[0])
    rows = [list(map(float, ln.split())) for ln in lines[1 : n + 1]]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise DimensionMismatch(f"expected {n} rows of {n} entries")
    blocks = {}
    key = None
    for ln in lines[n + 1 :]:
        if ln.endswith(":"):
            key = ln[:-1].strip()
            if key not in ("labels", "V"):
                raise ValueError(f"unknown block {key!r}")
            blocks[key] = []
            continue
        if key is None:
            raise ValueError(f"unexpected line {ln!r}")
        blocks[key].extend(map(float, ln.split()))
    for k, vals in blocks.items():
        if len(vals) != n:
            raise DimensionMismatch(f"block {k!r} has {len(vals)} values, expected {n}")
    return validate_chain(rows, labels=blocks.get("labels"), V=blocks.get("V"))


def format_chain_text(chain) -> str:
    out = [str(chain.n_states)]
    out += [" ".join(repr(float(p)) for p in row) for row in chain.P]
    if chain.labels is not None and chain.labels.ndim == 1:
        out += ["labels:", " ".join(repr(float(x)) for x in chain.labels)]
    if chain.V is not None:
        out += ["V:", " ".join(repr(float(x)) for x in chain.V)]
    return "\n".join(out) + "\n"
