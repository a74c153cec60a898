"""Rate experiments: distances ``D_n`` over a grid of ``n`` and the fitted
exponent ``tau_hat`` in ``D_n ~ n^(-tau_hat)``."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from .audit import audit_chain, audit_condition_star
from .cf import (
    SIGMA_MIN,
    esseen_bound,
    exact_cdf_lattice,
    kolmogorov_distance_exact,
    kolmogorov_distance_mc,
)
from .chain import center_observable, ergodicity_profile, parse_chain_text
from .errors import CltLabError, DegenerateInput, DegenerateVariance, ValidationError
from .models import (
    IterativeModel,
    NoiseLaw,
    discretize_ar1,
    linear_observable_variance,
    make_two_state,
    make_v_ergodic_example,
    sample_sums,
    stationary_mean,
)
from .poisson import h2_series, sigma_squared
from .spectral import perturbation_bounds

BOOTSTRAP_BLOCKS = 100


@dataclass(frozen=True, eq=False)
class Setup:
    """Objects built from a config: a finite chain with observable ``xi``,
    an iterative model with a vectorised observable ``xi_fn``, or both
    (discretised AR(1))."""

    chain: Optional[object] = None
    xi: Optional[np.ndarray] = None
    model: Optional[IterativeModel] = None
    xi_fn: Optional[object] = None
    sigma2_model: Optional[float] = None
    mu0: Optional[np.ndarray] = None


def worker_count():
    cap = os.environ.get("CLTLAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _chain_observable(chain, obs):
    kind = obs["kind"]
    if kind == "values":
        xi = np.asarray(obs["values"], dtype=float)
        if xi.shape != (chain.n_states,):
            raise ValidationError("observable.values", f"need {chain.n_states} values")
    else:
        if chain.labels is None:
            raise ValidationError("observable.kind", f"{kind!r} needs state labels")
        x = np.asarray(chain.labels, dtype=float)
        if kind == "labels":
            xi = np.sign(x) * np.abs(x) ** obs["power"]
        elif kind == "linear":
            xi = (obs["coef"][0] if obs["coef"] else 1.0) * x
        else:
            xi = np.abs(x)
    if obs["center"]:
        xi = center_observable(chain, xi).values
    return xi


def _model_observable(model, obs):
    kind = obs["kind"]
    d = model.dim
    if kind == "linear":
        c = np.asarray(obs["coef"] or [1.0] * d, dtype=float)
        if c.shape != (d,):
            raise ValidationError("observable.coef", f"need {d} coefficients")
        mean = float(c @ stationary_mean(model)) if obs["center"] else 0.0
        sigma2 = obs["sigma2"] if obs["sigma2"] is not None else linear_observable_variance(model, c)
        return (lambda x: x @ c - mean), sigma2
    if kind == "norm":
        if obs["center"] and obs["mean"] is None:
            raise ValidationError("observable.mean", "centering ||x|| needs its stationary mean")
        if obs["sigma2"] is None:
            raise ValidationError("observable.sigma2", "||x|| needs a supplied asymptotic variance")
        mean = obs["mean"] if obs["center"] else 0.0
        return (lambda x: np.linalg.norm(x, axis=1) - mean), obs["sigma2"]
    raise ValidationError("observable.kind", f"{kind!r} is not defined on an iterative model")


def build_setup(config) -> Setup:
    m = config.model
    chain = model = xi = xi_fn = s2 = None
    if config.preset == "two_state":
        chain = make_two_state(m["a"], m["b"])
    elif config.preset == "birth_death_V":
        chain = make_v_ergodic_example(m["grid_size"], m["drift"])
    elif config.preset == "chain_file":
        with open(m["file"], encoding="utf-8") as fh:
            chain = parse_chain_text(fh.read())
    else:
        model = IterativeModel(m["A"], NoiseLaw(**m["noise"]), n0=m["n0"])
        if m["discretize"]:
            chain = discretize_ar1(model, m["disc_grid_size"], m["disc_radius"], seed=config.seed).chain
        if config.method == "monte_carlo":
            xi_fn, s2 = _model_observable(model, config.observable)
    if chain is not None:
        xi = _chain_observable(chain, config.observable)

    mu0 = None
    if chain is not None:
        if config.mu0["kind"] == "point":
            mu0 = np.zeros(chain.n_states)
            if not 0 <= config.mu0["state"] < chain.n_states:
                raise ValidationError("initial.state", "state index out of range")
            mu0[config.mu0["state"]] = 1.0
        elif config.mu0["kind"] == "custom":
            mu0 = np.asarray(config.mu0["weights"], dtype=float)
            if mu0.shape != (chain.n_states,):
                raise ValidationError("initial.weights", f"need {chain.n_states} weights")
    return Setup(chain=chain, xi=xi, model=model, xi_fn=xi_fn, sigma2_model=s2, mu0=mu0)


# -- fitting -----------------------------------------------------------------


def _ols(n, D):
    x, y = np.log(np.asarray(n, dtype=float)), np.log(np.asarray(D, dtype=float))
    k = len(x)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sxx = float(np.sum((x - x.mean()) ** 2))
    s2 = float(resid @ resid) / (k - 2) if k > 2 else 0.0
    se = np.sqrt(s2 / sxx) if sxx > 0 else float("inf")
    return float(slope), float(intercept), float(se)


def fit_rate_exponent(rows, level=0.95):
    """Least squares of ``log D_n`` on ``log n``; returns ``(tau_hat, (lo, hi))``
    with ``tau_hat = -slope``.

    The interval is ``tau_hat +- t_{k-2} * s / sqrt(Sxx)``, where ``s^2`` is
    the residual variance over ``k - 2`` degrees of freedom and ``Sxx`` the
    spread of ``log n``.
    """
    rows = list(rows)
    if len(rows) < 3:
        raise DegenerateInput("need at least 3 rows")
    n = [r[0] for r in rows]
    D = [r[1] for r in rows]
    if any(not d > 0 for d in D):
        raise DegenerateInput("distances must be positive")
    if len(set(n)) < 2:
        raise DegenerateInput("need at least two distinct n")
    slope, _, se = _ols(n, D)
    q = stats.t.ppf(0.5 + level / 2.0, len(rows) - 2)
    tau = -slope
    return tau, (tau - q * se, tau + q * se)


# -- reports -----------------------------------------------------------------


class RateRow(NamedTuple):
    n: int
    D_n: float
    sqrt_n_D_n: float
    esseen_bound: float


@dataclass(frozen=True, eq=False)
class RateReport:
    """``tau_hat`` is the exponent of ``D_n`` itself (0.5 for the classical
    rate); an exponent ``tau`` in ``O(n^(-tau/2))`` corresponds to
    ``tau = 2 * tau_hat``."""

    rows: tuple
    tau_hat: float
    tau_ci: tuple
    sigma2: float
    method: str
    ci_method: str
    intercept: float
    diagnostics: dict = field(default_factory=dict)
    audits: tuple = ()
    config_echo: str = ""

    def __eq__(self, other):
        if not isinstance(other, RateReport):
            return NotImplemented
        rows_equal = len(self.rows) == len(other.rows) and all(
            np.array_equal(a, b, equal_nan=True) for a, b in zip(self.rows, other.rows)
        )
        return (
            rows_equal
            and self.tau_hat == other.tau_hat
            and self.tau_ci == other.tau_ci
            and self.sigma2 == other.sigma2
            and self.diagnostics == other.diagnostics
            and self.audits == other.audits
        )


def _exact_row(setup, n, sigma, T_factors, scale):
    cdf = exact_cdf_lattice(setup.chain, setup.xi, setup.mu0, n, scale=scale)
    D = kolmogorov_distance_exact(cdf, sigma)
    bound = min(
        esseen_bound(setup.chain, setup.xi, setup.mu0, n, T=f * np.sqrt(n), sigma=sigma) for f in T_factors
    )
    return RateRow(int(n), D, float(np.sqrt(n) * D), float(bound))


def _burn_in(config, model):
    if config.burn_in != "auto":
        return int(config.burn_in)
    c = float(np.linalg.norm(model.A, 2))
    if c >= 1.0:
        return 1000
    return max(64, int(np.ceil(np.log(1e-16) / np.log(c))) if c > 0 else 1)


def _diagnostics(setup, config):
    diag = {}
    if setup.chain is not None and setup.xi is not None:
        for key, fn in (
            ("kappa0", lambda: ergodicity_profile(setup.chain).kappa0),
            ("h2_value", lambda: h2_series(setup.chain, setup.xi)[0]),
        ):
            try:
                diag[key] = float(fn())
            except CltLabError as exc:
                diag[key] = f"{type(exc).__name__}"
        ts = [t for t in config.t_grid if t != 0]
        try:
            b1, b2, b3 = perturbation_bounds(setup.chain, setup.xi, ts)
            diag.update(b1=b1, b2=b2, b3=b3)
        except CltLabError as exc:
            diag["b1-b3"] = f"{type(exc).__name__}"
    if setup.model is not None:
        diag["c=||A||"] = float(np.linalg.norm(setup.model.A, 2))
    return diag


def _audits(setup, config):
    verdicts = []
    if setup.chain is not None and setup.xi is not None:
        ts = [t for t in config.t_grid if t != 0]
        verdicts += audit_chain(
            setup.chain, setup.xi, config.audit["weight"], ts, config.audit["n_max"], config.seed
        )
    if setup.model is not None:
        verdicts.append(audit_condition_star(setup.model, config.audit["condition_star_samples"], config.seed))
    return tuple(verdicts)


def run_experiment(config, on_row=None, audits=True) -> RateReport:
    """Distances for every ``n`` of the grid, then the exponent fit.

    ``on_row`` is called with each finished row in ``n`` order, so callers
    can persist partial results if a later ``n`` fails.
    """
    setup = build_setup(config)
    workers = worker_count()
    rows = []

    if config.method == "exact_lattice":
        if setup.chain is None:
            raise ValidationError("experiment.method", "exact_lattice needs a finite chain")
        sigma2 = sigma_squared(setup.chain, setup.xi)
        sigma = np.sqrt(max(sigma2, 0.0))
        if sigma <= SIGMA_MIN:
            raise DegenerateVariance(f"sigma^2 = {sigma2!r}")
        scale = config.observable["scale"]

        def job(n):
            return _exact_row(setup, n, sigma, config.esseen_T, scale)

        with ThreadPoolExecutor(max_workers=workers) as ex:
            for row in ex.map(job, config.n_grid):
                rows.append(row)
                if on_row:
                    on_row(row)
        tau, ci = fit_rate_exponent(rows)
        ci_method = "t-interval on OLS residuals"
    else:
        sigma2 = float(setup.sigma2_model)
        sigma = np.sqrt(sigma2)
        if sigma <= SIGMA_MIN:
            raise DegenerateVariance(f"sigma^2 = {sigma2!r}")
        burn = _burn_in(config, setup.model)
        draws = []
        for n in config.n_grid:
            M = config.samples_for(n)
            sums = sample_sums(
                setup.model, setup.xi_fn, n, M, seed=[config.seed, n], burn_in=burn, threads=workers
            )
            z = sums / np.sqrt(n)
            draws.append(z)
            D = kolmogorov_distance_mc(z, sigma)
            row = RateRow(int(n), D, float(np.sqrt(n) * D), float("nan"))
            rows.append(row)
            if on_row:
                on_row(row)
        tau, _ = fit_rate_exponent(rows)
        ci = _bootstrap_ci(config, draws, sigma)
        ci_method = f"percentile bootstrap over path blocks ({config.bootstrap} resamples)"

    _, intercept, _ = _ols([r.n for r in rows], [r.D_n for r in rows])
    return RateReport(
        rows=tuple(rows),
        tau_hat=float(tau),
        tau_ci=(float(ci[0]), float(ci[1])),
        sigma2=float(sigma2),
        method=config.method,
        ci_method=ci_method,
        intercept=intercept,
        diagnostics=_diagnostics(setup, config),
        audits=_audits(setup, config) if audits else (),
        config_echo=config.echo(),
    )


def _bootstrap_ci(config, draws, sigma, level=0.95):
    """Percentile interval for ``tau_hat``: paths are grouped into blocks and
    whole blocks are resampled with replacement at every ``n``."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xB007]))
    taus = np.empty(config.bootstrap)
    blocks = [np.array_split(z, BOOTSTRAP_BLOCKS) for z in draws]
    ns = list(config.n_grid)
    for b in range(config.bootstrap):
        D = []
        for parts in blocks:
            pick = rng.integers(0, len(parts), len(parts))
            D.append(kolmogorov_distance_mc(np.concatenate([parts[i] for i in pick]), sigma))
        slope, _, _ = _ols(ns, D)
        taus[b] = -slope
    lo, hi = np.quantile(taus, [0.5 - level / 2.0, 0.5 + level / 2.0])
    return float(lo), float(hi)
