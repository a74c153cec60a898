"""Hypothesis audits collected as verdicts instead of exceptions."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import ergodicity_profile, stationary_distribution
from .errors import CltLabError
from .models import check_condition_star
from .poisson import h2_series, h3_audit, sigma_squared
from .spectral import doeblin_fortet_audit, perturbation_bounds


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: Optional[bool]  # None when the check does not apply
    detail: str
    constants: dict = field(default_factory=dict)

    @property
    def label(self):
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]


def _guard(name, fn):
    try:
        return fn()
    except CltLabError as exc:
        return Verdict(name, False, f"{type(exc).__name__}: {exc}")


def resolve_weight(chain, weight="auto"):
    if weight == "auto":
        return "W" if chain.V is not None else "sup"
    return weight


def audit_chain(chain, xi, weight="auto", t_grid=(0.01, 0.05, 0.1), n_max=30, seed=0):
    """H1-H4 plus ``sigma^2 > 0`` and the first-order perturbation constants.

    H1 uses the V-weighted norm when the chain carries ``V`` and the sup
    norm otherwise; H3/H4 use ``weight`` (``auto``: ``V^(1/3)`` or 1).
    """
    weight = resolve_weight(chain, weight)
    ts = np.asarray([t for t in t_grid if t != 0], dtype=float)
    out = []

    def h1():
        kind = "V" if chain.V is not None else "sup"
        prof = ergodicity_profile(chain, kind)
        return Verdict(
            "H1",
            True,
            f"geometric ergodicity in the {kind} norm",
            {"kappa0": prof.kappa0, "C": prof.C},
        )

    def variance():
        s2 = sigma_squared(chain, xi)
        return Verdict("sigma2>0", s2 > 1e-14, "asymptotic variance", {"sigma2": s2})

    def h2():
        value, terms = h2_series(chain, xi)
        return Verdict("H2", bool(np.isfinite(value)), "summability series", {"value": value, "terms": terms})

    def h3():
        ratio = h3_audit(chain, xi, weight, ts)
        nu = stationary_distribution(chain).weights
        ceiling = float(nu @ (np.abs(np.asarray(xi, dtype=float)) * chain.weight(weight)))
        ok = bool(np.isfinite(ratio) and ratio <= ceiling + 1e-9)
        return Verdict("H3", ok, f"weight {weight}", {"ratio": ratio, "ceiling": ceiling})

    def h4():
        df = doeblin_fortet_audit(chain, xi, weight, ts, n_max=n_max, seed=seed)
        ok = bool(df.kappa_hat < 1.0 and np.isfinite(df.C_hat) and np.isfinite(df.drift_ratio))
        return Verdict(
            "H4",
            ok,
            f"Doeblin-Fortet fit, weight {weight}",
            {"kappa_hat": df.kappa_hat, "C_hat": df.C_hat, "drift_ratio": df.drift_ratio},
        )

    def perturb():
        b1, b2, b3 = perturbation_bounds(chain, xi, ts)
        ok = bool(np.all(np.isfinite([b1, b2, b3])))
        return Verdict("b1-b3", ok, "first-order constants (tau = 1)", {"b1": b1, "b2": b2, "b3": b3})

    for name, fn in (("H1", h1), ("sigma2>0", variance), ("H2", h2), ("H3", h3), ("H4", h4), ("b1-b3", perturb)):
        out.append(_guard(name, fn))
    return out


def audit_condition_star(model, samples=10_000, seed=0):
    def run():
        cs = check_condition_star(model, samples, seed)
        detail = "moment condition" if cs.moment1_stable else "first moment unstable under doubling"
        return Verdict(
            "condition(*)",
            cs.passed,
            detail,
            {"moment1": cs.moment1, "moment2": cs.moment2, "moment2_se": cs.moment2_se},
        )

    return _guard("condition(*)", run)


def all_passed(verdicts):
    return all(v.passed for v in verdicts if v.passed is not None)


def format_verdicts(verdicts):
    lines = []
    for v in verdicts:
        consts = " ".join(f"{k}={c:.6g}" if isinstance(c, float) else f"{k}={c}" for k, c in v.constants.items())
        lines.append(f"{v.label} {v.name}: {v.detail}" + (f" [{consts}]" if consts else ""))
    return "\n".join(lines)
