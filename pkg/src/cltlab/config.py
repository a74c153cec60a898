"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Lists are whitespace separated (``n_grid = 64 256 1024``); matrix rows are
separated by ``;`` (``A = 0.5 0.1; 0 0.3``).  ``#`` starts a comment.
Every key not given is filled from ``DEFAULTS`` and echoed back by
:meth:`ExperimentConfig.echo`.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

PRESETS = ("two_state", "birth_death_V", "ar1_scalar", "ar1_vector", "chain_file")
METHODS = ("exact_lattice", "monte_carlo")
NOISE_KINDS = ("uniform_sign", "uniform_interval", "truncated_normal", "pareto_sign")
OBSERVABLE_KINDS = ("values", "labels", "linear", "norm")
MC_FACTOR = 100

DEFAULTS = {
    "model": {
        "preset": "two_state",
        "a": "0.25",
        "b": "",
        "p": "",
        "grid_size": "5",
        "drift": "0.2",
        "A": "0.5",
        "noise": "uniform_sign",
        "noise_scale": "1.0",
        "noise_low": "-1.0",
        "noise_high": "1.0",
        "noise_bound": "3.0",
        "noise_alpha": "2.0",
        "n0": "1",
        "discretize": "auto",
        "disc_grid_size": "61",
        "disc_radius": "3.0",
        "file": "",
    },
    "observable": {
        "kind": "auto",
        "values": "",
        "power": "1.0",
        "coef": "",
        "center": "true",
        "mean": "",
        "sigma2": "",
        "scale": "1.0",
    },
    "initial": {
        "mu0": "stationary",
        "state": "0",
        "weights": "",
    },
    "experiment": {
        "method": "exact_lattice",
        "n_grid": "64 256 1024 4096",
        "mc_samples_per_n": "auto",
        "burn_in": "auto",
        "bootstrap": "200",
        "esseen_T": "1.0",
    },
    "spectral": {
        "t_grid": "-0.3 -0.1 -0.05 -0.01 0.01 0.05 0.1 0.3",
        "cf_points": "64",
        "quad_points": "128",
    },
    "audit": {
        "weight": "auto",
        "n_max": "30",
        "condition_star_samples": "10000",
    },
    "output": {
        "csv": "",
        "svg": "",
        "summary": "",
    },
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    preset: str
    model: dict
    observable: dict
    mu0: dict
    n_grid: tuple
    method: str
    mc_samples_per_n: object  # int, or "auto" for 100 * n at each n
    seed: int
    burn_in: object
    bootstrap: int
    esseen_T: tuple  # multiples of sqrt(n); the bound is the minimum over them
    t_grid: tuple
    cf_points: int
    quad_points: int
    audit: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False)

    def samples_for(self, n):
        if self.mc_samples_per_n == "auto":
            return MC_FACTOR * int(n)
        return int(self.mc_samples_per_n)

    def echo(self):
        lines = []
        for section, items in self.raw.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in items.items()]
            lines.append("")
        return "\n".join(lines)


def _floats(field_name, text):
    try:
        return [float(x) for x in text.split()]
    except ValueError:
        raise ValidationError(field_name, f"expected numbers, got {text!r}") from None


def _float(field_name, text):
    vals = _floats(field_name, text)
    if len(vals) != 1:
        raise ValidationError(field_name, f"expected one number, got {text!r}")
    return vals[0]


def _int(field_name, text):
    try:
        return int(text)
    except ValueError:
        raise ValidationError(field_name, f"expected an integer, got {text!r}") from None


def _bool(field_name, text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValidationError(field_name, f"expected a boolean, got {text!r}")


def _matrix(field_name, text):
    rows = [_floats(field_name, r) for r in text.split(";") if r.strip()]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValidationError(field_name, "expected a square matrix with rows separated by ';'")
    return np.array(rows)


def _read_sections(text):
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",)
    )
    cp.optionxform = str  # keys are case sensitive (A vs a)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside any [section]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()!r}", lineno) from None
    return cp


def parse_config(text, base_dir=".", seed=None) -> ExperimentConfig:
    """Parse and validate; ``seed`` overrides ``[experiment] seed``."""
    cp = _read_sections(text)
    raw = {}
    for section, defaults in DEFAULTS.items():
        raw[section] = dict(defaults)
        if section == "experiment":
            raw[section]["seed"] = "0"
    for section in cp.sections():
        if section not in raw:
            raise ValidationError(section, "unknown section")
        for key, value in cp.items(section):
            if key not in raw[section]:
                raise ValidationError(f"{section}.{key}", "unknown key")
            raw[section][key] = value.strip()
    if seed is not None:
        raw["experiment"]["seed"] = str(int(seed))

    m = raw["model"]
    preset = m["preset"]
    if preset not in PRESETS:
        raise ValidationError("model.preset", f"must be one of {', '.join(PRESETS)}")
    model = {"preset": preset}
    if preset == "two_state":
        if m["p"]:
            a = b = _float("model.p", m["p"])
        else:
            a = _float("model.a", m["a"])
            b = _float("model.b", m["b"]) if m["b"] else a
        for name, val in (("model.a", a), ("model.b", b)):
            if not 0.0 < val <= 1.0:
                raise ValidationError(name, "must lie in (0, 1]")
        model.update(a=a, b=b)
        m["b"] = repr(b)
    elif preset == "birth_death_V":
        model.update(grid_size=_int("model.grid_size", m["grid_size"]), drift=_float("model.drift", m["drift"]))
    elif preset in ("ar1_scalar", "ar1_vector"):
        A = _matrix("model.A", m["A"])
        if preset == "ar1_scalar" and A.shape != (1, 1):
            raise ValidationError("model.A", "ar1_scalar takes a single number")
        noise = m["noise"]
        if noise not in NOISE_KINDS:
            raise ValidationError("model.noise", f"must be one of {', '.join(NOISE_KINDS)}")
        model.update(
            A=A,
            noise=dict(
                kind=noise,
                scale=_float("model.noise_scale", m["noise_scale"]),
                low=_float("model.noise_low", m["noise_low"]),
                high=_float("model.noise_high", m["noise_high"]),
                bound=_float("model.noise_bound", m["noise_bound"]),
                alpha=_float("model.noise_alpha", m["noise_alpha"]),
            ),
            n0=_int("model.n0", m["n0"]),
            disc_grid_size=_int("model.disc_grid_size", m["disc_grid_size"]),
            disc_radius=_float("model.disc_radius", m["disc_radius"]),
        )
        disc = m["discretize"]
        if disc == "auto":
            disc = "true" if preset == "ar1_scalar" else "false"
            m["discretize"] = disc
        model["discretize"] = _bool("model.discretize", disc)
        if model["discretize"] and preset != "ar1_scalar":
            raise ValidationError("model.discretize", "only scalar AR(1) can be discretised")
    else:
        if not m["file"]:
            raise ValidationError("model.file", "chain_file preset needs a file")
        model["file"] = str(Path(base_dir) / m["file"])

    o = raw["observable"]
    kind = o["kind"]
    if kind == "auto":
        if preset == "two_state":
            kind = "values"
            o["values"] = o["values"] or "1 -1"
        elif preset in ("ar1_scalar", "ar1_vector") and not model.get("discretize"):
            kind = "linear"
        else:
            kind = "labels"
        o["kind"] = kind
    if kind not in OBSERVABLE_KINDS:
        raise ValidationError("observable.kind", f"must be one of {', '.join(OBSERVABLE_KINDS)}")
    observable = {
        "kind": kind,
        "values": _floats("observable.values", o["values"]) if o["values"] else None,
        "power": _float("observable.power", o["power"]),
        "coef": _floats("observable.coef", o["coef"]) if o["coef"] else None,
        "center": _bool("observable.center", o["center"]),
        "mean": _float("observable.mean", o["mean"]) if o["mean"] else None,
        "sigma2": _float("observable.sigma2", o["sigma2"]) if o["sigma2"] else None,
        "scale": _float("observable.scale", o["scale"]),
    }
    if kind == "values" and observable["values"] is None:
        raise ValidationError("observable.values", "kind = values needs a list of values")

    i = raw["initial"]
    if i["mu0"] not in ("stationary", "point", "custom"):
        raise ValidationError("initial.mu0", "must be stationary, point or custom")
    mu0 = {
        "kind": i["mu0"],
        "state": _int("initial.state", i["state"]),
        "weights": _floats("initial.weights", i["weights"]) if i["weights"] else None,
    }
    if mu0["kind"] == "custom" and mu0["weights"] is None:
        raise ValidationError("initial.weights", "mu0 = custom needs weights")

    e = raw["experiment"]
    method = e["method"]
    if method not in METHODS:
        raise ValidationError("experiment.method", f"must be one of {', '.join(METHODS)}")
    n_grid = tuple(_int("experiment.n_grid", x) for x in e["n_grid"].split())
    if not n_grid:
        raise ValidationError("experiment.n_grid", "empty")
    if any(n < 1 for n in n_grid):
        raise ValidationError("experiment.n_grid", "entries must be >= 1")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValidationError("experiment.n_grid", "must be strictly increasing")
    mc = e["mc_samples_per_n"]
    if mc != "auto":
        mc = _int("experiment.mc_samples_per_n", mc)
        if method == "monte_carlo" and mc < MC_FACTOR * max(n_grid):
            raise ValidationError(
                "experiment.mc_samples_per_n",
                f"need at least {MC_FACTOR} * n = {MC_FACTOR * max(n_grid)} samples "
                f"(statistical floor M^-1/2 must sit below n^-1/2)",
            )
    burn = e["burn_in"]
    if burn != "auto":
        burn = _int("experiment.burn_in", burn)
    esseen_T = tuple(_floats("experiment.esseen_T", e["esseen_T"]))
    if not esseen_T or any(T <= 0 for T in esseen_T):
        raise ValidationError("experiment.esseen_T", "multipliers must be positive")
    if method == "monte_carlo" and preset not in ("ar1_scalar", "ar1_vector"):
        raise ValidationError("experiment.method", "monte_carlo needs an iterative-model preset")

    s = raw["spectral"]
    t_grid = tuple(_floats("spectral.t_grid", s["t_grid"]))
    if not t_grid:
        raise ValidationError("spectral.t_grid", "empty")

    a = raw["audit"]
    if a["weight"] not in ("auto", "sup", "V", "W", "U"):
        raise ValidationError("audit.weight", "must be auto, sup, V, W or U")

    return ExperimentConfig(
        preset=preset,
        model=model,
        observable=observable,
        mu0=mu0,
        n_grid=n_grid,
        method=method,
        mc_samples_per_n=mc,
        seed=_int("experiment.seed", e["seed"]),
        burn_in=burn,
        bootstrap=_int("experiment.bootstrap", e["bootstrap"]),
        esseen_T=esseen_T,
        t_grid=t_grid,
        cf_points=_int("spectral.cf_points", s["cf_points"]),
        quad_points=_int("spectral.quad_points", s["quad_points"]),
        audit={
            "weight": a["weight"],
            "n_max": _int("audit.n_max", a["n_max"]),
            "condition_star_samples": _int("audit.condition_star_samples", a["condition_star_samples"]),
        },
        output=dict(raw["output"]),
        raw=raw,
        base_dir=Path(base_dir),
    )


def load_config(path, seed=None):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent, seed=seed)
