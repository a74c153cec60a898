"""``cltlab <spectral|cf|dist|rate|audit> --config FILE --out DIR [--seed N]``"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .audit import Verdict, all_passed, audit_chain, audit_condition_star, format_verdicts
from .cf import default_t_grid, exact_cf_sn
from .chain import stationary_distribution
from .config import load_config
from .errors import CltLabError, ParseError, ValidationError
from .experiment import build_setup, run_experiment
from .models import IterativeModel, NoiseLaw
from .plotting import cf_plot, spectral_plot
from .report import RATE_HEADER, ReportPaths, emit_report, fmt, write_csv
from .spectral import _b3_ratio, spectral_decompose

SPECTRAL_HEADER = "t,re_lambda,im_lambda,abs_lambda,rho,b1_ratio,b2_ratio,b3_ratio,residual"
CF_HEADER = "n,t,re_phi,im_phi,gap,gap_sqrt_n_over_t"


def _need_chain(setup):
    if setup.chain is None:
        raise ValidationError("model.preset", "this subcommand needs a finite chain (set discretize = true)")
    return setup.chain


def cmd_spectral(config, out):
    setup = build_setup(config)
    chain = _need_chain(setup)
    nu = stationary_distribution(chain).weights
    rows = []
    for t in sorted(config.t_grid):
        sd = spectral_decompose(chain, setup.xi, t, nu)
        if t == 0:
            b1 = b2 = b3 = float("nan")
        else:
            b1 = float(nu @ np.abs(sd.v - 1.0)) / abs(t)
            b2 = abs(sd.phi.sum() - 1.0) / abs(t)
            b3 = _b3_ratio(sd, nu, 20)
        rows.append((t, sd.lam.real, sd.lam.imag, abs(sd.lam), sd.rho, b1, b2, b3, sd.decomposition_residual()))
    path = out / (config.output["csv"] or "spectral.csv")
    write_csv(path, SPECTRAL_HEADER, rows)
    spectral_plot([r[0] for r in rows], [r[3] for r in rows], [r[4] for r in rows], out / (config.output["svg"] or "spectral.svg"))
    return path, 0


def cmd_cf(config, out):
    setup = build_setup(config)
    chain = _need_chain(setup)
    rows, sup_ratio = [], []
    for n in config.n_grid:
        ts = default_t_grid(n, config.cf_points)
        phi = exact_cf_sn(chain, setup.xi, setup.mu0, n, ts)
        gap = np.abs(phi - np.exp(-0.5 * ts**2))
        ratio = gap * np.sqrt(n) / np.abs(ts)
        sup_ratio.append(float(ratio.max()))
        rows += [(int(n), t, p.real, p.imag, g, r) for t, p, g, r in zip(ts, phi, gap, ratio)]
    path = out / (config.output["csv"] or "cf.csv")
    write_csv(path, CF_HEADER, rows)
    cf_plot(list(config.n_grid), sup_ratio, out / (config.output["svg"] or "cf.svg"))
    return path, 0


def _streaming_csv(path):
    fh = open(path, "w", encoding="utf-8")
    fh.write(RATE_HEADER + "\n")
    fh.flush()

    def on_row(row):
        fh.write(",".join(fmt(v) for v in row) + "\n")
        fh.flush()

    return fh, on_row


def cmd_dist(config, out):
    path = out / (config.output["csv"] or "dist.csv")
    fh, on_row = _streaming_csv(path)
    try:
        report = run_experiment(config, on_row=on_row, audits=False)
    finally:
        fh.close()
    write_csv(path, RATE_HEADER, report.rows)
    return path, 0


def cmd_rate(config, out):
    paths = ReportPaths.in_dir(out, **config.output)
    fh, on_row = _streaming_csv(paths.csv)
    try:
        report = run_experiment(config, on_row=on_row)
    finally:
        fh.close()
    emit_report(report, paths)
    print(f"tau_hat = {report.tau_hat:.4f}  CI = [{report.tau_ci[0]:.4f}, {report.tau_ci[1]:.4f}]")
    return paths.summary, 0


def cmd_audit(config, out):
    verdicts = []
    try:
        setup = build_setup(config)
    except CltLabError as exc:
        setup = None
        verdicts.append(Verdict("setup", False, f"{type(exc).__name__}: {exc}"))
    if setup is not None and setup.chain is not None:
        ts = [t for t in config.t_grid if t != 0]
        verdicts += audit_chain(setup.chain, setup.xi, config.audit["weight"], ts, config.audit["n_max"], config.seed)
    if setup is not None and setup.model is not None:
        verdicts.append(audit_condition_star(setup.model, config.audit["condition_star_samples"], config.seed))
    if setup is None and config.preset in ("ar1_scalar", "ar1_vector"):
        # the moment condition does not depend on the discretisation
        m = config.model
        model = IterativeModel(m["A"], NoiseLaw(**m["noise"]), n0=m["n0"])
        verdicts.append(audit_condition_star(model, config.audit["condition_star_samples"], config.seed))
    text = format_verdicts(verdicts)
    print(text)
    path = out / (config.output["summary"] or "audit.txt")
    path.write_text(text + "\n", encoding="utf-8")
    return path, 0 if all_passed(verdicts) else 1


COMMANDS = {
    "spectral": cmd_spectral,
    "cf": cmd_cf,
    "dist": cmd_dist,
    "rate": cmd_rate,
    "audit": cmd_audit,
}


def build_parser():
    p = argparse.ArgumentParser(prog="cltlab", description="Spectral diagnostics and CLT rate experiments for finite Markov chains.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        path, code = COMMANDS[args.command](config, args.out)
    except CltLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
