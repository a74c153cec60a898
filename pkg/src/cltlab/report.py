"""Writing rate reports: CSV table, log-log SVG and a text summary."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audit import format_verdicts
from .errors import DegenerateInput
from .plotting import rate_plot

RATE_HEADER = "n,D_n,sqrt_n_D_n,esseen_bound"


def fmt(x):
    """Shortest round-trip text for a float; ints stay ints."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_lines(header, rows):
    return [header] + [",".join(fmt(v) for v in row) for row in rows]


def write_csv(path, header, rows):
    Path(path).write_text("\n".join(csv_lines(header, rows)) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ReportPaths:
    csv: Path
    svg: Path
    summary: Path

    @classmethod
    def in_dir(cls, out, csv="", svg="", summary=""):
        out = Path(out)
        return cls(out / (csv or "rate.csv"), out / (svg or "rate.svg"), out / (summary or "summary.txt"))


def summary_text(report):
    lines = [
        "# Rate report",
        "# tau_hat is the exponent of D_n itself: D_n ~ n^(-tau_hat).",
        "# A bound O(n^(-tau/2)) corresponds to tau = 2 * tau_hat; the n^(-1/2) rate is tau_hat = 0.5.",
        f"method: {report.method}",
        f"sigma2: {report.sigma2!r}",
        f"tau_hat: {report.tau_hat!r}",
        f"tau_ci: [{report.tau_ci[0]!r}, {report.tau_ci[1]!r}] ({report.ci_method})",
    ]
    for key, val in report.diagnostics.items():
        lines.append(f"{key}: {val!r}")
    if report.audits:
        lines.append("")
        lines.append("audits:")
        lines.append(format_verdicts(report.audits))
    if report.config_echo:
        lines.append("")
        lines.append("config:")
        lines.append(report.config_echo.rstrip())
    return "\n".join(lines) + "\n"


def emit_report(report, paths):
    """Write CSV, SVG and summary.  Refuses empty reports before touching
    the file system."""
    if not report.rows:
        raise DegenerateInput("report has no rows")
    Path(paths.csv).parent.mkdir(parents=True, exist_ok=True)
    write_csv(paths.csv, RATE_HEADER, report.rows)
    rate_plot(
        [r.n for r in report.rows],
        [r.D_n for r in report.rows],
        report.tau_hat,
        report.intercept,
        paths.svg,
        bound=[r.esseen_bound for r in report.rows],
    )
    Path(paths.summary).write_text(summary_text(report), encoding="utf-8")
    return paths
