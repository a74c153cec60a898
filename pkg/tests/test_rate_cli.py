import numpy as np
import pytest

from cltlab.cli import main
from cltlab.config import parse_config
from cltlab.errors import DegenerateInput, DegenerateVariance, ParseError, ValidationError
from cltlab.experiment import RateReport, RateRow, fit_rate_exponent, run_experiment
from cltlab.report import ReportPaths, emit_report

MINIMAL = "[model]\npreset = two_state\np = 0.25\n"


def small(extra=""):
    return MINIMAL + "[experiment]\nn_grid = 16 32 64 128\n" + extra


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model["a"] == cfg.model["b"] == 0.25
    assert cfg.method == "exact_lattice"
    assert cfg.observable["values"] == [1.0, -1.0]
    echo = cfg.echo()
    assert "mc_samples_per_n = auto" in echo and "b = 0.25" in echo


def test_unsorted_grid_rejected():
    with pytest.raises(ValidationError) as err:
        parse_config(MINIMAL + "[experiment]\nn_grid = 64 16 256\n")
    assert err.value.field == "experiment.n_grid"


def test_mc_sample_rule():
    text = "[model]\npreset = ar1_scalar\n[experiment]\nmethod = monte_carlo\nn_grid = 64 256\nmc_samples_per_n = 1000\n"
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.field == "experiment.mc_samples_per_n" and "100" in str(err.value)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as err:
        parse_config("preset = two_state\n")
    assert err.value.lineno == 1
    with pytest.raises(ParseError) as err:
        parse_config("[model]\npreset = two_state\n\nthis line is junk\n")
    assert err.value.lineno == 4
    with pytest.raises(ParseError) as err:
        parse_config("[model]\np = 0.2\np = 0.3\n")
    assert err.value.lineno == 3


def test_unknown_keys_and_values():
    with pytest.raises(ValidationError) as err:
        parse_config("[model]\npreset = two_state\ncolour = red\n")
    assert err.value.field == "model.colour"
    with pytest.raises(ValidationError):
        parse_config("[model]\npreset = nothing\n")
    with pytest.raises(ValidationError):
        parse_config("[model]\np = abc\n")


def test_fit_exact_power_law():
    rows = [(n, n**-0.5) for n in (16, 64, 256, 1024)]
    tau, (lo, hi) = fit_rate_exponent(rows)
    assert tau == pytest.approx(0.5, abs=1e-12)
    assert hi - lo < 1e-10


def test_fit_constant():
    tau, _ = fit_rate_exponent([(n, 0.3) for n in (10, 20, 40)])
    assert tau == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(DegenerateInput):
        fit_rate_exponent([(1, 1.0), (2, 0.5)])
    with pytest.raises(DegenerateInput):
        fit_rate_exponent([(1, 1.0), (2, 0.0), (4, 0.1)])


def test_fit_iid_exact_distances():
    from cltlab.cf import exact_cdf_lattice, kolmogorov_distance_exact
    from cltlab.models import make_two_state

    chain, xi = make_two_state(0.5, 0.5), np.array([1.0, -1.0])
    rows = [(n, kolmogorov_distance_exact(exact_cdf_lattice(chain, xi, None, n), 1.0)) for n in (64, 256, 1024, 4096)]
    tau, _ = fit_rate_exponent(rows)
    assert abs(tau - 0.5) < 0.05


def test_run_exact_small_grid():
    rep = run_experiment(parse_config(small()))
    assert [r.n for r in rep.rows] == [16, 32, 64, 128]
    assert rep.sigma2 == pytest.approx(3.0)
    assert all(r.esseen_bound >= r.D_n for r in rep.rows)
    assert 0.4 < rep.tau_hat < 0.6
    assert all(v.passed for v in rep.audits)


def test_run_is_deterministic_and_scale_invariant():
    a = run_experiment(parse_config(small()))
    b = run_experiment(parse_config(small()))
    assert a == b
    scaled = run_experiment(parse_config(small("[observable]\nvalues = 2 -2\n")))
    assert scaled.tau_hat == pytest.approx(a.tau_hat, abs=1e-12)
    assert scaled.sigma2 == pytest.approx(4 * a.sigma2)


def test_run_degenerate_observable():
    with pytest.raises(DegenerateVariance):
        run_experiment(parse_config(small("[observable]\nvalues = 0 0\n")))


def test_partial_rows_are_reported_before_failure():
    seen = []
    # the last n exceeds the lattice cell budget
    cfg = parse_config(MINIMAL + "[observable]\nvalues = 1000 -1000\n[experiment]\nn_grid = 4 8 2000\n")
    with pytest.raises(Exception):
        run_experiment(cfg, on_row=seen.append)
    assert [r.n for r in seen] == [4, 8]


def test_emit_report_files(tmp_path):
    rep = run_experiment(parse_config(MINIMAL + "[experiment]\nn_grid = 16 32 64\n"))
    paths = emit_report(rep, ReportPaths.in_dir(tmp_path))
    lines = paths.csv.read_text().splitlines()
    assert lines[0] == "n,D_n,sqrt_n_D_n,esseen_bound" and len(lines) == 4
    assert paths.svg.read_text().lstrip().startswith("<?xml")
    summary = paths.summary.read_text()
    for key in ("sigma2:", "kappa0:", "tau_hat:", "tau = 2 * tau_hat", "PASS H1"):
        assert key in summary


def test_emit_report_refuses_empty(tmp_path):
    rep = RateReport(rows=(), tau_hat=0.5, tau_ci=(0.4, 0.6), sigma2=1.0, method="exact_lattice", ci_method="", intercept=0.0)
    with pytest.raises(DegenerateInput):
        emit_report(rep, ReportPaths.in_dir(tmp_path / "out"))
    assert not (tmp_path / "out").exists()


def test_emit_report_is_byte_stable(tmp_path):
    cfg = parse_config(MINIMAL + "[experiment]\nn_grid = 16 32 64\n")
    p1 = emit_report(run_experiment(cfg), ReportPaths.in_dir(tmp_path / "a"))
    p2 = emit_report(run_experiment(cfg), ReportPaths.in_dir(tmp_path / "b"))
    for f1, f2 in ((p1.csv, p2.csv), (p1.svg, p2.svg), (p1.summary, p2.summary)):
        assert f1.read_bytes() == f2.read_bytes()


def test_monte_carlo_small_run():
    text = "[model]\npreset = ar1_scalar\nA = 0.5\n[observable]\nkind = linear\n[experiment]\nmethod = monte_carlo\nn_grid = 8 16 32\nbootstrap = 20\n"
    a = run_experiment(parse_config(text))
    b = run_experiment(parse_config(text))
    assert a == b
    assert a.sigma2 == pytest.approx(4.0)
    assert np.isnan(a.rows[0].esseen_bound)
    assert a.tau_ci[0] < a.tau_ci[1]


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_subcommands(tmp_path, capsys):
    cfg = write(tmp_path, small("[spectral]\nt_grid = -0.1 0 0.1\ncf_points = 8\n"))
    out = tmp_path / "out"
    assert main(["spectral", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "spectral.csv").read_text().splitlines()
    assert lines[0].startswith("t,re_lambda,im_lambda,abs_lambda,rho") and len(lines) == 4
    assert main(["cf", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "cf.csv").read_text().splitlines()[0] == "n,t,re_phi,im_phi,gap,gap_sqrt_n_over_t"
    assert main(["dist", "--config", cfg, "--out", str(out)]) == 0
    assert len((out / "dist.csv").read_text().splitlines()) == 5
    assert main(["rate", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
    assert "seed = 3" in (out / "summary.txt").read_text()
    assert (out / "rate.svg").exists() and (out / "spectral.svg").exists() and (out / "cf.svg").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "[experiment]\nn_grid = 4 2\n")
    assert main(["rate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "experiment.n_grid" in capsys.readouterr().err


def test_cli_audit_exit_codes(tmp_path, capsys):
    ok = write(tmp_path, MINIMAL, "ok.ini")
    assert main(["audit", "--config", ok, "--out", str(tmp_path / "a")]) == 0
    periodic = write(tmp_path, "[model]\npreset = two_state\np = 1\n", "per.ini")
    assert main(["audit", "--config", periodic, "--out", str(tmp_path / "b")]) == 1
    assert "FAIL H1: NoSpectralGap" in capsys.readouterr().out


def test_cli_engine_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "[observable]\nvalues = 0 0\n[experiment]\nn_grid = 4 8 16\n")
    assert main(["rate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "DegenerateVariance" in capsys.readouterr().err


def test_threads_env_does_not_change_results(monkeypatch):
    cfg = parse_config(small())
    monkeypatch.setenv("CLTLAB_THREADS", "1")
    a = run_experiment(cfg, audits=False)
    monkeypatch.setenv("CLTLAB_THREADS", "4")
    b = run_experiment(cfg, audits=False)
    assert a.rows == b.rows


def test_rate_row_is_tuple():
    r = RateRow(4, 0.1, 0.2, 0.3)
    assert tuple(r) == (4, 0.1, 0.2, 0.3) and r[1] == 0.1
