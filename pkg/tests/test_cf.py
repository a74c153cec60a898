import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cltlab.cf import (
    LatticeCdf,
    cf_gap_profile,
    dkw_radius,
    esseen_bound,
    exact_cdf_lattice,
    exact_cf_sn,
    exact_cf_tn,
    kolmogorov_distance_exact,
    kolmogorov_distance_mc,
    martingale_audit,
    normal_cdf,
    pair_chain,
)
from cltlab.chain import center_observable, stationary_distribution
from cltlab.errors import DegenerateVariance, EmptySample, GridTooLarge, NotLattice
from cltlab.models import make_iid, make_two_state
from cltlab.poisson import clt_diagnostics, sigma_squared

from conftest import random_chain

# Phi(x) to 20 digits (mpmath ncdf, 30-digit working precision)
PHI_TABLE = [
    (-8.0, 6.2209605742717841235e-16),
    (-5.0, 2.8665157187919391167e-7),
    (-3.0, 0.0013498980316300945267),
    (-2.5, 0.006209665325776135167),
    (-2.0, 0.0227501319481792072),
    (-1.5, 0.066807201268858066004),
    (-1.0, 0.15865525393145705141),
    (-0.5, 0.30853753872598689636),
    (-0.1, 0.46017216272297101633),
    (0.0, 0.5),
    (0.1, 0.53982783727702898367),
    (0.5, 0.69146246127401310364),
    (1.0, 0.84134474606854294859),
    (1.5, 0.933192798731141934),
    (2.0, 0.9772498680518207928),
    (2.5, 0.99379033467422386483),
    (3.0, 0.99865010196836990547),
    (4.0, 0.99996832875816688008),
    (6.0, 0.99999999901341235496),
    (8.5, 0.99999999999999999052),
]


def test_normal_cdf_table():
    for x, ref in PHI_TABLE:
        assert abs(normal_cdf(x) - ref) <= 1e-12


def test_cf_trivial_cases(sym):
    chain, xi = sym
    assert exact_cf_sn(chain, xi, None, 5, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert exact_cf_sn(chain, np.zeros(2), None, 5, 0.7, normalize=False) == pytest.approx(1.0)
    with pytest.raises(DegenerateVariance):
        exact_cf_sn(chain, np.zeros(2), None, 5, 0.7)


def test_cf_iid_closed_form(iid_signs):
    val = exact_cf_sn(*iid_signs, None, 4, 1.0)
    assert abs(val - np.cos(0.5) ** 4) < 1e-14
    ts = np.linspace(-10, 10, 41)
    assert np.allclose(exact_cf_sn(*iid_signs, None, 64, ts), np.cos(ts / 8) ** 64, atol=1e-13)


def test_cf_modulus_and_conjugacy(family):
    ts = np.linspace(0.1, 5.0, 25)
    for chain, xi in family[:10]:
        a = exact_cf_sn(chain, xi, None, 30, ts)
        b = exact_cf_sn(chain, xi, None, 30, -ts)
        assert np.all(np.abs(a) <= 1 + 1e-12)
        assert np.max(np.abs(a - np.conj(b))) < 1e-12


def test_cf_matches_lattice_law():
    rng = np.random.default_rng(5)
    chain = random_chain(rng, 4)
    raw = rng.integers(-3, 4, size=4).astype(float)
    cdf = exact_cdf_lattice(chain, raw, "stationary", 40)
    s = 1.7
    ts = np.linspace(-6, 6, 31)
    direct = exact_cf_sn(chain, raw, None, 40, ts, sigma=s)
    assert np.max(np.abs(direct - cdf.characteristic(ts, s))) < 1e-9


def test_tn_equals_sn_for_iid():
    chain = make_iid([0.5, 0.5])
    xi = np.array([1.0, -1.0])
    ts = np.linspace(-3, 3, 13)
    assert np.allclose(exact_cf_tn(chain, xi, 20, ts), exact_cf_sn(chain, xi, None, 20, ts), atol=1e-13)


def test_tn_constant_bounded_under_doubling(sym):
    chain, xi = sym
    C = [abs(exact_cf_tn(chain, xi, n, 1.0) - np.exp(-0.5)) * np.sqrt(n) for n in (16, 32, 64, 128)]
    assert all(b <= a for a, b in zip(C, C[1:]))
    assert C[0] < 0.1


def test_tn_against_path_enumeration(asym):
    chain, xi = asym
    d = clt_diagnostics(chain, xi)
    nu = d.nu
    n, t, s = 3, 0.8, np.sqrt(d.sigma2)
    total = 0.0
    for path in itertools.product(range(2), repeat=n + 1):
        p = nu[path[0]] * np.prod([chain.P[a, b] for a, b in zip(path, path[1:])])
        T = sum(d.xi_breve[b] - d.q_xi_breve[a] for a, b in zip(path, path[1:]))
        total += p * np.exp(1j * t * T / (s * np.sqrt(n)))
    assert abs(exact_cf_tn(chain, xi, n, t) - total) < 1e-13


def test_pair_chain_stationary_marginals(family):
    for chain, xi in family[:10]:
        pc = pair_chain(chain, xi)
        nu = stationary_distribution(chain).weights
        nu2 = pc.stationary(nu)
        k = chain.n_states
        assert np.max(np.abs(nu2.reshape(k, k).sum(axis=1) - nu)) < 1e-12
        assert np.max(np.abs(nu2.reshape(k, k).sum(axis=0) - nu)) < 1e-12
        assert abs(nu2 @ pc.observable()) < 1e-12
        P2 = pc.matrix()
        assert np.allclose(P2.sum(axis=1), 1.0)
        g = np.random.default_rng(0).normal(size=k * k)
        assert np.allclose(pc.apply(g), P2 @ g)


def test_gap_profile_iid_closed_form(iid_signs):
    rows = cf_gap_profile(*iid_signs, n_list=(16, 64))
    for n, val in rows:
        ts = np.linspace(0, np.sqrt(n), 513)[1:]
        closed = np.sqrt(n) * np.max(np.abs(np.cos(ts / np.sqrt(n)) ** n - np.exp(-ts**2 / 2)) / ts)
        assert abs(val - closed) < 1e-12


def test_gap_profile_bounded_for_iid(iid_signs):
    vals = [v for _, v in cf_gap_profile(*iid_signs, n_list=(16, 64, 256, 1024, 4096))]
    assert max(vals) < 0.03


def test_gap_halves_when_n_doubles(iid_signs, sym):
    for chain, xi in (iid_signs, sym):
        gaps = [abs(exact_cf_sn(chain, xi, None, n, 1.0) - np.exp(-0.5)) for n in (32, 64, 128, 256)]
        for a, b in zip(gaps, gaps[1:]):
            assert 1.6 <= a / b <= 2.5


def test_gap_profile_degenerate(sym):
    with pytest.raises(DegenerateVariance):
        cf_gap_profile(sym[0], np.zeros(2))


def test_martingale_symmetric(sym):
    rep = martingale_audit(*sym)
    assert rep.increment_mean < 1e-12
    assert rep.conditional_variance < 1e-12
    d = clt_diagnostics(*sym)
    chain = sym[0]
    # E[U^2 | X_prev = x] = sum_y P(x,y) (g(y) - Qg(x))^2 equals sigma^2 = 3 in both states
    cond = [(chain.P[x] * (d.xi_breve - d.q_xi_breve[x]) ** 2).sum() for x in range(2)]
    assert np.allclose(cond, 3.0, atol=1e-12)


def test_martingale_iid():
    chain = make_iid([0.2, 0.5, 0.3])
    xi = center_observable(chain, [1.0, -2.0, 4.0]).values
    d = clt_diagnostics(chain, xi)
    assert np.allclose(d.psi_breve, d.psi, atol=1e-13)
    assert np.allclose(chain.P @ d.psi, 0.0, atol=1e-13)
    assert martingale_audit(chain, xi).lag_identity < 1e-12


def test_martingale_family(family):
    for chain, xi in family:
        rep = martingale_audit(chain, xi, horizon=10)
        assert max(rep.increment_mean, rep.conditional_variance, rep.lag_identity, rep.path_identity, rep.green_identity) < 1e-10


def test_decomposition_on_enumerated_paths(asym):
    chain, xi = asym
    d = clt_diagnostics(chain, xi)
    count = 0
    for path in itertools.product(range(2), repeat=4):
        S = sum(xi[y] for y in path[1:])
        T = sum(d.xi_breve[b] - d.q_xi_breve[a] for a, b in zip(path, path[1:]))
        V = d.q_xi_breve[path[0]] - d.q_xi_breve[path[-1]]
        assert abs(S - T - V) < 1e-14
        count += 1
    assert count == 16  # paths X_0..X_3, i.e. 8 continuations of each start state


def test_lattice_small_cases(iid_signs):
    one = exact_cdf_lattice(*iid_signs, None, 1)
    assert one.atoms == [(-1.0, 0.5), (1.0, 0.5)]
    four = exact_cdf_lattice(*iid_signs, None, 4)
    assert np.allclose(four.values, [-4, -2, 0, 2, 4])
    assert np.allclose(four.probs, np.array([1, 4, 6, 4, 1]) / 16, atol=1e-16)


def test_lattice_total_probability():
    rng = np.random.default_rng(9)
    chain = random_chain(rng, 3)
    xi = rng.integers(-4, 5, size=3).astype(float)
    cdf = exact_cdf_lattice(chain, xi, None, 100)
    assert abs(cdf.probs.sum() - 1.0) < 1e-12
    assert np.all(np.diff(cdf.values) > 0)


def test_lattice_scaling_and_errors(sym):
    chain, _ = sym
    half = exact_cdf_lattice(chain, [0.5, -0.5], None, 3, scale=2.0)
    assert np.allclose(half.values, [-1.5, -0.5, 0.5, 1.5])
    with pytest.raises(NotLattice):
        exact_cdf_lattice(chain, [0.5, -0.5], None, 3)
    with pytest.raises(GridTooLarge):
        exact_cdf_lattice(chain, [1000.0, -1000.0], None, 1000)


def test_kolmogorov_exact_d4(iid_signs):
    cdf = exact_cdf_lattice(*iid_signs, None, 4)
    assert abs(kolmogorov_distance_exact(cdf, 1.0) - 0.1875) < 1e-15


def test_kolmogorov_exact_self_distance():
    h = 1e-3
    x = np.arange(-8, 8 + h / 2, h)
    probs = np.diff(np.concatenate([[0.0], normal_cdf(x + h / 2)]))
    probs[-1] += 1 - probs.sum()
    cdf = LatticeCdf(values=x, probs=probs, n=1)
    # each atom carries at most h * phi(0) mass
    assert kolmogorov_distance_exact(cdf, 1.0) <= h / np.sqrt(2 * np.pi) + 1e-12


def test_kolmogorov_iid_rate_is_stable(iid_signs):
    vals = []
    for n in (256, 1024, 4096):
        vals.append(np.sqrt(n) * kolmogorov_distance_exact(exact_cdf_lattice(*iid_signs, None, n), 1.0))
    assert max(vals) / min(vals) < 1.1


def test_mc_distance_normal_sample():
    z = np.random.default_rng(123).standard_normal(1_000_000)
    assert kolmogorov_distance_mc(z) <= 0.002
    assert dkw_radius(1_000_000, 0.99) < 0.002


def test_mc_distance_edge_cases():
    assert kolmogorov_distance_mc([0.0]) == 0.5
    with pytest.raises(EmptySample):
        kolmogorov_distance_mc([])
    z = np.random.default_rng(1).standard_normal(500)
    assert kolmogorov_distance_mc(np.concatenate([z, z])) == pytest.approx(kolmogorov_distance_mc(z), abs=1e-15)


def test_esseen_gaussian_injected():
    val = esseen_bound(None, None, n=1, T=10.0, cf=lambda t: np.exp(-(t**2) / 2))
    assert abs(val - 0.304768) < 2e-6  # 0.3047695 printed to six places
    assert abs(val - 24 / (np.pi * 10 * np.sqrt(2 * np.pi))) < 1e-12
    vals = [esseen_bound(None, None, T=T, cf=lambda t: np.exp(-(t**2) / 2)) for T in (1, 2, 5, 10)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_esseen_dominates_exact(iid_signs, sym):
    for chain, xi in (iid_signs, sym):
        for n in (16, 256, 1024):
            D = kolmogorov_distance_exact(exact_cdf_lattice(chain, xi, None, n), np.sqrt(sigma_squared(chain, xi)))
            assert esseen_bound(chain, xi, None, n) >= D


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(1, 30), st.integers(0, 10_000))
def test_lattice_law_property(k, n, seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, k)
    xi = rng.integers(-3, 4, size=k).astype(float)
    cdf = exact_cdf_lattice(chain, xi, None, n)
    assert abs(cdf.probs.sum() - 1.0) < 1e-12
    nu = stationary_distribution(chain).weights
    assert abs(cdf.values @ cdf.probs - n * (nu @ xi)) < 1e-9 * max(1.0, n)
