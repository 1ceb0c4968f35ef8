import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droo.errors import ConvergenceError, DomainError
from droo.solver import (
    SolverConfig,
    grid_oracle_p2,
    marginal_gain,
    rho_from_marginal,
    solve_batch,
    solve_p2,
)
from droo.system import SystemParams, local_rate, weighted_sum_rate

P = SystemParams()
P1 = SystemParams(n=1, weights=[1.0])
EPS = P.bandwidth_hz / (P.vu * np.log(2.0))


def random_instance(gen, n=10):
    h = gen.exponential(size=n) * 10 ** gen.uniform(-6.5, -5, size=n)
    x = gen.integers(0, 2, n)
    return h, x


def test_rho_inverse_matches_marginal_gain():
    rho = np.logspace(-12, 10, 500)
    back = rho_from_marginal(marginal_gain(rho))
    np.testing.assert_allclose(back, rho, rtol=1e-12)
    assert rho_from_marginal(0.0) == 0.0


def test_marginal_gain_small_argument_series():
    rho = np.array([1e-9, 1e-5, 1e-3, 0.05])
    # ln(1+r) - r/(1+r) = r^2/2 - 2r^3/3 + 3r^4/4 - ...
    series = rho**2 / 2 - 2 * rho**3 / 3 + 3 * rho**4 / 4 - 4 * rho**5 / 5 + 5 * rho**6 / 6
    np.testing.assert_allclose(marginal_gain(rho[:3]), series[:3], rtol=1e-12)
    assert marginal_gain(0.05) == pytest.approx(np.log1p(0.05) - 0.05 / 1.05, rel=1e-13)


def test_all_local_closed_form():
    h = np.linspace(1e-6, 1e-5, 10)
    r = solve_p2(h, np.zeros(10), P)
    assert r.a == 1.0
    assert np.all(r.tau == 0)
    expected = np.sum(P.weights * P.eta1 * np.cbrt(h / P.energy_coeff))
    assert r.q == pytest.approx(expected, rel=1e-12)


def test_single_offloader_matches_fine_grid():
    h = np.array([1e-5])
    r = solve_p2(h, [1], P1)
    o = grid_oracle_p2(h, [1], P1, resolution=1e-4)
    assert r.q == pytest.approx(o.q, rel=1e-3)
    assert r.q >= o.q - 1e-9 * o.q
    assert r.a + r.tau.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_gain_offloader_is_ignored():
    gen = np.random.default_rng(3)
    h, _ = random_instance(gen)
    h[4] = 0.0
    x = np.zeros(10, int)
    x[4] = 1
    base = solve_p2(h, np.zeros(10), P)
    r = solve_p2(h, x, P)
    assert r.q == pytest.approx(base.q, rel=1e-12)
    assert r.tau[4] == 0.0 and r.a == 1.0


def test_oracle_all_local_hits_endpoint():
    h = np.full(10, 2e-6)
    o = grid_oracle_p2(h, np.zeros(10), P)
    assert o.a == 1.0


def test_oracle_never_beats_solver_on_two_offloaders():
    gen = np.random.default_rng(11)
    p2 = SystemParams(n=2)
    for _ in range(20):
        h = gen.exponential(size=2) * 5e-6
        r = solve_p2(h, [1, 1], p2)
        o = grid_oracle_p2(h, [1, 1], p2, resolution=1e-3)
        assert o.q <= r.q * (1 + 1e-12) + 1e-6


def test_solver_agrees_with_independent_oracle():
    gen = np.random.default_rng(2024)
    for _ in range(25):
        h, x = random_instance(gen)
        r = solve_p2(h, x, P)
        o = grid_oracle_p2(h, x, P, resolution=1e-3)
        assert r.q >= o.q - 1e-3 * max(o.q, 1.0)
        # the grid is a feasible lower bound, so the exact answer is never much above it
        assert r.q <= o.q * (1 + 1e-3)


def test_reported_q_matches_rate_formulas():
    gen = np.random.default_rng(8)
    for _ in range(20):
        h, x = random_instance(gen)
        r = solve_p2(h, x, P)
        assert r.q == pytest.approx(weighted_sum_rate(h, x, r.a, r.tau, P), rel=1e-10)


def test_equal_marginal_rates_at_optimum():
    gen = np.random.default_rng(5)
    for _ in range(30):
        h, x = random_instance(gen)
        x[:3] = 1
        r = solve_p2(h, x, P)
        S = np.flatnonzero((x == 1) & (h > 0))
        rho = P.snr_coeff * h[S] ** 2 * r.a / r.tau[S]
        marg = P.weights[S] * EPS * marginal_gain(rho)
        assert np.ptp(marg) <= 1e-6 * marg.max()


def test_a_is_stationary():
    """Nudging a (re-solving tau at the fixed SNRs) never improves q."""
    gen = np.random.default_rng(6)
    for _ in range(20):
        h, x = random_instance(gen)
        r = solve_p2(h, x, P)
        if r.a in (0.0, 1.0):
            continue
        for da in (-1e-4, 1e-4):
            a2 = r.a + da
            tau2 = r.tau * (1 - a2) / r.tau.sum() if r.tau.sum() > 0 else r.tau
            assert weighted_sum_rate(h, x, a2, tau2, P) <= r.q * (1 + 1e-12)


def test_batch_rows_are_independent():
    gen = np.random.default_rng(9)
    h, _ = random_instance(gen)
    X = gen.integers(0, 2, (40, 10))
    full = solve_batch(h, X, P)
    for i in (0, 7, 39):
        one = solve_batch(h, X[i], P)
        assert one.q[0] == full.q[i]
        assert one.a[0] == full.a[i]


def test_per_row_gains():
    gen = np.random.default_rng(10)
    H = np.stack([random_instance(gen)[0] for _ in range(5)])
    X = gen.integers(0, 2, (5, 10))
    res = solve_batch(H, X, P)
    for i in range(5):
        assert res.q[i] == solve_batch(H[i], X[i], P).q[0]


def test_errors():
    with pytest.raises(DomainError):
        solve_p2(np.ones(9) * 1e-6, np.zeros(10), P)
    with pytest.raises(DomainError):
        solve_p2(np.ones(10) * 1e-6, np.full(10, 2), P)
    with pytest.raises(DomainError):
        grid_oracle_p2(np.ones(10) * 1e-6, np.zeros(10), P, resolution=0.5)
    with pytest.raises(DomainError):
        SolverConfig(budget_tol=0)
    with pytest.raises(ConvergenceError):
        solve_p2(np.full(10, 3e-6), np.ones(10), P, SolverConfig(max_iter=1))


decisions = st.lists(st.integers(0, 1), min_size=10, max_size=10)
gain_vec = st.lists(st.floats(1e-8, 1e-4), min_size=10, max_size=10)


@settings(max_examples=300, deadline=None)
@given(h=gain_vec, x=decisions, zero=st.lists(st.booleans(), min_size=10, max_size=10))
def test_feasibility_and_structure(h, x, zero):
    h = np.where(zero, 0.0, h)
    x = np.array(x)
    r = solve_p2(h, x, P)
    assert 0.0 <= r.a <= 1.0
    assert r.a + r.tau.sum() <= 1 + 1e-9
    assert np.all(r.tau >= 0)
    assert np.all(r.tau[(x == 0) | (h == 0)] == 0)
    assert r.q >= 0 and np.isfinite(r.q)


@settings(max_examples=150, deadline=None)
@given(h=gain_vec, x=decisions, i=st.integers(0, 9), bump=st.floats(1.0, 5.0))
def test_monotone_in_gain(h, x, i, bump):
    h = np.array(h)
    h2 = h.copy()
    h2[i] *= bump
    assert solve_p2(h2, x, P).q >= solve_p2(h, x, P).q * (1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(h=st.floats(1e-8, 1e-4))
def test_pure_local_optimum_at_full_harvest(h):
    r = solve_p2([h], [0], P1)
    assert r.a == 1.0
    assert r.q == pytest.approx(local_rate(h, 1e-26, 1.0, P1), rel=1e-12)
