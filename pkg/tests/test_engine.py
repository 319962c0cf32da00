import numpy as np
import pytest

from roibandit.core import BidGrid, RunConfig
from roibandit.environments import FIRST_PRICE, SECOND_PRICE, InputModel
from roibandit.engine import TRACE_COLUMNS, run_framework, run_second_price
from roibandit.primal import Exp3SixBank

from .oracles import simulate_framework


def test_never_win_environment():
    T = 50
    env = InputModel.scripted(FIRST_PRICE, [0.8], [(0.8, 1.0)] * T)
    tr = run_framework(env, BidGrid((0, 0.5)), RunConfig(T=T, B=10), seed=3)
    assert np.all(tr.f == 0) and np.all(tr.c == 0)
    assert np.all(tr.lam == 0) and np.all(tr.mu == 0)
    assert tr.spend == 0 and tr.tau == T + 1


def test_single_round_void_grid():
    env = InputModel.scripted(FIRST_PRICE, [1.0], [(1.0, 0.2)])
    tr = run_framework(env, BidGrid((0,)), RunConfig(T=1, B=1), seed=0)
    assert tr.x.tolist() == [0.0] and tr.spend == 0


def test_ten_round_trace_matches_straight_line_simulation():
    T, B = 10, 5.0
    script = [(1.0, 0.5)] * T
    env = InputModel.scripted(FIRST_PRICE, [1.0], script)
    bids = (0.0, 0.5, 0.6)
    for seed in range(20):
        tr = run_framework(env, BidGrid(bids), RunConfig(T=T, B=B), seed)
        ref = simulate_framework(script, bids, B, seed)
        for i, (x, f, c, lam, mu, budget) in enumerate(ref):
            assert tr.x[i] == x and tr.f[i] == f and tr.c[i] == c
            assert tr.lam[i] == pytest.approx(lam, abs=1e-12) and tr.mu[i] == pytest.approx(mu, abs=1e-12)
            assert tr.budget_remaining[i] == pytest.approx(budget, abs=1e-12)
        assert tr.spend <= B
        starts = np.concatenate([[B], tr.budget_remaining[:-1]])
        assert np.array_equal(tr.depleted, starts < 1.0)
        expected_tau = int(np.argmax(starts < 1)) + 1 if np.any(starts < 1) else T + 1
        assert tr.tau == expected_tau


def test_depleted_rounds_play_void():
    env = InputModel.stochastic(FIRST_PRICE, [1.0], [0.0], [[1.0]])
    tr = run_framework(env, BidGrid((0, 0.9, 1.0)), RunConfig(T=2000, B=50), seed=1)
    assert tr.tau <= 2000
    after = slice(tr.tau - 1, None)
    assert np.all(tr.x[after] == 0) and np.all(tr.f[after] == 0) and np.all(tr.c[after] == 0)
    assert np.all(tr.depleted[after]) and not tr.depleted[: tr.tau - 1].any()
    assert tr.spend <= 50
    assert np.all(np.diff(tr.budget_remaining) <= 0)


def test_second_price_truthful_when_never_winning():
    env = InputModel.scripted(SECOND_PRICE, [0.3, 0.6], [(0.3, 0.9), (0.6, 0.95)] * 20, omega=1.0)
    tr = run_second_price(env, RunConfig(T=40, B=10, omega=1.0), seed=0)
    assert np.array_equal(tr.x, tr.v)
    assert np.all(tr.lam == 0) and np.all(tr.mu == 0)


def test_second_price_unit_budget_example():
    T = 30
    env = InputModel.scripted(SECOND_PRICE, [1.0], [(1.0, 0.4)] * T, omega=1.0)
    tr = run_second_price(env, RunConfig(T=T, B=T, omega=1.0), seed=0)
    assert np.allclose(tr.f[:-1], 0.6)
    assert np.allclose(tr.g[:-1], -0.6) and np.allclose(tr.h[:-1], -0.2)
    assert np.all(tr.lam == 0) and np.all(tr.mu == 0)


def test_second_price_budget_exhaustion():
    env = InputModel.stochastic(SECOND_PRICE, [1.0], [0.3, 0.6], [[0.5, 0.5]])
    rc = RunConfig(T=3000, B=200)
    tr = run_second_price(env, rc, seed=4)
    assert tr.tau < rc.T
    assert tr.spend <= rc.B
    assert tr.spend == pytest.approx(tr.c.sum(), abs=1e-9)
    with pytest.raises(ValueError):
        run_second_price(InputModel.stochastic(FIRST_PRICE, [1.0], [0.3], [[1.0]]), RunConfig(T=5, B=2), 0)


def test_determinism_and_stream_separation():
    env = InputModel.stochastic(SECOND_PRICE, [0.5, 1.0], [0.2, 0.6], [[0.2, 0.3], [0.3, 0.2]])
    rc = RunConfig(T=500, B=100)
    a = run_framework(env, BidGrid((0, 0.3, 0.7)), rc, seed=123)
    b = run_framework(env, BidGrid((0, 0.3, 0.7)), rc, seed=123)
    for col in ("v", "beta", "x", "f", "c", "lam", "mu", "budget_remaining"):
        assert np.array_equal(getattr(a, col), getattr(b, col))
    closed = run_second_price(env, rc, seed=123)
    assert np.array_equal(closed.v, a.v) and np.array_equal(closed.beta, a.beta)
    other = run_framework(env, BidGrid((0, 0.3, 0.7)), rc, seed=124)
    assert not np.array_equal(other.beta, a.beta)


def test_configuration_mismatches():
    env = InputModel.scripted(FIRST_PRICE, [0.5, 1.0], [(1.0, 0.2)] * 10)
    with pytest.raises(ValueError, match="bank"):
        run_framework(env, BidGrid((0, 0.5)), RunConfig(T=10, B=2), 0, bank=Exp3SixBank(1, 2, 10))
    with pytest.raises(ValueError, match="script length"):
        run_framework(env, BidGrid((0, 0.5)), RunConfig(T=11, B=2), 0)
    with pytest.raises(ValueError, match="omega"):
        run_framework(env, BidGrid((0, 0.5)), RunConfig(T=10, B=2, omega=0.5), 0)


def test_trace_records():
    env = InputModel.stochastic(FIRST_PRICE, [1.0], [0.3], [[1.0]])
    tr = run_framework(env, BidGrid((0, 0.5)), RunConfig(T=5, B=2), 0)
    recs = tr.records
    assert len(recs) == 5 and recs[0].t == 1
    assert len(TRACE_COLUMNS) == 12
    r = recs[2]
    assert r.g == pytest.approx(r.c - tr.rho) and r.h == pytest.approx(r.c - r.f)
