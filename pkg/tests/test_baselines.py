import numpy as np
import pytest

from roibandit.baselines import (
    compute_alpha_adversarial,
    compute_alpha_stochastic,
    empirical_distribution,
    expected_outcomes,
    safe_policy_stochastic,
    second_price_bids,
    solve_lp,
)
from roibandit.core import BidGrid
from roibandit.environments import FIRST_PRICE, SECOND_PRICE, InputModel, gen_k_safe_script
from roibandit.simplex import UnboundedError, simplex_max

from .oracles import alpha_policy_grid_adversarial, alpha_theta_grid, lp_value_oracle, vertex_lp


def _single(v=1.0, beta=0.5, mechanism=FIRST_PRICE, omega=0.0):
    return InputModel.stochastic(mechanism, [v], [beta], [[1.0]], omega=omega)


def test_simplex_against_vertex_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(30):
        A = rng.uniform(0, 1, (4, 3))
        b = rng.uniform(0, 2, 4)
        c = rng.uniform(-1, 1, 3)
        res = simplex_max(c, A, b)
        val, _ = vertex_lp(c, A, b)
        assert res.value == pytest.approx(val, abs=1e-9)


def test_simplex_errors():
    with pytest.raises(UnboundedError):
        simplex_max([1.0], [[-1.0]], [1.0])
    with pytest.raises(ValueError):
        simplex_max([1.0], [[1.0]], [-1.0])


def test_solve_lp_examples():
    s = solve_lp(_single(), BidGrid((0, 0.5)), 0.5)
    assert s.value == pytest.approx(1.0) and s.status == "optimal"
    assert s.policy.probs[0, 1] == pytest.approx(1.0)
    s = solve_lp(_single(), BidGrid((0, 0.5)), 0.25)
    assert s.value == pytest.approx(0.5) and s.policy.probs[0, 1] == pytest.approx(0.5)
    assert s.expected_gap_budget <= 1e-9 and s.expected_gap_roi <= 1e-9


def test_only_void_feasible():
    # every winning bid costs more than its reward and more than rho
    s = solve_lp(_single(v=0.3, beta=0.5), BidGrid((0, 0.6, 0.8)), 0.2)
    assert s.status == "only-void-feasible" and s.value == 0.0
    assert s.policy.probs[0, 0] == 1.0


def test_empirical_distribution():
    const = InputModel.scripted(FIRST_PRICE, [1.0], [(1.0, 0.5)] * 7)
    gbar = empirical_distribution(const)
    assert gbar.table.tolist() == [[1.0]]
    alt = InputModel.scripted(FIRST_PRICE, [1.0], [(1.0, 0.5), (1.0, 0.2)] * 4)
    assert empirical_distribution(alt).table.tolist() == [[0.5, 0.5]]
    pairs = [(0.5, 0.1), (1.0, 0.1), (1.0, 0.3), (0.5, 0.1), (1.0, 0.3),
             (1.0, 0.3), (0.5, 0.7), (1.0, 0.1), (0.5, 0.1), (1.0, 0.7)]
    t = empirical_distribution(InputModel.scripted(FIRST_PRICE, [0.5, 1.0], pairs))
    assert t.support == (0.1, 0.3, 0.7)
    assert np.allclose(t.table, [[0.3, 0.0, 0.1], [0.2, 0.3, 0.1]])


def test_expected_outcomes_sum_the_table():
    m = InputModel.stochastic(FIRST_PRICE, [0.5, 1.0], [0.2, 0.6], [[0.25, 0.25], [0.1, 0.4]])
    F, C, Pv = expected_outcomes(m, BidGrid((0, 0.2, 0.6)))
    assert Pv.tolist() == [0.5, 0.5]
    assert F[1].tolist() == pytest.approx([0, 0.1, 0.5])
    assert C[0].tolist() == pytest.approx([0, 0.05, 0.3])


def test_alpha_examples():
    assert compute_alpha_stochastic(_single(v=0.3, beta=0.5), BidGrid((0, 0.6)), 0.3) == pytest.approx(0.0)
    # cost 0.1, reward 0.9, rho 0.5: the max-min mixture is p = 5/9 at margin 4/9
    m = _single(v=0.9, beta=0.1)
    a = compute_alpha_stochastic(m, BidGrid((0, 0.1)), 0.5)
    assert a == pytest.approx(4 / 9, abs=1e-12)
    assert a == pytest.approx(alpha_theta_grid([0.9], [0.1], [[1.0]], (0, 0.1), 0.5), abs=2e-3)
    assert compute_alpha_stochastic(m, BidGrid((0, 0.1)), 0.5, include_roi=False) == pytest.approx(0.5)


def test_alpha_adversarial_examples():
    grid = BidGrid((0, 0.2, 0.5))
    const = InputModel.scripted(FIRST_PRICE, [1.0], [(1.0, 0.2)] * 5)
    assert compute_alpha_adversarial(const, grid, 0.4) == pytest.approx(
        compute_alpha_stochastic(empirical_distribution(const), grid, 0.4))
    priced_out = InputModel.scripted(FIRST_PRICE, [1.0], [(1.0, 0.2)] * 4 + [(1.0, 1.0)])
    assert compute_alpha_adversarial(priced_out, grid, 0.4) == pytest.approx(0.0)
    model, cert = gen_k_safe_script(64, 4, 0.1, 3, rho=0.35)
    assert compute_alpha_adversarial(model, BidGrid((0, 0.2, 0.4, 0.6, 0.8, 1.0)), 0.35) == pytest.approx(0.0)
    assert cert.alpha >= 0.1


def test_alpha_adversarial_against_policy_grid():
    rng = np.random.default_rng(8)
    for _ in range(10):
        T = 12
        pairs = [(1.0, float(b)) for b in np.round(rng.uniform(0, 0.7, T), 2)]
        script = InputModel.scripted(FIRST_PRICE, [1.0], pairs)
        bids = (0, 0.3, 0.7)
        rho = float(rng.uniform(0.2, 0.6))
        a = compute_alpha_adversarial(script, BidGrid(bids), rho)
        ref = alpha_policy_grid_adversarial(pairs, [1.0], bids, rho)
        assert a == pytest.approx(ref, abs=2e-3)
        assert a <= compute_alpha_stochastic(empirical_distribution(script), BidGrid(bids), rho) + 1e-12


def test_large_script_margin_uses_row_generation():
    rng = np.random.default_rng(2)
    pairs = np.column_stack([rng.choice([0.6, 1.0], 3000), rng.uniform(0, 0.9, 3000)])
    script = InputModel.scripted(SECOND_PRICE, [0.6, 1.0], pairs, omega=0.0)
    grid = BidGrid((0, 0.3, 0.6, 0.9))
    a = compute_alpha_adversarial(script, grid, 0.3)
    assert 0 <= a <= compute_alpha_stochastic(empirical_distribution(script), grid, 0.3) + 1e-12


def test_safe_policy_achieves_the_margin():
    m = InputModel.stochastic(FIRST_PRICE, [0.5, 1.0], [0.2, 0.4], [[0.3, 0.2], [0.1, 0.4]])
    grid = BidGrid((0, 0.2, 0.4, 0.6))
    a, pol = safe_policy_stochastic(m, grid, 0.2)
    F, C, _ = expected_outcomes(m, grid)
    assert (pol.probs * C).sum() - 0.2 <= -a + 1e-9
    assert (pol.probs * (C - F)).sum() <= -a + 1e-9


def test_second_price_bids_cover_every_win_set():
    m = InputModel.stochastic(SECOND_PRICE, [1.0], [0.0, 0.3, 0.5], [[0.2, 0.3, 0.5]])
    g = second_price_bids(m)
    assert g.bids[0] == 0.0 and g.bids[1:] == pytest.approx((0.15, 0.3, 0.5))


def _random_instance(rng):
    while True:
        n = int(rng.integers(1, 4))
        m = int(rng.integers(2, 5))
        if n * m <= 12:
            break
    vals = sorted(rng.choice([0.3, 0.5, 0.7, 0.9, 1.0], n, replace=False).tolist())
    sup = sorted(rng.choice([0.0, 0.1, 0.25, 0.4, 0.6, 0.8], int(rng.integers(1, 4)), replace=False).tolist())
    bids = [0.0] + sorted(rng.choice([0.1, 0.2, 0.35, 0.5, 0.7, 0.9], m - 1, replace=False).tolist())
    tab = rng.dirichlet(np.ones(n * len(sup))).reshape(n, len(sup))
    tab[-1, -1] += 1.0 - tab.sum()
    rho = float(rng.uniform(0.05, 0.8))
    mech = FIRST_PRICE if rng.random() < 0.6 else SECOND_PRICE
    omega = float(rng.choice([0.0, 0.2]))
    return vals, sup, tab, bids, rho, mech, omega


def test_lp_and_alpha_oracle_equivalence_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        vals, sup, tab, bids, rho, mech, omega = _random_instance(rng)
        model = InputModel.stochastic(mech, vals, sup, tab, omega=omega)
        grid = BidGrid(tuple(bids))
        sol = solve_lp(model, grid, rho)
        assert sol.value == pytest.approx(lp_value_oracle(vals, sup, tab, bids, rho, mech, omega), abs=1e-9)
        assert sol.expected_gap_budget <= 1e-9 and sol.expected_gap_roi <= 1e-9
        a = compute_alpha_stochastic(model, grid, rho)
        assert a == pytest.approx(alpha_theta_grid(vals, sup, tab, bids, rho, mech, omega), abs=2e-3)
