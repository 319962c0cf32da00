import math

import numpy as np
import pytest

from roibandit.core import (
    BidGrid,
    Policy,
    RoundOutcome,
    RunConfig,
    ValuationGrid,
    azuma_term,
    dual_utility,
    lagrangian_utility,
    primal_loss,
)


def test_primal_loss_examples():
    assert primal_loss(0, 0, 0, 0, 0.5) == 1.0
    assert primal_loss(1, 0, 0, 0, 0.5) == 0.0
    assert primal_loss(0.5, 0.8, 2, 1, 0.25) == pytest.approx(4.9, abs=1e-12)


@pytest.mark.parametrize("args", [(0, 0, -1, 0, 0.5), (0, 0, 0, -0.1, 0.5), (1.1, 0, 0, 0, 0.5),
                                  (0, -0.1, 0, 0, 0.5), (0, 0, 0, 0, 0.0), (0, 0, 0, 0, 1.5)])
def test_primal_loss_rejects_bad_inputs(args):
    with pytest.raises(ValueError):
        primal_loss(*args)


def test_dual_utility_examples():
    assert dual_utility(0.3, -0.7, 0, 0) == 0
    assert dual_utility(-0.5, 0, 2, 7) == -1.0
    assert dual_utility(0.5, 0.5, 1, 1) == 1.0
    with pytest.raises(ValueError):
        dual_utility(0, 0, -1, 0)


def test_lagrangian_utility_is_reward_minus_penalty():
    assert lagrangian_utility(0.9, 0.1, -0.4, 2.0, 0.5) == pytest.approx(0.9 - 0.2 + 0.2)


def test_azuma_term_examples():
    assert azuma_term(100, 100, 0) == 0.0
    assert azuma_term(0, 10, 0.5) == 0.0
    assert azuma_term(100, 100, 0.05) == pytest.approx(2 * math.sqrt(100 * math.log(4000)))
    assert azuma_term(100, 100, 0.05) == pytest.approx(57.59, abs=0.01)
    with pytest.raises(ValueError):
        azuma_term(10, 10, 1.5)


def test_bid_grid_validation():
    assert BidGrid((0, 0.5, 1)).m == 3
    assert BidGrid((0,)).m == 1
    for bad in [(0.1, 0.5), (0, 0.5, 0.5), (0, 0.7, 0.3), (0, 1.2), ()]:
        with pytest.raises(ValueError):
            BidGrid(bad)


def test_valuation_grid():
    g = ValuationGrid((0.2, 0.6, 1.0))
    assert g.n == 3
    assert g.index(0.6) == 1
    assert g.index(0.6 + 1e-13) == 1
    with pytest.raises(KeyError):
        g.index(0.5)
    with pytest.raises(ValueError):
        ValuationGrid((0.5, 0.5))


def test_run_config():
    rc = RunConfig(T=200, B=50)
    assert rc.rho == 0.25
    for kw in [dict(T=10, B=0.5), dict(T=0, B=1), dict(T=10, B=5, delta=0), dict(T=10, B=5, delta=1.5),
               dict(T=10, B=5, omega=2), dict(T=10, B=5, roi_target=0)]:
        with pytest.raises(ValueError):
            RunConfig(**kw)


def test_round_outcome_gaps_are_derived():
    o = RoundOutcome(f=0.3, c=0.5, rho=0.2)
    assert o.g == pytest.approx(0.3)
    assert o.h == pytest.approx(0.2)


def test_policy_rows():
    p = Policy(np.array([[0.5, 0.5 + 1e-10], [1.0, 0.0]]))
    assert np.all(np.abs(p.probs.sum(axis=1) - 1) <= 1e-15)
    with pytest.raises(ValueError):
        Policy(np.array([[0.5, 0.4]]))
    with pytest.raises(ValueError):
        Policy(np.array([[1.5, -0.5]]))
    assert Policy.void(2, 3).probs[:, 0].tolist() == [1.0, 1.0]
    d = Policy.deterministic([2, 1], 3)
    mixed = Policy.void(2, 3).mix(d, 0.25)
    assert mixed.probs[0].tolist() == [0.75, 0.0, 0.25]
