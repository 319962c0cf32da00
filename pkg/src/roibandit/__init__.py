"""Primal-dual bidding under a hard budget and a soft ROI constraint."""

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
from roibandit.dual import DualState, RateSchedule, dual_step, make_rates
from roibandit.primal import Exp3SixBank, second_price_bid
from roibandit.environments import InputModel
from roibandit.baselines import (
    LpSolution,
    compute_alpha_adversarial,
    compute_alpha_stochastic,
    empirical_distribution,
    solve_lp,
)
from roibandit.engine import Trace, RoundRecord, run_framework, run_second_price
from roibandit.analysis import RunSummary, summarize

__version__ = "0.1.0"

__all__ = [
    "BidGrid",
    "DualState",
    "Exp3SixBank",
    "InputModel",
    "LpSolution",
    "Policy",
    "RateSchedule",
    "RoundOutcome",
    "RoundRecord",
    "RunConfig",
    "RunSummary",
    "Trace",
    "ValuationGrid",
    "azuma_term",
    "compute_alpha_adversarial",
    "compute_alpha_stochastic",
    "dual_step",
    "dual_utility",
    "empirical_distribution",
    "lagrangian_utility",
    "make_rates",
    "primal_loss",
    "run_framework",
    "run_second_price",
    "second_price_bid",
    "solve_lp",
    "summarize",
]
