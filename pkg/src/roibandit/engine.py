"""Round loops: the generic primal-dual framework and its second-price special case."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from roibandit.core import BidGrid, RunConfig, primal_loss
from roibandit.dual import DualState, RateSchedule, dual_step, make_rates
from roibandit.environments import SECOND_PRICE, InputModel
from roibandit.primal import Exp3SixBank, second_price_bid

log = logging.getLogger(__name__)

FRAMEWORK = "framework-exp3six"
SECOND_PRICE_CLOSED_FORM = "second-price-closed-form"
ALGORITHMS = (FRAMEWORK, SECOND_PRICE_CLOSED_FORM)

TRACE_COLUMNS = ("t", "v", "beta", "x", "f", "c", "g", "h", "lambda", "mu", "budget_remaining", "depleted")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    v: float
    beta: float
    x: float
    f: float
    c: float
    g: float
    h: float
    lam: float
    mu: float
    budget_remaining: float
    depleted: bool


@dataclass
class Trace:
    """Column-oriented record of one run.

    ``budget_remaining[t-1]`` is the budget left after round ``t``;
    ``tau`` is the first round that started with less than one unit of budget
    (``T + 1`` if none did).
    """

    t: np.ndarray
    v: np.ndarray
    beta: np.ndarray
    x: np.ndarray
    f: np.ndarray
    c: np.ndarray
    g: np.ndarray
    h: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    budget_remaining: np.ndarray
    depleted: np.ndarray
    B: float
    tau: int
    v_index: np.ndarray | None = None
    x_index: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.t)

    @property
    def rho(self) -> float:
        return self.B / self.T

    @property
    def spend(self) -> float:
        return self.B - float(self.budget_remaining[-1])

    def __len__(self) -> int:
        return self.T

    def record(self, i: int) -> RoundRecord:
        return RoundRecord(
            int(self.t[i]), float(self.v[i]), float(self.beta[i]), float(self.x[i]), float(self.f[i]),
            float(self.c[i]), float(self.g[i]), float(self.h[i]), float(self.lam[i]), float(self.mu[i]),
            float(self.budget_remaining[i]), bool(self.depleted[i]),
        )

    @property
    def records(self) -> list[RoundRecord]:
        return [self.record(i) for i in range(self.T)]


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent environment and action generators derived from one 64-bit seed."""
    env_seq, act_seq = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(env_seq), np.random.default_rng(act_seq)


def _check_env(env: InputModel, config: RunConfig) -> None:
    if env.horizon is not None and env.horizon != config.T:
        raise ValueError(f"script length {env.horizon} does not match T={config.T}")
    if env.omega != config.omega:
        raise ValueError(f"environment omega={env.omega} but run config omega={config.omega}")
    if env.roi_target != config.roi_target:
        raise ValueError(f"environment roi_target={env.roi_target} but config has {config.roi_target}")


class _Columns:
    def __init__(self, T):
        self.arrays = {k: np.empty(T) for k in ("v", "beta", "x", "f", "c", "g", "h", "lam", "mu", "budget")}
        self.depleted = np.zeros(T, dtype=bool)

    def trace(self, config: RunConfig, tau: int, **extra) -> Trace:
        a = self.arrays
        return Trace(
            t=np.arange(1, config.T + 1), v=a["v"], beta=a["beta"], x=a["x"], f=a["f"], c=a["c"],
            g=a["g"], h=a["h"], lam=a["lam"], mu=a["mu"], budget_remaining=a["budget"],
            depleted=self.depleted, B=config.B, tau=tau, **extra,
        )


def run_framework(env: InputModel, bids: BidGrid, config: RunConfig, seed: int,
                  bank: Exp3SixBank | None = None, rates: RateSchedule | None = None) -> Trace:
    """Primal-dual loop with an EXP3-SIX bank as the primal player.

    Per round: multipliers, then the policy row for the observed valuation,
    then the budget guard (void unless at least one unit of budget is left),
    then the realized outcome, the primal update with the shifted Lagrangian
    loss, and the projected dual step.
    """
    _check_env(env, config)
    n, m, T = env.valuations.n, bids.m, config.T
    if bank is None:
        bank = Exp3SixBank(n, m, T)
    if (bank.n, bank.m) != (n, m):
        raise ValueError(f"primal bank is {bank.n}x{bank.m} but the environment needs {n}x{m}")
    env.check_rewards(bids)
    rates = rates or make_rates(config, m, n)
    rho = config.rho
    state = DualState.initial(rates, rho)
    env_rng, act_rng = _streams(seed)
    vi, vs, betas = env.draw(T, env_rng)
    uniforms = act_rng.random(T)
    grid = bids.bids
    outcome = env.outcome

    cols = _Columns(T)
    a = cols.arrays
    x_index = np.zeros(T, dtype=np.int64)
    budget = float(config.B)
    tau = T + 1
    eta_breaches = 0
    for i in range(T):
        lam, mu = state.lam, state.mu
        v, beta, vidx = float(vs[i]), float(betas[i]), int(vi[i])
        row = bank.next_policy_row(vidx)
        if budget >= 1.0:
            k = bank.sample(row, float(uniforms[i]))
        else:
            k = 0
            cols.depleted[i] = True
            if tau > T:
                tau = i + 1
        f, c = outcome(v, beta, grid[k])
        budget -= c
        loss = primal_loss(f, c, lam, mu, rho)
        assert loss <= 1.0 + lam * (2.0 - rho) + 2.0 * mu + 1e-12
        if bank.eta * loss > 1.0:
            eta_breaches += 1
        bank.observe_loss(vidx, k, loss, row)
        g, h = c - rho, c - f
        state = dual_step(state, g, h)
        x_index[i] = k
        a["v"][i], a["beta"][i], a["x"][i], a["f"][i], a["c"][i] = v, beta, grid[k], f, c
        a["g"][i], a["h"][i], a["lam"][i], a["mu"][i], a["budget"][i] = g, h, lam, mu, budget
    if eta_breaches:
        log.debug("eta*loss exceeded 1 in %d rounds", eta_breaches)
    return cols.trace(config, tau, v_index=vi, x_index=x_index,
                      meta={"algorithm": FRAMEWORK, "seed": int(seed), "eta_breaches": eta_breaches})


def run_second_price(env: InputModel, config: RunConfig, seed: int,
                     rates: RateSchedule | None = None) -> Trace:
    """Same loop with the closed-form truthful-rescaling bid in place of a learner."""
    _check_env(env, config)
    if env.mechanism != SECOND_PRICE:
        raise ValueError("closed-form bidding needs a second-price environment")
    if env.valuations.valuations[-1] / env.roi_target > 1.0:
        raise ValueError("scaled valuations exceed 1; raise roi_target or rescale valuations")
    T, rho = config.T, config.rho
    rates = rates or make_rates(config, 1, env.valuations.n, closed_form=True)
    state = DualState.initial(rates, rho)
    env_rng, _ = _streams(seed)
    vi, vs, betas = env.draw(T, env_rng)
    omega, gamma = env.omega, env.roi_target

    cols = _Columns(T)
    a = cols.arrays
    budget = float(config.B)
    tau = T + 1
    for i in range(T):
        lam, mu = state.lam, state.mu
        v, beta = float(vs[i]), float(betas[i])
        x = second_price_bid(v, state, omega, gamma)
        if budget < 1.0:
            x = 0.0
            cols.depleted[i] = True
            if tau > T:
                tau = i + 1
        f, c = env.outcome(v, beta, x)
        if -1e-12 < f < 0.0:
            f = 0.0
        budget -= c
        g, h = c - rho, c - f
        state = dual_step(state, g, h)
        a["v"][i], a["beta"][i], a["x"][i], a["f"][i], a["c"][i] = v, beta, x, f, c
        a["g"][i], a["h"][i], a["lam"][i], a["mu"][i], a["budget"][i] = g, h, lam, mu, budget
    return cols.trace(config, tau, v_index=vi, meta={"algorithm": SECOND_PRICE_CLOSED_FORM, "seed": int(seed)})
