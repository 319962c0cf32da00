"""Post-hoc metrics and bound audits over completed traces.

Counterfactual outcomes are exact because a trace stores every competing bid,
so each audit here is a deterministic computation, never an estimate.
Intervals are inclusive ``[t1, t2]`` with ``t1 <= t2`` and 1-based rounds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from roibandit.baselines import LpSolution
from roibandit.core import BidGrid, Policy, RunConfig
from roibandit.dual import RateSchedule, replay_duals
from roibandit.engine import Trace
from roibandit.environments import InputModel, outcome_arrays
from roibandit.primal import exp3six_regret_bound

EXHAUSTIVE_MAX_T = 5000


def regret_bound(alpha: float, rates: RateSchedule) -> float:
    """``1/alpha + (3/alpha + 1)(E^P + E) + E^D_R + E^D_B``."""
    return 1.0 / alpha + (3.0 / alpha + 1.0) * (rates.e_p + rates.e_azuma) + rates.e_dr + rates.e_db


def roi_violation_bound(alpha: float, rates: RateSchedule) -> float:
    return 1.0 + 2.0 / (rates.eta_r * alpha)


@dataclass
class RunSummary:
    T: int
    B: float
    total_reward: float
    opt_value: float
    target_fraction: float
    regret: float
    roi_violation: float
    spend: float
    tau: int
    mu_max: float
    alpha: float
    mu_bound: float | None
    reg_bound: float | None
    roi_bound: float | None
    budget_ok: bool
    mu_bound_ok: bool | None
    roi_bound_ok: bool | None
    regret_ok: bool | None
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return asdict(self)


def summarize(trace: Trace, baseline: LpSolution, alpha: float, config: RunConfig, rates: RateSchedule,
              *, adversarial: bool = False) -> RunSummary:
    """Regret against the baseline, realized violation and the bound flags.

    In the adversarial model the regret target is ``alpha/(1+alpha) * T * OPT``.
    Bounds that need ``alpha > 0`` are ``None`` when ``alpha == 0``.
    """
    T = trace.T
    total = math.fsum(trace.f)
    q = alpha / (1.0 + alpha) if adversarial else 1.0
    regret = q * T * baseline.value - total
    violation = math.fsum(trace.h)
    spend = trace.spend
    budget_ok = bool(
        spend <= config.B
        and float(trace.budget_remaining.min()) >= 0.0
        and abs(math.fsum(trace.c) - spend) <= 1e-9 * max(1.0, config.B)
    )
    mu_max = float(trace.mu.max())
    if alpha > 0:
        mu_bound, reg_b, roi_b = 2.0 / alpha, regret_bound(alpha, rates), roi_violation_bound(alpha, rates)
        mu_ok, reg_ok, roi_ok = mu_max <= mu_bound, regret <= reg_b, violation <= roi_b
    else:
        mu_bound = reg_b = roi_b = None
        mu_ok = reg_ok = roi_ok = None
    return RunSummary(
        T=T, B=config.B, total_reward=total, opt_value=baseline.value, target_fraction=q, regret=regret,
        roi_violation=violation, spend=spend, tau=trace.tau, mu_max=mu_max, alpha=alpha, mu_bound=mu_bound,
        reg_bound=reg_b, roi_bound=roi_b, budget_ok=budget_ok, mu_bound_ok=mu_ok, roi_bound_ok=roi_ok,
        regret_ok=reg_ok,
    )


# ----------------------------------------------------------------------------
# counterfactuals


def counterfactual_outcomes(trace: Trace, env: InputModel, bids: BidGrid) -> tuple[np.ndarray, np.ndarray]:
    """``f[t, x], c[t, x]`` for every round and every bid on the grid."""
    return outcome_arrays(env.mechanism, trace.v, trace.beta, bids.bids, env.omega, env.roi_target)


def counterfactual_losses(trace: Trace, env: InputModel, bids: BidGrid) -> np.ndarray:
    """Shifted Lagrangian loss of every bid in every round, at the round's multipliers."""
    f, c = counterfactual_outcomes(trace, env, bids)
    lam, mu = trace.lam[:, None], trace.mu[:, None]
    return -f + lam * (c - trace.rho) + mu * (c - f) + 1.0 + lam + mu


def policy_gaps(policy: Policy, trace: Trace, env: InputModel, bids: BidGrid):
    """Per-round expected ``f_t(pi), g_t(pi), h_t(pi)`` under the trace's inputs."""
    f, c = counterfactual_outcomes(trace, env, bids)
    vi = trace.v_index if trace.v_index is not None else np.array([env.valuations.index(v) for v in trace.v])
    rows = policy.probs[vi]
    fp = (rows * f).sum(axis=1)
    cp = (rows * c).sum(axis=1)
    return fp, cp - trace.rho, cp - fp


# ----------------------------------------------------------------------------
# interval regret


@dataclass
class IntervalRegretReport:
    max_regret: float
    interval: tuple[int, int]
    M_I: float
    bound: float | None
    ratio: float | None
    max_ratio: float | None
    worst_ratio_interval: tuple[int, int] | None
    exceeded: bool | None
    intervals_checked: int


def _prefix(a: np.ndarray) -> np.ndarray:
    return np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(a, axis=0)])


def interval_regret_audit(
    losses: np.ndarray,
    played: np.ndarray,
    v_index: np.ndarray | None = None,
    *,
    bound: Callable[[np.ndarray], np.ndarray] | None = None,
    max_T: int = EXHAUSTIVE_MAX_T,
    sampled: int | None = None,
    rng: np.random.Generator | None = None,
) -> IntervalRegretReport:
    """Brute-force maximum over intervals and fixed policies of the played-minus-fixed loss.

    With valuations, the comparator picks one bid per valuation.  ``bound``
    maps an array of interval loss ranges ``M_I`` to the allowed regret; the
    report then says whether any interval exceeded its own bound.
    ``sampled`` checks that many random start rounds instead of all of them
    (required above ``max_T`` rounds).
    """
    losses = np.asarray(losses, dtype=float)
    T, m = losses.shape
    played = np.asarray(played, dtype=np.int64)
    if v_index is None:
        v_index = np.zeros(T, dtype=np.int64)
    n = int(v_index.max()) + 1
    if T > max_T and not sampled:
        raise ValueError(f"T={T} exceeds the exhaustive limit {max_T}; request sampled mode")
    d = losses[np.arange(T), played][:, None] - losses
    per_v = np.zeros((T, n, m))
    per_v[np.arange(T), v_index] = d
    P = _prefix(per_v)
    rowmax = np.abs(losses).max(axis=1)
    starts = np.arange(T) if not sampled else np.sort(
        (rng or np.random.default_rng(0)).choice(T, size=min(sampled, T), replace=False))
    best = (-np.inf, (1, 1), 0.0)
    worst_ratio = (-np.inf, None)
    exceeded = False
    checked = 0
    for t1 in starts:
        R = (P[t1 + 1:] - P[t1]).max(axis=2).sum(axis=1)
        M = np.maximum.accumulate(rowmax[t1:])
        checked += len(R)
        j = int(np.argmax(R))
        if R[j] > best[0]:
            best = (float(R[j]), (int(t1) + 1, int(t1) + j + 1), float(M[j]))
        if bound is not None:
            ratios = R / bound(M)
            k = int(np.argmax(ratios))
            if ratios[k] > worst_ratio[0]:
                worst_ratio = (float(ratios[k]), (int(t1) + 1, int(t1) + k + 1))
            exceeded = exceeded or bool(ratios[k] > 1.0)
    b = r = None
    if bound is not None:
        b = float(bound(np.asarray([best[2]]))[0])
        r = best[0] / b
    return IntervalRegretReport(
        max_regret=best[0], interval=best[1], M_I=best[2], bound=b, ratio=r,
        max_ratio=worst_ratio[0] if bound is not None else None,
        worst_ratio_interval=worst_ratio[1], exceeded=exceeded if bound is not None else None,
        intervals_checked=checked,
    )


def external_regret(losses: np.ndarray, played: np.ndarray, v_index: np.ndarray | None = None) -> float:
    losses = np.asarray(losses, dtype=float)
    T, m = losses.shape
    if v_index is None:
        v_index = np.zeros(T, dtype=np.int64)
    d = losses[np.arange(T), played][:, None] - losses
    n = int(v_index.max()) + 1
    tot = np.zeros((n, m))
    np.add.at(tot, v_index, d)
    return float(tot.max(axis=1).sum())


def exp3six_bound_fn(m: int, T: int, delta: float, n: int = 1) -> Callable[[np.ndarray], np.ndarray]:
    """Interval bound ``M^2 sqrt(n) E^P`` as a function of the interval loss range."""
    def fn(M):
        M = np.asarray(M, dtype=float)
        return math.sqrt(n) * (1.5 * M * M + 4.0 * M * math.log(m * T / delta) + math.log(T) + 1.0) * math.sqrt(m * T)
    assert abs(fn(np.array([1.0]))[0] - math.sqrt(n) * exp3six_regret_bound(1.0, m, T, delta)) < 1e-9
    return fn


# ----------------------------------------------------------------------------
# policy predicates


def _interval_azuma(lengths: np.ndarray, T: int, delta: float) -> np.ndarray:
    if delta == 0.0:
        return np.zeros_like(lengths, dtype=float)
    return 2.0 * np.sqrt(lengths * math.log(2.0 * T / delta))


@dataclass
class PredicateReport:
    holds: bool
    interval: tuple[int, int] | None  # first violating interval, if any
    worst_slack: float  # min over intervals of (rhs - lhs)
    detail: dict = field(default_factory=dict)


def check_delta_safe(lam: np.ndarray, mu: np.ndarray, g_pi: np.ndarray, h_pi: np.ndarray,
                     alpha: float, delta: float) -> PredicateReport:
    """Safe-policy inequality on every interval, given the policy's per-round gaps.

    ``sum_I (lam g + mu h) <= (max_I mu + 1/alpha) * E_I - alpha * sum_I mu``
    with ``E_I = 2 sqrt(n_I log(2T/delta))``, ``n_I`` the number of rounds in ``I``.
    """
    if alpha <= 0:
        raise ValueError("the safe-policy predicate needs alpha > 0")
    T = len(lam)
    pen = _prefix(lam * g_pi + mu * h_pi)
    mus = _prefix(mu)
    first = None
    worst = np.inf
    for t1 in range(T):
        lhs = pen[t1 + 1:] - pen[t1]
        mu_I = np.maximum.accumulate(mu[t1:])
        E = _interval_azuma(np.arange(1, T - t1 + 1, dtype=float), T, delta)
        rhs = (mu_I + 1.0 / alpha) * E - alpha * (mus[t1 + 1:] - mus[t1])
        slack = rhs - lhs
        k = int(np.argmin(slack))
        worst = min(worst, float(slack[k]))
        if first is None and slack[k] < -1e-9:
            bad = int(np.flatnonzero(slack < -1e-9)[0])
            first = (t1 + 1, t1 + bad + 1)
    return PredicateReport(first is None, first, worst)


def check_optimal_policy(lam: np.ndarray, mu: np.ndarray, f_pi: np.ndarray, g_pi: np.ndarray,
                         h_pi: np.ndarray, q: float, opt_value: float, delta: float,
                         alpha: float) -> PredicateReport:
    """Reward condition ``sum f(pi) >= q T OPT - E`` and the prefix-penalty condition."""
    if alpha <= 0:
        raise ValueError("the optimal-policy predicate needs alpha > 0")
    T = len(lam)
    E = float(_interval_azuma(np.asarray([float(T)]), T, delta)[0])
    reward_slack = math.fsum(f_pi) - (q * T * opt_value - E)
    pen = np.cumsum(lam * g_pi + mu * h_pi)
    rhs = (np.maximum.accumulate(mu) + 1.0 / alpha) * E
    slack = rhs - pen
    bad = np.flatnonzero(slack < -1e-9)
    first = (1, int(bad[0]) + 1) if bad.size else None
    holds = reward_slack >= -1e-9 and first is None
    return PredicateReport(bool(holds), first, float(min(slack.min(), reward_slack)),
                           {"reward_slack": reward_slack, "prefix_slack": float(slack.min())})


# ----------------------------------------------------------------------------
# trace audits


@dataclass
class AuditResult:
    name: str
    passed: bool | None  # None = not applicable
    detail: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {"check": self.name, "passed": self.passed, **self.detail}


def mu_growth_audit(mu: np.ndarray, h: np.ndarray, eta_r: float, *, tol: float = 1e-9) -> AuditResult:
    """``mu[t2] >= eta_r * sum(h[t1 .. t2-1]) + mu[t1]`` for every pair ``t1 <= t2``.

    With ``a_t = mu_t - eta_r * sum(h[1 .. t-1])`` the condition says ``a`` is
    nondecreasing, so the minimum over all pairs is the largest drop of ``a``
    below its running maximum.  Exact over all pairs in O(T).
    """
    mu = np.asarray(mu, dtype=float)
    H = _prefix(np.asarray(h, dtype=float))[:-1]
    a = mu - eta_r * H
    peak = np.maximum.accumulate(a)
    slack = a - peak
    t2 = int(np.argmin(slack))
    t1 = int(np.argmax(a[: t2 + 1]))
    worst = float(slack[t2])
    return AuditResult("mu_growth", worst >= -tol, {"worst_slack": worst, "pair": (t1 + 1, t2 + 1)})


def lemma_budget_audit(trace: Trace, rates: RateSchedule) -> AuditResult:
    """``sum_{t <= tau} lam_t g_t >= T - tau - 1/rho - E^D_B``."""
    tau = min(trace.tau, trace.T)
    lhs = math.fsum(trace.lam[:tau] * trace.g[:tau])
    rhs = trace.T - tau - 1.0 / trace.rho - rates.e_db
    return AuditResult("budget_multiplier_lower_bound", lhs >= rhs - 1e-9,
                       {"lhs": lhs, "rhs": rhs, "tau": tau})


def dual_replay_audit(trace: Trace, rates: RateSchedule) -> AuditResult:
    lams, mus = replay_duals(trace.g.tolist(), trace.h.tolist(), rates, trace.rho)
    ok = bool(np.array_equal(np.asarray(lams), trace.lam) and np.array_equal(np.asarray(mus), trace.mu))
    diff = float(max(np.abs(np.asarray(lams) - trace.lam).max(), np.abs(np.asarray(mus) - trace.mu).max()))
    return AuditResult("dual_replay", ok, {"max_abs_diff": diff})


def multiplier_range_audit(trace: Trace) -> AuditResult:
    ok = bool(trace.lam.min() >= 0 and trace.lam.max() <= 1.0 / trace.rho and trace.mu.min() >= 0)
    return AuditResult("multiplier_range", ok, {"lam_max": float(trace.lam.max()), "mu_min": float(trace.mu.min())})


def mu_bound_audit(trace: Trace, alpha: float) -> AuditResult:
    if alpha <= 0:
        return AuditResult("mu_bound", None, {"reason": "alpha = 0"})
    mu_max = float(trace.mu.max())
    return AuditResult("mu_bound", mu_max <= 2.0 / alpha, {"mu_max": mu_max, "bound": 2.0 / alpha})


def lagrangian_utilities(trace: Trace, env: InputModel, bids) -> np.ndarray:
    """``f - lam g - mu h`` of each candidate bid in each round."""
    f, c = outcome_arrays(env.mechanism, trace.v, trace.beta, bids, env.omega, env.roi_target)
    lam, mu = trace.lam[:, None], trace.mu[:, None]
    return f - lam * (c - trace.rho) - mu * (c - f)


def second_price_candidates(trace: Trace) -> np.ndarray:
    """Bids that realize every distinct win set: void, each competing bid, and 1."""
    betas = np.unique(trace.beta)
    pos = betas[betas > 0]
    tiny = pos.min() / 2 if pos.size else 0.5
    cands = np.unique(np.concatenate([[0.0, 1.0], np.where(betas > 0, betas, tiny)]))
    return cands


def second_price_optimality_audit(trace: Trace, env: InputModel, *, candidates=None,
                                  tol: float = 1e-9, max_T: int = 2000, max_candidates: int = 512) -> AuditResult:
    """Played Lagrangian utility beats every fixed bid on every pre-depletion interval."""
    horizon = min(trace.tau - 1, trace.T)
    if horizon > max_T:
        raise ValueError(f"{horizon} rounds exceed the exhaustive limit {max_T}")
    cands = second_price_candidates(trace) if candidates is None else np.asarray(candidates, dtype=float)
    if len(cands) > max_candidates:
        raise ValueError(f"{len(cands)} candidate bids; pass an explicit candidate set")
    if horizon <= 0:
        return AuditResult("second_price_optimality", True, {"rounds": 0})
    sub = slice(0, horizon)
    U = lagrangian_utilities(trace, env, cands)[sub]
    played = trace.f[sub] - trace.lam[sub] * trace.g[sub] - trace.mu[sub] * trace.h[sub]
    P, p = _prefix(U), _prefix(played)
    worst, where = np.inf, None
    for t1 in range(horizon):
        slack = (p[t1 + 1:] - p[t1]) - (P[t1 + 1:] - P[t1]).max(axis=1)
        k = int(np.argmin(slack))
        if slack[k] < worst:
            worst, where = float(slack[k]), (t1 + 1, t1 + k + 1)
    return AuditResult("second_price_optimality", worst >= -tol,
                       {"worst_slack": worst, "interval": where, "rounds": horizon, "candidates": len(cands)})
