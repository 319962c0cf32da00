"""Offline baselines: the expected-reward LP over randomized bidding policies
and the strict-feasibility margin alpha, for tables and for scripts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from roibandit.core import BidGrid, Policy
from roibandit.environments import InputModel, outcome_arrays
from roibandit.simplex import simplex_max

VOID_TOL = 1e-12


@dataclass(frozen=True)
class LpSolution:
    value: float
    policy: Policy
    budget_dual: float
    roi_dual: float
    status: str  # "optimal" or "only-void-feasible"
    expected_gap_budget: float
    expected_gap_roi: float

    def as_record(self) -> dict:
        return {
            "value": self.value,
            "status": self.status,
            "budget_dual": self.budget_dual,
            "roi_dual": self.roi_dual,
            "expected_gap_budget": self.expected_gap_budget,
            "expected_gap_roi": self.expected_gap_roi,
            "policy": self.policy.probs.tolist(),
        }


def empirical_distribution(script: InputModel) -> InputModel:
    """Table of the distinct ``(v, beta)`` pairs of a script, each with mass count/T."""
    if script.kind != "scripted":
        raise ValueError("empirical distribution needs a scripted model")
    T = len(script.script)
    counts = Counter(map(tuple, script.script.tolist()))
    support = tuple(sorted({beta for _, beta in counts}))
    col = {b: j for j, b in enumerate(support)}
    table = np.zeros((script.valuations.n, len(support)))
    for (v, beta), k in counts.items():
        table[script.valuations.index(v), col[beta]] += k / T
    table /= table.sum()
    return InputModel.stochastic(script.mechanism, script.valuations, support, table,
                                 omega=script.omega, roi_target=script.roi_target)


def expected_outcomes(model: InputModel, bids: BidGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Probability-weighted ``F[v, x] = sum_beta P(v, beta) f`` and ``C[v, x]``, plus ``P(v)``."""
    if model.kind != "stochastic":
        raise ValueError("expected outcomes need a probability table")
    vals = model.valuations.as_array()
    f, c = outcome_arrays(model.mechanism, vals[:, None], np.asarray(model.support)[None, :],
                          bids.bids, model.omega, model.roi_target)
    P = model.table[:, :, None]
    return (P * f).sum(axis=1), (P * c).sum(axis=1), model.table.sum(axis=1)


def _policy_from(y: np.ndarray, n: int, m: int) -> Policy:
    probs = np.zeros((n, m))
    probs[:, 1:] = np.clip(y.reshape(n, m - 1), 0.0, 1.0)
    over = probs.sum(axis=1)
    scale = np.where(over > 1.0, over, 1.0)
    probs[:, 1:] /= scale[:, None]
    probs[:, 0] = 1.0 - probs[:, 1:].sum(axis=1)
    return Policy(np.maximum(probs, 0.0))


def solve_lp(model: InputModel, bids: BidGrid, rho: float) -> LpSolution:
    """Maximize expected reward over policies subject to expected budget and ROI feasibility.

    The void probability is eliminated (``pi[v, 0] = 1 - sum of the rest``), so
    every constraint has a nonnegative right-hand side and the all-void policy
    is the starting vertex.
    """
    F, C, _ = expected_outcomes(model, bids)
    n, m = F.shape
    if m == 1:
        return LpSolution(0.0, Policy.void(n, 1), 0.0, 0.0, "only-void-feasible", -rho, 0.0)
    Fx, Cx = F[:, 1:].ravel(), C[:, 1:].ravel()
    k = n * (m - 1)
    rows = [Cx, Cx - Fx]
    rhs = [rho, 0.0]
    for v in range(n):
        r = np.zeros(k)
        r[v * (m - 1):(v + 1) * (m - 1)] = 1.0
        rows.append(r)
        rhs.append(1.0)
    res = simplex_max(Fx, np.vstack(rows), np.asarray(rhs))
    policy = _policy_from(res.x, n, m)
    value = float((policy.probs * F).sum())
    gap_b = float((policy.probs * C).sum()) - rho
    gap_r = float((policy.probs * (C - F)).sum())
    status = "optimal" if value > VOID_TOL else "only-void-feasible"
    if status == "only-void-feasible":
        policy, value, gap_b, gap_r = Policy.void(n, m), 0.0, -rho, 0.0
    return LpSolution(value, policy, float(res.duals[0]), float(res.duals[1]), status, gap_b, gap_r)


def _prune_rows(rows: np.ndarray) -> np.ndarray:
    """Drop duplicate rows and rows dominated entrywise by another row (``y >= 0``)."""
    rows = np.unique(rows, axis=0)
    if len(rows) <= 1:
        return rows
    order = np.argsort(-rows.sum(axis=1), kind="stable")
    rows = rows[order]
    kept: list[np.ndarray] = []
    for r in rows:
        if not any(np.all(k >= r) for k in kept):
            kept.append(r)
    return np.asarray(kept)


def _margin_lp(cost_rows: np.ndarray, roi_rows: np.ndarray, n: int, m: int,
               rho: float, include_roi: bool, batch: int = 64) -> tuple[float, Policy]:
    """max a  s.t.  cost_r @ y + a <= rho  and  roi_r @ y + a <= 0  for every row r.

    ``y`` holds the non-void probabilities, valuation-major; rows are full width.
    Redundant rows are pruned first; if many remain, rows are added in batches
    of the most violated ones until the solution satisfies all of them.
    """
    k = n * (m - 1)
    groups = [(_prune_rows(np.atleast_2d(cost_rows)), rho)]
    if include_roi:
        groups.append((_prune_rows(np.atleast_2d(roi_rows)), 0.0))
    G = np.vstack([np.hstack([r, np.ones((len(r), 1))]) for r, _ in groups])
    h = np.concatenate([np.full(len(r), bound) for r, bound in groups])
    simplex_rows = []
    for v in range(n):
        row = np.zeros(k + 1)
        row[v * (m - 1):(v + 1) * (m - 1)] = 1.0
        simplex_rows.append(row)
    obj = np.zeros(k + 1)
    obj[-1] = 1.0
    active = np.zeros(len(G), dtype=bool)
    if len(G) <= 4 * batch:
        active[:] = True
    else:
        # seed with the rows that bind at the all-void point plus the heaviest rows
        active[np.argsort(h - G[:, :-1].sum(axis=1))[:batch]] = True
    while True:
        A = np.vstack([G[active]] + simplex_rows)
        b = np.concatenate([h[active], np.ones(n)])
        res = simplex_max(obj, A, b)
        viol = G @ res.x - h
        viol[active] = -np.inf
        worst = np.argsort(-viol)[:batch]
        worst = worst[viol[worst] > 1e-12]
        if worst.size == 0:
            break
        active[worst] = True
    return float(res.x[-1]), _policy_from(res.x[:-1], n, m)


def _stochastic_margin(model, bids, rho, include_roi):
    F, C, _ = expected_outcomes(model, bids)
    n, m = F.shape
    if m == 1:
        return (0.0 if include_roi else rho), Policy.void(n, 1)
    return _margin_lp(C[:, 1:].ravel()[None, :], (C - F)[:, 1:].ravel()[None, :], n, m, rho, include_roi)


def compute_alpha_stochastic(model: InputModel, bids: BidGrid, rho: float, *, include_roi: bool = True) -> float:
    """``-min_pi max(E g(pi), E h(pi))`` under the table; ``rho`` when the ROI row is dropped."""
    return _stochastic_margin(model, bids, rho, include_roi)[0]


def safe_policy_stochastic(model: InputModel, bids: BidGrid, rho: float) -> tuple[float, Policy]:
    return _stochastic_margin(model, bids, rho, True)


def _adversarial_margin(script: InputModel, bids, rho, include_roi):
    if script.kind != "scripted":
        raise ValueError("adversarial alpha needs a scripted model")
    pairs = np.unique(script.script, axis=0)
    f, c = outcome_arrays(script.mechanism, pairs[:, 0], pairs[:, 1], bids.bids,
                          script.omega, script.roi_target)
    owner = np.array([script.valuations.index(v) for v in pairs[:, 0]])
    n, m = script.valuations.n, bids.m
    if m == 1:
        return (0.0 if include_roi else rho), Policy.void(n, 1)
    cost = np.zeros((len(pairs), n, m - 1))
    roi = np.zeros((len(pairs), n, m - 1))
    r = np.arange(len(pairs))
    cost[r, owner] = c[:, 1:]
    roi[r, owner] = (c - f)[:, 1:]
    return _margin_lp(cost.reshape(len(pairs), -1), roi.reshape(len(pairs), -1), n, m, rho, include_roi)


def compute_alpha_adversarial(script: InputModel, bids: BidGrid, rho: float, *, include_roi: bool = True) -> float:
    """``-min_pi max_t max(g_t(pi), h_t(pi))``: one pair of rows per distinct round."""
    return _adversarial_margin(script, bids, rho, include_roi)[0]


def safe_policy_adversarial(script: InputModel, bids: BidGrid, rho: float) -> tuple[float, Policy]:
    return _adversarial_margin(script, bids, rho, True)


def best_unconstrained_policy(script: InputModel, bids: BidGrid) -> Policy:
    """Deterministic policy maximizing total script reward, one bid per valuation."""
    f, _ = outcome_arrays(script.mechanism, script.script[:, 0], script.script[:, 1], bids.bids,
                          script.omega, script.roi_target)
    idx = np.array([script.valuations.index(v) for v in script.script[:, 0]])
    totals = np.zeros((script.valuations.n, bids.m))
    np.add.at(totals, idx, f)
    return Policy.deterministic(np.argmax(totals, axis=1).tolist(), bids.m)


def second_price_bids(model: InputModel, max_bids: int = 256) -> BidGrid:
    """Bid grid that realizes every win set a fixed second-price bid can reach.

    Under second price a bid ``x`` wins exactly the rounds with ``beta <= x``,
    so the void bid plus one bid per distinct competing bid covers every
    fixed-bid outcome.  A zero competing bid is matched by a tiny positive bid.
    """
    support = np.unique(np.asarray(model.support if model.kind == "stochastic" else model.script[:, 1]))
    pos = support[support > 0]
    tiny = float(pos.min()) / 2 if pos.size else 0.5
    bids = np.unique(np.concatenate([[0.0], np.where(support > 0, support, tiny)]))
    if len(bids) > max_bids:
        raise ValueError(f"{len(bids)} distinct competing bids; give the baseline an explicit bid grid")
    return BidGrid(tuple(bids.tolist()))
