"""Independent reference implementations used as test oracles.

Nothing here imports the solver paths under test: outcomes are re-derived from
the auction rules, LPs are solved by vertex enumeration, and margins by grid
search over a scalarization weight or over policies.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def outcome(mechanism, v, beta, x, omega):
    """Scalar auction rule: win iff the bid is positive and at least beta."""
    win = x > 0 and x >= beta
    if not win:
        return 0.0, 0.0
    if mechanism == "first-price":
        return v - omega * x, x
    return v - omega * beta, beta


def expected_tables(valuations, support, table, bids, rho, mechanism="first-price", omega=0.0):
    n, m = len(valuations), len(bids)
    F = np.zeros((n, m))
    C = np.zeros((n, m))
    for i, v in enumerate(valuations):
        for j, beta in enumerate(support):
            p = table[i][j]
            for k, x in enumerate(bids):
                f, c = outcome(mechanism, v, beta, x, omega)
                F[i, k] += p * f
                C[i, k] += p * c
    return F, C


def vertex_lp(c, A, b, tol=1e-9):
    """max c@y s.t. A@y <= b, y >= 0 by enumerating every basic solution."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    d = len(c)
    G = np.vstack([A, -np.eye(d)])
    h = np.concatenate([b, np.zeros(d)])
    best, arg = -np.inf, None
    for rows in itertools.combinations(range(len(G)), d):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ y <= h + tol):
            val = float(c @ y)
            if val > best:
                best, arg = val, y
    return best, arg


def lp_value_oracle(valuations, support, table, bids, rho, mechanism="first-price", omega=0.0):
    """Best expected reward over policies that meet both expected constraints."""
    F, C = expected_tables(valuations, support, table, bids, rho, mechanism, omega)
    n, m = F.shape
    if m == 1:
        return 0.0
    # variables: non-void probabilities y[v, x], x >= 1
    Fx, Cx = F[:, 1:].ravel(), C[:, 1:].ravel()
    A = [Cx, Cx - Fx]
    b = [rho, 0.0]
    for v in range(n):
        r = np.zeros(n * (m - 1))
        r[v * (m - 1):(v + 1) * (m - 1)] = 1
        A.append(r)
        b.append(1.0)
    val, _ = vertex_lp(Fx, np.array(A), np.array(b))
    return val


def alpha_theta_grid(valuations, support, table, bids, rho, mechanism="first-price", omega=0.0, step=1e-3):
    """-min_pi max(Eg, Eh) through the scalarization max_theta min_pi (theta Eg + (1-theta) Eh)."""
    F, C = expected_tables(valuations, support, table, bids, rho, mechanism, omega)
    best = -np.inf
    for theta in np.arange(0.0, 1.0 + step / 2, step):
        per = theta * C + (1 - theta) * (C - F)
        val = per.min(axis=1).sum() - theta * rho
        best = max(best, val)
    return -best


def alpha_policy_grid_adversarial(script, valuations, bids, rho, mechanism="first-price", omega=0.0, step=1e-3):
    """-min_pi max_t max(g_t, h_t) by scanning policies with at most two free probabilities."""
    vals = list(valuations)
    n, m = len(vals), len(bids)
    free = n * (m - 1)
    assert free <= 2, "grid oracle supports at most two free probabilities"
    G = []
    H = []
    for v, beta in script:
        i = vals.index(v)
        gr = np.zeros(free)
        hr = np.zeros(free)
        for k in range(1, m):
            f, c = outcome(mechanism, v, beta, bids[k], omega)
            gr[i * (m - 1) + k - 1] = c
            hr[i * (m - 1) + k - 1] = c - f
        G.append(gr)
        H.append(hr)
    G, H = np.unique(np.array(G), axis=0), np.unique(np.array(H), axis=0)
    axis = np.arange(0.0, 1.0 + step / 2, step)
    if free == 1:
        pts = axis[:, None]
    else:
        a, b = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([a.ravel(), b.ravel()])
        if m == 3:  # both probabilities belong to one valuation row
            pts = pts[pts.sum(axis=1) <= 1.0 + 1e-12]
    worst = np.maximum((pts @ G.T - rho).max(axis=1), (pts @ H.T).max(axis=1))
    return -float(worst.min())


def exp3six_reference(n, m, T, sequence, eta, xi, sigma):
    """Replay of the weight update on (v, x, loss, row) tuples.  Returns the final weights."""
    w = np.ones((n, m))
    for v, x, loss, row in sequence:
        est = np.zeros(m)
        est[x] = loss / (row[x] + xi)
        dec = w[v] * np.exp(-eta * est)
        w[v] = (1 - sigma) * dec + sigma / m * dec.sum()
    return w


def brute_interval_regret(losses, played):
    """max over all inclusive intervals and bids, with a triple loop."""
    T, m = losses.shape
    best = -math.inf
    for t1 in range(T):
        for t2 in range(t1, T):
            for x in range(m):
                s = sum(losses[t, played[t]] - losses[t, x] for t in range(t1, t2 + 1))
                best = max(best, s)
    return best


def simulate_framework(script, bids, B, seed, *, omega=0.0, delta=0.05):
    """Straight-line loop over a scripted first-price environment."""
    T = len(script)
    m = len(bids)
    vals = sorted({v for v, _ in script})
    n = len(vals)
    rho = B / T
    env_seq, act_seq = np.random.SeedSequence(seed).spawn(2)
    u = np.random.default_rng(act_seq).random(T)
    eta = 1 / math.sqrt(m * T)
    xi = 1 / (2 * math.sqrt(m * T))
    sigma = 1 / T
    eta_b = 1 / (rho * math.sqrt(T))
    e_p = (1.5 + 4 * math.log(m * n * T / delta) + math.log(T) + 1) * math.sqrt(n * m * T)
    e_az = 2 * math.sqrt(T * math.log(2 * T / delta))
    eta_r = 1 / (6 + math.sqrt(T) + math.sqrt(T) / rho + 6 * e_az + 16 * e_p)
    w = np.ones((n, m))
    lam = mu = 0.0
    budget = B
    rows = []
    for t, (v, beta) in enumerate(script):
        i = vals.index(v)
        p = w[i] / w[i].sum()
        if budget >= 1:
            k = int(np.searchsorted(np.cumsum(p), u[t] * p.sum(), side="right"))
            k = min(k, m - 1)
        else:
            k = 0
        f, c = outcome("first-price", v, beta, bids[k], omega)
        budget -= c
        loss = -f + lam * (c - rho) + mu * (c - f) + 1 + lam + mu
        est = np.zeros(m)
        est[k] = loss / (p[k] + xi)
        dec = w[i] * np.exp(-eta * est)
        w[i] = (1 - sigma) * dec + sigma / m * dec.sum()
        rows.append((bids[k], f, c, lam, mu, budget))
        lam = min(max(lam + eta_b * (c - rho), 0.0), 1 / rho)
        mu = max(mu + eta_r * (c - f), 0.0)
    return rows
