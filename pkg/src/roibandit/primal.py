"""Primal regret minimizers.

``Exp3SixBank`` runs one EXP3-SIX instance (implicit exploration plus fixed
share) per valuation.  ``second_price_bid`` is the closed-form bidder that
replaces the learner when the mechanism is truthful.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from itertools import accumulate

import numpy as np

from roibandit.dual import DualState

# Rows are rescaled once their total drops below this; policies are scale-free.
_RESCALE_BELOW = 1e-150


def exp3six_regret_bound(M: float, m: int, T: int, delta: float) -> float:
    """High-probability interval-regret bound ``M^2 * E^P`` of a single instance.

    Evaluates ``(3/2 M^2 + 4 M log(mT/delta) + log T + 1) sqrt(mT)``, which is
    the stated bound multiplied through by ``M^2``.
    """
    return (1.5 * M * M + 4.0 * M * math.log(m * T / delta) + math.log(T) + 1.0) * math.sqrt(m * T)


class Exp3SixBank:
    """Per-valuation EXP3-SIX weights with ``eta = 1/sqrt(mT)``,
    ``xi = 1/(2 sqrt(mT))`` and ``sigma = 1/T`` unless overridden.
    """

    def __init__(self, n: int, m: int, T: int, *, eta=None, xi=None, sigma=None):
        if n < 1 or m < 1 or T < 1:
            raise ValueError(f"need n, m, T >= 1, got n={n}, m={m}, T={T}")
        self.n, self.m, self.T = n, m, T
        root = math.sqrt(m * T)
        self.eta = 1.0 / root if eta is None else float(eta)
        self.xi = 1.0 / (2.0 * root) if xi is None else float(xi)
        self.sigma = 1.0 / T if sigma is None else float(sigma)
        if self.eta <= 0 or self.xi < 0 or not 0.0 <= self.sigma <= 1.0:
            raise ValueError("invalid EXP3-SIX parameters")
        self._w = [[1.0] * m for _ in range(n)]

    @property
    def weights(self) -> np.ndarray:
        return np.array(self._w)

    def next_policy_row(self, v_index: int) -> list[float]:
        row = self._w[v_index]
        total = math.fsum(row)
        return [w / total for w in row]

    def sample(self, row: list[float], u: float) -> int:
        """Inverse-CDF draw in index order from a uniform ``u`` in [0, 1)."""
        cdf = list(accumulate(row))
        i = bisect_right(cdf, u * cdf[-1])
        if i >= self.m:
            i = max(j for j, p in enumerate(row) if p > 0)
        return i

    def loss_estimates(self, x_index: int, loss: float, policy_row) -> list[float]:
        est = [0.0] * self.m
        est[x_index] = loss / (policy_row[x_index] + self.xi)
        return est

    def observe_loss(self, v_index: int, x_index: int, loss: float, policy_row) -> None:
        """Implicit-exploration loss estimate followed by the fixed-share update."""
        if loss < 0:
            raise ValueError(f"primal loss must be nonnegative, got {loss}")
        row = self._w[v_index]
        m = self.m
        decayed = list(row)
        est = loss / (policy_row[x_index] + self.xi)
        decayed[x_index] = row[x_index] * math.exp(-self.eta * est)
        share = self.sigma / m * math.fsum(decayed)
        keep = 1.0 - self.sigma
        new = [keep * w + share for w in decayed]
        total = math.fsum(new)
        if total < _RESCALE_BELOW:
            new = [w / total for w in new]
        self._w[v_index] = new


def second_price_bid(v: float, state: DualState, omega: float = 1.0, roi_target: float = 1.0) -> float:
    """Bid that wins exactly when the round's Lagrangian utility is nonnegative.

    With ``omega = 1`` and unit ROI target this is ``(1+mu) v / (1+lam+2mu)``;
    the general form divides by ``omega (1+mu) + roi_target (lam+mu)``.  Bids
    above 1 are equivalent to bidding 1 since competing bids lie in [0, 1].
    """
    lam, mu = state.lam, state.mu
    num = (1.0 + mu) * v
    den = omega * (1.0 + mu) + roi_target * (lam + mu)
    if omega == 1.0 and roi_target == 1.0:
        bid = num / den
        assert 0.0 <= bid <= v, (bid, v)
        return bid
    if num == 0.0:
        return 0.0
    if den <= 0.0:
        return 1.0
    return min(num / den, 1.0)
