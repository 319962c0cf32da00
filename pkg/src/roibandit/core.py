"""Domain types and the per-round loss/utility functions.

Everything here is a pure function or an immutable value.  Rewards are assumed
to be already divided by the ROI target, so the constraint is always
``sum(c - f) <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class BidGrid:
    """Finite bid set.  Index 0 is the void bid (value 0, never wins)."""

    bids: tuple[float, ...]

    def __post_init__(self):
        bids = tuple(float(b) for b in self.bids)
        object.__setattr__(self, "bids", bids)
        if len(bids) < 1:
            raise ValueError("bid grid needs at least the void bid")
        if bids[0] != 0.0:
            raise ValueError(f"bids[0] must be the void bid 0, got {bids[0]}")
        if not _strictly_increasing(bids):
            raise ValueError("bids must be strictly increasing")
        if bids[-1] > 1.0:
            raise ValueError("bids must lie in [0, 1]")

    @property
    def m(self) -> int:
        return len(self.bids)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bids, dtype=float)

    def __len__(self) -> int:
        return len(self.bids)


@dataclass(frozen=True)
class ValuationGrid:
    valuations: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.valuations)
        object.__setattr__(self, "valuations", vals)
        if len(vals) < 1:
            raise ValueError("valuation grid must be nonempty")
        if not _strictly_increasing(vals):
            raise ValueError("valuations must be strictly increasing")
        if vals[0] < 0.0 or vals[-1] > 1.0:
            raise ValueError("valuations must lie in [0, 1]")
        object.__setattr__(self, "_lookup", {v: i for i, v in enumerate(vals)})

    @property
    def n(self) -> int:
        return len(self.valuations)

    def index(self, v: float) -> int:
        """Index of valuation ``v``; tolerates 1e-12 representation noise."""
        i = self._lookup.get(float(v))
        if i is not None:
            return i
        arr = np.asarray(self.valuations)
        j = int(np.argmin(np.abs(arr - v)))
        if abs(arr[j] - v) <= 1e-12:
            return j
        raise KeyError(f"valuation {v} is not on the grid {self.valuations}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.valuations, dtype=float)

    def __len__(self) -> int:
        return len(self.valuations)


@dataclass(frozen=True)
class RunConfig:
    """Horizon, budget and the scalar knobs of one run.

    ``rho`` is derived as ``B / T``.  ``omega`` weighs the payment inside the
    reward (0 = value maximizer, 1 = quasi-linear utility).
    """

    T: int
    B: float
    delta: float = 0.05
    roi_target: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        object.__setattr__(self, "T", int(self.T))
        if not self.B >= 1.0:
            raise ValueError(f"budget B must be >= 1, got {self.B}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if not self.roi_target > 0.0:
            raise ValueError(f"roi_target must be > 0, got {self.roi_target}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0, 1], got {self.omega}")

    @property
    def rho(self) -> float:
        return self.B / self.T


@dataclass(frozen=True)
class RoundOutcome:
    """Realized reward and cost; the constraint gaps are derived."""

    f: float
    c: float
    rho: float

    @property
    def g(self) -> float:
        return self.c - self.rho

    @property
    def h(self) -> float:
        return self.c - self.f


@dataclass(frozen=True)
class Policy:
    """Randomized bidding policy: row ``v`` is a distribution over bids."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("policy must be an n x m matrix")
        if np.any(p < 0):
            if p.min() < -1e-12:
                raise ValueError("policy has negative entries")
            p = np.maximum(p, 0.0)
        sums = p.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"policy rows must sum to 1, got {sums}")
        p = p / sums[:, None]
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def void(cls, n: int, m: int) -> "Policy":
        p = np.zeros((n, m))
        p[:, 0] = 1.0
        return cls(p)

    @classmethod
    def deterministic(cls, choice: Sequence[int], m: int) -> "Policy":
        p = np.zeros((len(choice), m))
        p[np.arange(len(choice)), list(choice)] = 1.0
        return cls(p)

    def mix(self, other: "Policy", weight: float) -> "Policy":
        """``(1 - weight) * self + weight * other``."""
        return Policy((1.0 - weight) * self.probs + weight * other.probs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


def primal_loss(f: float, c: float, lam: float, mu: float, rho: float) -> float:
    """Shifted Lagrangian loss fed to the primal regret minimizer.

    ``-f + lam*(c - rho) + mu*(c - f) + 1 + lam + mu``; nonnegative whenever
    ``f, c`` lie in [0, 1] and the multipliers are nonnegative.
    """
    if lam < 0 or mu < 0:
        raise ValueError(f"multipliers must be nonnegative, got lam={lam}, mu={mu}")
    if not (0.0 <= f <= 1.0 and 0.0 <= c <= 1.0):
        raise ValueError(f"reward and cost must be in [0, 1], got f={f}, c={c}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    loss = -f + lam * (c - rho) + mu * (c - f) + 1.0 + lam + mu
    # the exact value is >= 0; only rounding can push it below
    return loss if loss >= 0.0 else 0.0


def dual_utility(g: float, h: float, lam: float, mu: float) -> float:
    if lam < 0 or mu < 0:
        raise ValueError(f"multipliers must be nonnegative, got lam={lam}, mu={mu}")
    return lam * g + mu * h


def lagrangian_utility(f: float, g: float, h: float, lam: float, mu: float) -> float:
    """Per-round Lagrangian ``f - lam*g - mu*h``."""
    return f - lam * g - mu * h


def azuma_term(length: float, T: int, delta: float) -> float:
    """Concentration slack ``2 sqrt(length * log(2T / delta))``, or 0 when ``delta == 0``."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    if length < 0:
        raise ValueError(f"interval length must be >= 0, got {length}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if delta == 0.0:
        return 0.0
    return 2.0 * math.sqrt(length * math.log(2.0 * T / delta))
