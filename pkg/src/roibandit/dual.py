"""Online gradient descent on the two Lagrange multipliers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from roibandit.core import RunConfig, azuma_term


@dataclass(frozen=True)
class RateSchedule:
    eta_b: float
    eta_r: float
    e_db: float
    e_dr: float
    e_p: float
    e_azuma: float


def primal_scale(m: int, n: int, T: int, delta: float) -> float:
    """EXP3-SIX interval-regret scale at unit loss range, with the sqrt(n) bank factor."""
    return (1.5 + 4.0 * math.log(m * n * T / delta) + math.log(T) + 1.0) * math.sqrt(n * m * T)


def make_rates(config: RunConfig, m: int, n: int, *, closed_form: bool = False) -> RateSchedule:
    """Learning rates for the budget (``eta_b``) and ROI (``eta_r``) multipliers.

    The OGD regret terms are pinned to their exact values for these rates:
    ``e_db = sqrt(T)/rho`` and ``e_dr = sqrt(T)``.  ``closed_form=True`` is for
    a primal player with zero interval regret (second-price bidding), whose
    primal term is 0.
    """
    T = config.T
    if T < 1:
        raise ValueError("T must be >= 1")
    if m < 1 or n < 1:
        raise ValueError(f"need m, n >= 1, got m={m}, n={n}")
    rho = config.rho
    root_t = math.sqrt(T)
    e_db = root_t / rho
    e_dr = root_t
    e_azuma = azuma_term(T, T, config.delta)
    e_p = 0.0 if closed_form else primal_scale(m, n, T, config.delta)
    eta_b = 1.0 / (rho * root_t)
    eta_r = 1.0 / (6.0 + root_t + e_db + 6.0 * e_azuma + 16.0 * e_p)
    return RateSchedule(eta_b=eta_b, eta_r=eta_r, e_db=e_db, e_dr=e_dr, e_p=e_p, e_azuma=e_azuma)


@dataclass(frozen=True)
class DualState:
    """Multipliers plus the step sizes and the budget-multiplier cap ``1/rho``."""

    lam: float
    mu: float
    eta_b: float
    eta_r: float
    lam_max: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= self.lam_max:
            raise ValueError(f"lambda={self.lam} outside [0, {self.lam_max}]")
        if self.mu < 0.0:
            raise ValueError(f"mu={self.mu} is negative")

    @classmethod
    def initial(cls, rates: RateSchedule, rho: float) -> "DualState":
        return cls(lam=0.0, mu=0.0, eta_b=rates.eta_b, eta_r=rates.eta_r, lam_max=1.0 / rho)

    @property
    def rho(self) -> float:
        return 1.0 / self.lam_max


def project_lambda(value: float, lam_max: float) -> float:
    return min(max(value, 0.0), lam_max)


def project_mu(value: float) -> float:
    return max(value, 0.0)


def dual_step(state: DualState, g: float, h: float) -> DualState:
    """One projected gradient step on the realized constraint gaps."""
    rho = state.rho
    if not (-rho - 1e-12 <= g <= 1.0 - rho + 1e-12):
        raise ValueError(f"budget gap g={g} outside [-rho, 1-rho]")
    if not -1.0 - 1e-12 <= h <= 1.0 + 1e-12:
        raise ValueError(f"ROI gap h={h} outside [-1, 1]")
    return replace(
        state,
        lam=project_lambda(state.lam + state.eta_b * g, state.lam_max),
        mu=project_mu(state.mu + state.eta_r * h),
    )


def replay_duals(gs, hs, rates: RateSchedule, rho: float) -> tuple[list[float], list[float]]:
    """Recompute the multiplier trajectory from a sequence of realized gaps.

    Returns the multipliers *used* in each round (length ``len(gs)``), starting
    from zero.
    """
    lam_max = 1.0 / rho
    lam = mu = 0.0
    lams, mus = [], []
    for g, h in zip(gs, hs):
        lams.append(lam)
        mus.append(mu)
        lam = project_lambda(lam + rates.eta_b * g, lam_max)
        mu = project_mu(mu + rates.eta_r * h)
    return lams, mus
