"""Input models: who bids against us, and what a bid earns and costs.

An ``InputModel`` is either an explicit finite probability table over
``(valuation, competing bid)`` pairs or an explicit length-T script of such
pairs chosen by an oblivious adversary.  Rewards are divided by the ROI target
here, so every downstream formula works with a unit target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from roibandit.core import BidGrid, ValuationGrid

FIRST_PRICE = "first-price"
SECOND_PRICE = "second-price"
MECHANISMS = (FIRST_PRICE, SECOND_PRICE)

Mechanism = Literal["first-price", "second-price"]


def outcome_first_price(v: float, beta: float, x: float, omega: float) -> tuple[float, float]:
    """Pay-your-bid auction.  Ties win; the void bid ``x == 0`` never wins."""
    if x <= 0.0 or x < beta:
        return 0.0, 0.0
    return v - omega * x, x


def outcome_second_price(v: float, beta: float, x: float, omega: float) -> tuple[float, float]:
    """Pay the competing bid on a win.  Ties win; the void bid never wins."""
    if x <= 0.0 or x < beta:
        return 0.0, 0.0
    return v - omega * beta, beta


OUTCOMES = {FIRST_PRICE: outcome_first_price, SECOND_PRICE: outcome_second_price}


def outcome_arrays(mechanism: str, v, beta, bids, omega: float, roi_target: float = 1.0):
    """Vectorized outcomes: ``f[..., x], c[..., x]`` for every bid in ``bids``.

    ``v`` and ``beta`` broadcast against each other; a trailing bid axis is added.
    """
    v = np.asarray(v, dtype=float)[..., None]
    beta = np.asarray(beta, dtype=float)[..., None]
    x = np.asarray(bids, dtype=float)
    win = (x >= beta) & (x > 0.0)
    if mechanism == FIRST_PRICE:
        f = np.where(win, v - omega * x, 0.0)
        c = np.where(win, x, 0.0)
    elif mechanism == SECOND_PRICE:
        f = np.where(win, v - omega * beta, 0.0)
        c = np.where(win, np.broadcast_to(beta, win.shape), 0.0)
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    return f / roi_target, c


@dataclass(frozen=True)
class InputModel:
    """Stochastic table or adversarial script of ``(v_t, beta_t)`` pairs.

    For ``kind == "stochastic"``, ``table[i, j]`` is the probability of
    valuation ``valuations[i]`` together with competing bid ``support[j]``.
    For ``kind == "scripted"``, ``script`` is a ``T x 2`` array of
    ``(v_t, beta_t)`` rows.
    """

    kind: Literal["stochastic", "scripted"]
    mechanism: str
    valuations: ValuationGrid
    support: tuple[float, ...]
    table: np.ndarray | None = None
    script: np.ndarray | None = None
    omega: float = 0.0
    roi_target: float = 1.0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0, 1], got {self.omega}")
        if not self.roi_target > 0:
            raise ValueError("roi_target must be positive")
        support = tuple(float(b) for b in self.support)
        if any(b < 0.0 or b > 1.0 for b in support):
            raise ValueError("competing bids must lie in [0, 1]")
        object.__setattr__(self, "support", support)
        if self.kind == "stochastic":
            if self.table is None:
                raise ValueError("stochastic model needs a probability table")
            table = np.array(self.table, dtype=float)
            if table.shape != (self.valuations.n, len(support)):
                raise ValueError(
                    f"table shape {table.shape} does not match "
                    f"({self.valuations.n} valuations, {len(support)} competing bids)"
                )
            if np.any(table < 0):
                raise ValueError("probability table has negative entries")
            if abs(math.fsum(table.ravel()) - 1.0) > 1e-12:
                raise ValueError(f"probability table sums to {table.sum()!r}, not 1")
            table.setflags(write=False)
            object.__setattr__(self, "table", table)
        elif self.kind == "scripted":
            if self.script is None:
                raise ValueError("scripted model needs a script")
            script = np.array(self.script, dtype=float)
            if script.ndim != 2 or script.shape[1] != 2 or len(script) < 1:
                raise ValueError("script must be a nonempty T x 2 array of (v, beta)")
            for v in np.unique(script[:, 0]):
                self.valuations.index(v)
            if np.any(script[:, 1] < 0) or np.any(script[:, 1] > 1):
                raise ValueError("competing bids must lie in [0, 1]")
            script.setflags(write=False)
            object.__setattr__(self, "script", script)
        else:
            raise ValueError(f"unknown input-model kind {self.kind!r}")

    @classmethod
    def stochastic(cls, mechanism, valuations, support, table, omega=0.0, roi_target=1.0):
        return cls("stochastic", mechanism, _vgrid(valuations), tuple(support), table=table,
                   omega=omega, roi_target=roi_target)

    @classmethod
    def scripted(cls, mechanism, valuations, pairs, omega=0.0, roi_target=1.0):
        pairs = np.asarray(pairs, dtype=float)
        support = tuple(sorted(set(pairs[:, 1].tolist())))
        return cls("scripted", mechanism, _vgrid(valuations), support, script=pairs,
                   omega=omega, roi_target=roi_target)

    @property
    def horizon(self) -> int | None:
        return None if self.script is None else len(self.script)

    def outcome(self, v: float, beta: float, x: float) -> tuple[float, float]:
        f, c = OUTCOMES[self.mechanism](v, beta, x, self.omega)
        return f / self.roi_target, c

    def draw(self, T: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Valuation indices, valuations and competing bids for ``T`` rounds."""
        vals = self.valuations.as_array()
        if self.kind == "scripted":
            if T != len(self.script):
                raise ValueError(f"script has {len(self.script)} rounds but the run has T={T}")
            v = self.script[:, 0].copy()
            beta = self.script[:, 1].copy()
            vi = np.array([self.valuations.index(x) for x in v], dtype=np.int64)
            return vi, vals[vi], beta
        flat = self.table.ravel()
        cdf = np.cumsum(flat)
        u = rng.random(T)
        k = np.searchsorted(cdf, u * cdf[-1], side="right")
        k = np.minimum(k, len(flat) - 1)
        vi, bj = np.divmod(k, len(self.support))
        return vi.astype(np.int64), vals[vi], np.asarray(self.support)[bj]

    def check_rewards(self, bids: BidGrid) -> None:
        """Reject grids under which some reachable win would pay a reward outside [0, 1]."""
        f, _ = self.possible_outcomes(bids)
        if f.size and f.max() > 1.0 + 1e-12:
            raise ValueError(f"scaled reward {f.max():.6g} exceeds 1; raise roi_target or rescale valuations")
        if f.size and f.min() < -1e-12:
            i = np.unravel_index(int(np.argmin(f)), f.shape)
            raise ValueError(
                "negative reward reachable: "
                f"{self.mechanism} with omega={self.omega} at pair {i[:-1]} and bid "
                f"{bids.bids[i[-1]]}; restrict the bid grid or lower omega"
            )

    def possible_outcomes(self, bids: BidGrid):
        """Outcome arrays over every pair the model can emit."""
        if self.kind == "stochastic":
            vv, bb = np.meshgrid(self.valuations.as_array(), np.asarray(self.support), indexing="ij")
            mask = self.table > 0
            v, beta = vv[mask], bb[mask]
        else:
            v, beta = self.script[:, 0], self.script[:, 1]
        return outcome_arrays(self.mechanism, v, beta, bids.bids, self.omega, self.roi_target)


def _vgrid(valuations) -> ValuationGrid:
    return valuations if isinstance(valuations, ValuationGrid) else ValuationGrid(tuple(valuations))


# ----------------------------------------------------------------------------
# script generators


@dataclass(frozen=True)
class SafetyCertificate:
    """Evidence that ``safe_bid`` meets the aggregate margin on every k-window."""

    safe_bid_index: int
    safe_bid: float
    k: int
    alpha: float
    budget_margins: tuple[float, ...]
    roi_margins: tuple[float, ...]
    min_window_budget_margin: float
    min_window_roi_margin: float


def window_margins(g: np.ndarray, h: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-round average margins ``-sum(g)/k`` and ``-sum(h)/k`` over all length-k windows."""
    cg = np.concatenate([[0.0], np.cumsum(g)])
    ch = np.concatenate([[0.0], np.cumsum(h)])
    return -(cg[k:] - cg[:-k]) / k, -(ch[k:] - ch[:-k]) / k


def gen_k_safe_script(
    T: int,
    k: int,
    alpha_target: float,
    seed: int,
    *,
    rho: float,
    bids: Sequence[float] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
    valuations: Sequence[float] = (0.6, 0.8, 1.0),
    safe_bid_index: int = 1,
    priced_out: int | None = None,
    omega: float = 0.0,
) -> tuple[InputModel, SafetyCertificate]:
    """First-price script with a bid that is safe on k-windows but not per round.

    Each period of ``k`` rounds starts with ``priced_out`` rounds (default
    ``k // 2``) whose competing bid is at least the valuation, so no bid wins
    with a negative ROI gap there; the remaining rounds have a competing bid at
    or below the safe bid.  The period repeats, so every window of ``k``
    consecutive rounds holds the same number of cheap wins.
    """
    if not 1 <= k <= T:
        raise ValueError(f"need 1 <= k <= T, got k={k}, T={T}")
    if alpha_target <= 0:
        raise ValueError("alpha_target must be positive")
    if alpha_target > rho:
        raise ValueError(
            f"alpha_target={alpha_target} exceeds rho={rho}: the budget gap is at least -rho"
        )
    grid = BidGrid(tuple(bids))
    vgrid = ValuationGrid(tuple(valuations))
    if not 1 <= safe_bid_index < grid.m:
        raise ValueError("safe bid must be a non-void bid")
    b = grid.bids[safe_bid_index]
    p = k // 2 if priced_out is None else int(priced_out)
    if not 0 <= p < k:
        raise ValueError(f"priced_out must be in [0, k), got {p}")
    wins = k - p
    budget_margin = rho - wins * b / k
    # valuations must leave the cheap wins enough ROI slack
    eligible = [v for v in vgrid.valuations if wins * ((v - omega * b) - b) / k >= alpha_target and v > b]
    if budget_margin < alpha_target or not eligible:
        raise ValueError(
            f"no k-safe script for k={k}, alpha={alpha_target}: budget margin {budget_margin:.4g}, "
            f"eligible valuations {eligible}"
        )
    rng = np.random.default_rng(seed)
    v = rng.choice(np.asarray(eligible), size=T)
    phase = np.arange(T) % k
    cheap = phase >= p
    beta_low = rng.uniform(0.0, b, size=T)
    beta_low = np.where(rng.random(T) < 0.25, b, beta_low)
    beta_high = rng.uniform(v, 1.0)
    beta = np.where(cheap, beta_low, beta_high)
    model = InputModel.scripted(FIRST_PRICE, vgrid, np.column_stack([v, beta]), omega=omega)
    cert = certify_safe_bid(model, grid, safe_bid_index, k, rho)
    if min(cert.min_window_budget_margin, cert.min_window_roi_margin) < alpha_target - 1e-12:
        raise ValueError("generated script misses the requested margin")
    return model, cert


def certify_safe_bid(model: InputModel, grid: BidGrid, safe_bid_index: int, k: int, rho: float) -> SafetyCertificate:
    """Per-block and sliding-window margins of one bid on a script."""
    f, c = outcome_arrays(model.mechanism, model.script[:, 0], model.script[:, 1],
                          grid.bids, model.omega, model.roi_target)
    g = c[:, safe_bid_index] - rho
    h = c[:, safe_bid_index] - f[:, safe_bid_index]
    T = len(g)
    nblocks = T // k
    blocks = slice(0, nblocks * k)
    bg = -g[blocks].reshape(nblocks, k).sum(axis=1) / k
    bh = -h[blocks].reshape(nblocks, k).sum(axis=1) / k
    wg, wh = window_margins(g, h, k)
    return SafetyCertificate(
        safe_bid_index=safe_bid_index,
        safe_bid=grid.bids[safe_bid_index],
        k=k,
        alpha=float(min(wg.min(), wh.min())),
        budget_margins=tuple(bg.tolist()),
        roi_margins=tuple(bh.tolist()),
        min_window_budget_margin=float(wg.min()),
        min_window_roi_margin=float(wh.min()),
    )


def gen_phase_shift_script(
    T: int,
    seed: int,
    *,
    valuations: Sequence[float] = (0.6, 1.0),
    benign: tuple[float, float] = (0.0, 0.3),
    hostile: tuple[float, float] = (0.3, 0.55),
    switch: float = 0.5,
    mechanism: str = FIRST_PRICE,
    omega: float = 0.0,
) -> InputModel:
    """Competing bids drawn from a low range, then from a higher range after ``switch * T``."""
    rng = np.random.default_rng(seed)
    v = rng.choice(np.asarray(valuations, dtype=float), size=T)
    cut = int(round(switch * T))
    beta = np.empty(T)
    beta[:cut] = rng.uniform(*benign, size=cut)
    beta[cut:] = rng.uniform(*hostile, size=T - cut)
    return InputModel.scripted(mechanism, valuations, np.column_stack([v, beta]), omega=omega)


def gen_price_out_script(
    T: int,
    seed: int,
    *,
    valuations: Sequence[float] = (0.6, 1.0),
    burst: int = 5,
    period: int = 20,
    base: tuple[float, float] = (0.0, 0.4),
    mechanism: str = FIRST_PRICE,
    omega: float = 0.0,
) -> InputModel:
    """Ordinary competition interrupted by bursts where the competing bid is 1."""
    rng = np.random.default_rng(seed)
    v = rng.choice(np.asarray(valuations, dtype=float), size=T)
    beta = rng.uniform(*base, size=T)
    beta[(np.arange(T) % period) < burst] = 1.0
    return InputModel.scripted(mechanism, valuations, np.column_stack([v, beta]), omega=omega)


GENERATORS = {
    "k-safe": gen_k_safe_script,
    "phase-shift": gen_phase_shift_script,
    "price-out": gen_price_out_script,
}


# ----------------------------------------------------------------------------
# script files
#
#   # roibandit script
#   T = 3
#   mechanism = first-price
#   valuations = 0.5, 1.0
#   bids = 0, 0.5, 1.0
#   omega = 0
#   t,v,beta
#   1,1.0,0.5
#   ...

SCRIPT_HEADER_KEYS = ("T", "mechanism", "valuations", "bids", "omega")


def write_script(path, model: InputModel, bids: BidGrid | None = None) -> None:
    if model.kind != "scripted":
        raise ValueError("only scripted models can be written as script files")
    lines = ["# roibandit script", f"T = {len(model.script)}", f"mechanism = {model.mechanism}",
             "valuations = " + ", ".join(repr(float(v)) for v in model.valuations.valuations)]
    if bids is not None:
        lines.append("bids = " + ", ".join(repr(float(b)) for b in bids.bids))
    lines.append(f"omega = {float(model.omega)!r}")
    lines.append("t,v,beta")
    for t, (v, beta) in enumerate(model.script, start=1):
        lines.append(f"{t},{float(v)!r},{float(beta)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_script(path, roi_target: float = 1.0) -> tuple[InputModel, BidGrid | None]:
    """Parse a script file; returns the model and the bid grid if the header has one."""
    header: dict[str, str] = {}
    rows = []
    in_body = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not in_body:
            if line.replace(" ", "") == "t,v,beta":
                in_body = True
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in SCRIPT_HEADER_KEYS:
                raise ValueError(f"{path}:{lineno}: unexpected header line {raw!r}")
            header[key] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected t,v,beta")
        t, v, beta = int(parts[0]), float(parts[1]), float(parts[2])
        if t != len(rows) + 1:
            raise ValueError(f"{path}:{lineno}: round {t} out of order")
        rows.append((v, beta))
    for key in ("T", "mechanism", "valuations"):
        if key not in header:
            raise ValueError(f"{path}: missing header key {key!r}")
    T = int(header["T"])
    if len(rows) != T:
        raise ValueError(f"{path}: header says T={T} but {len(rows)} rounds follow")
    valuations = tuple(float(x) for x in header["valuations"].split(","))
    bids = BidGrid(tuple(float(x) for x in header["bids"].split(","))) if "bids" in header else None
    omega = float(header.get("omega", 0.0))
    model = InputModel.scripted(header["mechanism"], valuations, rows, omega=omega, roi_target=roi_target)
    return model, bids
