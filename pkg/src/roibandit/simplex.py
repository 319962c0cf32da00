"""Dense tableau simplex for small LPs of the form

    maximize c @ y  subject to  A @ y <= b,  y >= 0,  with b >= 0.

Nonnegative right-hand sides make the all-slack basis feasible, so no phase
one is needed.  Bland's rule picks both the entering and the leaving variable,
which rules out cycling on the degenerate (b = 0) rows these problems have.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12


class UnboundedError(ArithmeticError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    duals: np.ndarray
    basis: list[int]
    iterations: int


def simplex_max(c, A, b, max_iter: int = 10_000) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    nrow, ncol = A.shape
    if c.shape != (ncol,) or b.shape != (nrow,):
        raise ValueError("shape mismatch between c, A and b")
    if np.any(b < 0):
        raise ValueError("simplex_max requires b >= 0")

    tab = np.zeros((nrow + 1, ncol + nrow + 1))
    tab[:nrow, :ncol] = A
    tab[:nrow, ncol:ncol + nrow] = np.eye(nrow)
    tab[:nrow, -1] = b
    tab[-1, :ncol] = -c
    basis = list(range(ncol, ncol + nrow))

    it = 0
    while True:
        reduced = tab[-1, :-1]
        entering = np.flatnonzero(reduced < -PIVOT_TOL)
        if entering.size == 0:
            break
        if it >= max_iter:
            raise RuntimeError("simplex iteration limit reached")
        j = int(entering[0])
        col = tab[:nrow, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise UnboundedError(f"objective unbounded along column {j}")
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: basis[r]))
        tab[i] /= tab[i, j]
        factor = tab[:, j].copy()
        factor[i] = 0.0
        tab -= np.outer(factor, tab[i])
        basis[i] = j
        it += 1

    # Re-solve the final basis against the original data to shed pivoting error.
    full = np.hstack([A, np.eye(nrow)])
    Bmat = full[:, basis]
    xb = np.linalg.solve(Bmat, b)
    y = np.zeros(ncol + nrow)
    y[basis] = np.maximum(xb, 0.0)
    cfull = np.concatenate([c, np.zeros(nrow)])
    duals = np.linalg.solve(Bmat.T, cfull[basis])
    x = y[:ncol]
    return SimplexResult(x=x, value=float(c @ x), duals=duals, basis=basis, iterations=it)
