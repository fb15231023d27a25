"""Self-contained dense simplex over exact rationals.

Solves standard-form programs (minimize c.x subject to A x = b, x >= 0) with
``fractions.Fraction`` coefficients, so optima and certificates are exact and
bit-reproducible.  Floats also work when a positive tolerance is supplied.

Pivoting uses Dantzig's rule and switches permanently to Bland's rule after a
run of degenerate pivots, which guarantees termination.  Artificial columns
are kept through phase 2 (barred from re-entering); their final values form
the basis inverse, from which exact duals are read off.

The one domain-specific wrapper solves a matrix game: the column player's
program is the primal (its row count is the row player's strategy count),
and the row player's optimal mixture comes out of the duals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Number = Fraction | float | int


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list
    objective: Number | None
    duals: list


class _Tableau:
    def __init__(self, c, A, b, tol):
        self.tol = tol
        self.m = len(A)
        self.n = len(c)
        self.flip = [1] * self.m
        rows = []
        for i in range(self.m):
            row = list(A[i])
            rhs = b[i]
            if rhs < 0:
                row = [-v for v in row]
                rhs = -rhs
                self.flip[i] = -1
            rows.append(row + [0] * self.m + [rhs])
        for i in range(self.m):
            rows[i][self.n + i] = _one(rows[i][self.n + i])
        self.rows = rows
        self.basis = [self.n + i for i in range(self.m)]
        self.c = list(c)
        self.blocked = set()  # columns barred from entering

    def width(self) -> int:
        return self.n + self.m + 1

    def run(self, cost, *, bland_threshold) -> str:
        """Price out and iterate to optimality for the given cost vector."""
        width = self.width()
        z = list(cost) + [0]
        # price out the basic columns
        for i, bi in enumerate(self.basis):
            cb = cost[bi]
            if cb != 0:
                row = self.rows[i]
                for j in range(width):
                    if row[j] != 0:
                        z[j] -= cb * row[j]
        bland = False
        stalled = 0
        while True:
            col = self._entering(z, bland)
            if col is None:
                self.z = z
                return "optimal"
            row = self._leaving(col)
            if row is None:
                return "unbounded"
            before = z[-1]
            self._pivot(row, col, z)
            if z[-1] == before:
                stalled += 1
                if stalled >= bland_threshold:
                    bland = True
            else:
                stalled = 0

    def _entering(self, z, bland):
        tol = self.tol
        best = None
        best_val = -tol
        for j in range(self.n + self.m):
            if j in self.blocked:
                continue
            v = z[j]
            if v < best_val:
                if bland:
                    return j
                best, best_val = j, v
        return best

    def _leaving(self, col):
        tol = self.tol
        best = None
        best_ratio = None
        for i in range(self.m):
            a = self.rows[i][col]
            if a > tol:
                ratio = self.rows[i][-1] / a
                if best_ratio is None or ratio < best_ratio or (
                    ratio == best_ratio and self.basis[i] < self.basis[best]
                ):
                    best, best_ratio = i, ratio
        return best

    def _pivot(self, r, c, z):
        row = self.rows[r]
        piv = row[c]
        if piv != 1:
            inv = _one(piv) / piv
            self.rows[r] = row = [v * inv for v in row]
        for i in range(self.m):
            if i == r:
                continue
            factor = self.rows[i][c]
            if factor != 0:
                other = self.rows[i]
                self.rows[i] = [a - factor * b for a, b in zip(other, row)]
        factor = z[c]
        if factor != 0:
            for j in range(len(z)):
                z[j] -= factor * row[j]
        self.basis[r] = c


def _one(template) -> Number:
    return 1.0 if isinstance(template, float) else Fraction(1)


def solve_standard_lp(c: Sequence[Number], A: Sequence[Sequence[Number]],
                      b: Sequence[Number], *, tol: Number = 0) -> LpResult:
    """Minimize c.x s.t. A x = b, x >= 0.  Exact when inputs are rational."""
    tab = _Tableau(c, A, b, tol)
    m, n = tab.m, tab.n
    threshold = 2 * (m + n) + 8

    phase1 = [0] * n + [1] * m
    status = tab.run(phase1, bland_threshold=threshold)
    if status != "optimal":
        raise RuntimeError("phase 1 cannot be unbounded")  # objective >= 0
    if -tab.z[-1] > tol:  # z[-1] holds -objective
        return LpResult("infeasible", [], None, [])

    # Drive artificials out of the basis; drop redundant rows.
    drop = set()
    for i in range(tab.m):
        if tab.basis[i] >= n:
            pivot_col = None
            for j in range(n):
                if abs(tab.rows[i][j]) > tol:
                    pivot_col = j
                    break
            if pivot_col is None:
                drop.add(i)
            else:
                tab._pivot(i, pivot_col, tab.z)
    if drop:
        keep = [i for i in range(tab.m) if i not in drop]
        tab.rows = [tab.rows[i] for i in keep]
        tab.basis = [tab.basis[i] for i in keep]
        tab.m = len(keep)
    tab.blocked = set(range(n, n + m))

    cost = list(c) + [0] * m
    status = tab.run(cost, bland_threshold=threshold)
    if status == "unbounded":
        return LpResult("unbounded", [], None, [])

    x = [0] * n
    for i, bi in enumerate(tab.basis):
        if bi < n:
            x[bi] = tab.rows[i][-1]
    objective = sum(ci * xi for ci, xi in zip(c, x))

    # Duals: y = c_B B^{-1}; B^{-1} sits in the artificial columns.
    duals = [0] * m
    zero = 0 if tol == 0 else 0.0
    raw = {old: zero for old in range(m)}
    for i in range(tab.m):
        cb = cost[tab.basis[i]]
        if cb == 0:
            continue
        for old in range(m):
            v = tab.rows[i][n + old]
            if v != 0:
                raw[old] += cb * v
    for old in range(m):
        duals[old] = raw[old] * tab.flip[old]
    return LpResult("optimal", x, objective, duals)


@dataclass
class MatrixGameSolution:
    value: Number
    row_mixture: list
    col_mixture: list


def solve_matrix_game(payoff: Sequence[Sequence[Number]]) -> MatrixGameSolution:
    """Exact value and optimal mixtures of a zero-sum matrix game.

    The row player maximizes, the column player minimizes.  Entries must be
    nonnegative (payoffs here are winning probabilities in [0, 1]); this lets
    the game value enter the program as a plain nonnegative variable.

    Solved as: min u s.t. (R tau)_i <= u for all rows i, sum tau = 1,
    tau >= 0.  The row mixture is recovered from the duals.
    """
    m = len(payoff)
    n = len(payoff[0])
    for row in payoff:
        if any(v < 0 for v in row):
            raise ValueError("matrix game entries must be nonnegative")
    # variables: tau (n), u (1), slack s (m)
    width = n + 1 + m
    A = []
    b = []
    for i in range(m):
        row = [Fraction(v) for v in payoff[i]] + [Fraction(-1)] + [Fraction(0)] * m
        row[n + 1 + i] = Fraction(1)
        A.append(row)
        b.append(Fraction(0))
    A.append([Fraction(1)] * n + [Fraction(0)] * (1 + m))
    b.append(Fraction(1))
    c = [Fraction(0)] * n + [Fraction(1)] + [Fraction(0)] * m
    res = solve_standard_lp(c, A, b)
    if res.status != "optimal":
        raise RuntimeError(f"matrix game LP ended {res.status}")
    value = res.objective
    col = res.x[:n]
    row_mix = [-res.duals[i] for i in range(m)]
    total = sum(row_mix)
    if total > 0:
        row_mix = [v / total for v in row_mix]
    else:
        row_mix = [Fraction(1, m)] * m
    return MatrixGameSolution(value, row_mix, col)
