"""Sparse Gaussian elimination over the rationals.

Rows are dicts ``{column: Fraction}``.  Pivots are taken at the smallest
column of each row so reduction only ever introduces larger columns.
"""
from __future__ import annotations

from fractions import Fraction


class Echelon:
    def __init__(self, ncols: int):
        self.ncols = ncols
        self.pivots: dict[int, dict[int, Fraction]] = {}

    def reduce(self, row: dict) -> dict:
        row = {c: Fraction(v) for c, v in row.items() if v != 0}
        while row:
            c = min(row)
            piv = self.pivots.get(c)
            if piv is None:
                break
            f = row[c]
            for j, v in piv.items():
                w = row.get(j, 0) - f * v
                if w:
                    row[j] = w
                else:
                    row.pop(j, None)
        return row

    def add(self, row: dict) -> bool:
        """Insert a row; returns True if it increased the rank."""
        row = self.reduce(row)
        if not row:
            return False
        c = min(row)
        inv = 1 / row[c]
        self.pivots[c] = {j: v * inv for j, v in row.items()}
        return True

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def nullspace(self) -> list[list[Fraction]]:
        """Basis of {x : A x = 0}, one vector per free column (ascending)."""
        free = [c for c in range(self.ncols) if c not in self.pivots]
        order = sorted(self.pivots, reverse=True)
        basis = []
        for f in free:
            x = [Fraction(0)] * self.ncols
            x[f] = Fraction(1)
            for c in order:
                s = Fraction(0)
                for j, v in self.pivots[c].items():
                    if j != c and x[j]:
                        s += v * x[j]
                x[c] = -s
            basis.append(x)
        return basis


def exact_rank(rows, ncols: int) -> int:
    ech = Echelon(ncols)
    for r in rows:
        ech.add(r)
    return ech.rank


def solve_square(A, b):
    """Exact solve of a small dense square system (lists of Fractions)."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(bb)] for row, bb in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def inverse(A):
    n = len(A)
    cols = [solve_square(A, [Fraction(int(i == j)) for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def determinant(A) -> Fraction:
    n = len(A)
    M = [[Fraction(v) for v in row] for row in A]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return det
