"""Exact rational primal simplex on a dense tableau.

Two phases, Bland's rule for both the entering and leaving choice, so
cycling is impossible and every number stays a Fraction from input to
output.  Sized for desk-scale models (a few thousand nonzeros), not for
production solving.

solve_standard handles   min c.x  s.t.  A x {<=,=,>=} b,  x >= 0
and returns the optimum, a solution, and the dual multipliers read off
the final tableau (the certificate of optimality: multipliers times b
reproduces the optimum exactly).
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .errors import InfeasibleError, UnboundedError

__all__ = ["solve_standard"]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _pivot(tableau, objrow, row: int, col: int) -> None:
    pivot_row = tableau[row]
    inv = _ONE / pivot_row[col]
    if inv != 1:
        tableau[row] = pivot_row = [v * inv for v in pivot_row]
    for other in tableau:
        if other is pivot_row:
            continue
        factor = other[col]
        if factor:
            for k, v in enumerate(pivot_row):
                if v:
                    other[k] -= factor * v
    factor = objrow[col]
    if factor:
        for k, v in enumerate(pivot_row):
            if v:
                objrow[k] -= factor * v


def _objective_row(tableau, basis, costs, width: int):
    objrow = list(costs) + [_ZERO]
    for i, b in enumerate(basis):
        cb = costs[b]
        if cb:
            row = tableau[i]
            for k in range(width + 1):
                if row[k]:
                    objrow[k] -= cb * row[k]
    return objrow


def _run_simplex(tableau, objrow, basis, allowed) -> None:
    """Bland iterations until no allowed column prices out negative."""
    width = len(objrow) - 1
    while True:
        entering = -1
        for j in range(width):
            if allowed[j] and objrow[j] < 0:
                entering = j
                break
        if entering < 0:
            return
        leaving = -1
        best = None
        for i, row in enumerate(tableau):
            a = row[entering]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                    best = ratio
                    leaving = i
        if leaving < 0:
            raise UnboundedError("objective decreases without bound")
        _pivot(tableau, objrow, leaving, entering)
        basis[leaving] = entering


def solve_standard(costs: Sequence[Fraction], rows: Sequence[Sequence[Fraction]],
                   senses: Sequence[str], rhs: Sequence[Fraction]):
    """Minimize costs.x over A x (sense) b, x >= 0.

    Returns (value, x, duals) with duals indexed like the input rows.
    Raises InfeasibleError or UnboundedError.
    """
    n = len(costs)
    m = len(rows)
    rows = [list(r) for r in rows]
    rhs = list(rhs)
    senses = list(senses)
    flipped = [False] * m
    for i in range(m):
        if len(rows[i]) != n:
            raise ValueError(f"row {i} has {len(rows[i])} coefficients, expected {n}")
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]
            flipped[i] = True

    # column layout: structural | one slack/surplus per inequality | artificials
    slack_of = [-1] * m
    n_slack = 0
    for i, s in enumerate(senses):
        if s in ("<=", ">="):
            slack_of[i] = n + n_slack
            n_slack += 1
        elif s != "=":
            raise ValueError(f"unknown sense {s!r}")
    art_of = [-1] * m
    n_art = 0
    for i, s in enumerate(senses):
        if s in ("=", ">="):
            art_of[i] = n + n_slack + n_art
            n_art += 1
    width = n + n_slack + n_art

    tableau = []
    basis = []
    for i in range(m):
        row = [Fraction(v) for v in rows[i]] + [_ZERO] * (n_slack + n_art) + [Fraction(rhs[i])]
        if slack_of[i] >= 0:
            row[slack_of[i]] = _ONE if senses[i] == "<=" else -_ONE
        if art_of[i] >= 0:
            row[art_of[i]] = _ONE
            basis.append(art_of[i])
        else:
            basis.append(slack_of[i])
        tableau.append(row)

    structural = [j < n + n_slack for j in range(width)]

    if n_art:
        phase1 = [_ZERO] * (n + n_slack) + [_ONE] * n_art
        objrow = _objective_row(tableau, basis, phase1, width)
        _run_simplex(tableau, objrow, basis, structural)
        residue = sum((tableau[i][-1] for i in range(m) if basis[i] >= n + n_slack), _ZERO)
        if residue != 0:
            raise InfeasibleError("no point satisfies every constraint")
        # pivot leftover zero-level artificials out; drop rows that went redundant
        drop = []
        for i in range(m):
            if basis[i] < n + n_slack:
                continue
            col = next((j for j in range(n + n_slack) if tableau[i][j] != 0), -1)
            if col < 0:
                drop.append(i)
            else:
                _pivot(tableau, objrow, i, col)
                basis[i] = col
        kept = [i for i in range(m) if i not in drop]
        tableau = [tableau[i] for i in kept]
        basis = [basis[i] for i in kept]
    else:
        kept = list(range(m))

    full_costs = [Fraction(c) for c in costs] + [_ZERO] * (n_slack + n_art)
    objrow = _objective_row(tableau, basis, full_costs, width)
    _run_simplex(tableau, objrow, basis, structural)

    x = [_ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = tableau[i][-1]
    value = sum((c * v for c, v in zip(costs, x) if v), _ZERO)

    # duals come off the priced-out identity columns of each surviving row
    duals = [_ZERO] * m
    for pos, orig in enumerate(kept):
        if art_of[orig] >= 0:
            y = -objrow[art_of[orig]]
        elif senses[orig] == "<=":
            y = -objrow[slack_of[orig]]
        else:
            y = objrow[slack_of[orig]]
        duals[orig] = -y if flipped[orig] else y
    return value, x, duals
