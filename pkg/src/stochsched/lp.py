"""Time-indexed LP relaxations of expected weighted completion time.

Four variants share one variable set y[i][j][s] = expected amount of
job j under way on machine i inside unit slot [s, s+1):

  S    mean-based objective with the variance correction, plus the
       per-job bound that total completion weight covers total y-mass
  P    simpler objective with the correction pinned at its worst case
  S_o  S with variables only at slots s >= r_j
  P_o  P with variables only at slots s >= r_j

Models are plain data; `solve_lp` runs the exact simplex; `export_lp`
and `parse_lp` give a versioned text form that round-trips bytewise.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from . import simplex
from .core import FractionLike, Instance, ProcDist, as_fraction, machine_order
from .errors import HorizonTooSmallError, NotAPolicyDistributionError, SchemaError

__all__ = [
    "VARIANTS",
    "Variable",
    "Constraint",
    "LpModel",
    "LpSolution",
    "YSolution",
    "default_horizon",
    "build_primal",
    "build_dual",
    "y_from_x",
    "completion_from_y",
    "weighted_mass",
    "solve_lp",
    "export_lp",
    "parse_lp",
]

VARIANTS = ("S", "P", "S_o", "P_o")


def _is_online(variant: str) -> bool:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant.endswith("_o")


def _is_mean_only(variant: str) -> bool:
    return variant.startswith("P")


@dataclass(frozen=True)
class Variable:
    name: str
    free: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[str, Fraction], ...]
    sense: str
    rhs: Fraction


@dataclass(frozen=True)
class LpModel:
    sense: str
    horizon: int
    variables: tuple[Variable, ...]
    objective: tuple[tuple[str, Fraction], ...]
    constraints: tuple[Constraint, ...]

    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)


@dataclass(frozen=True)
class LpSolution:
    value: Fraction
    primal: dict[str, Fraction]
    dual: dict[str, Fraction]


@dataclass(frozen=True)
class YSolution:
    """Sparse y-mass: (machine, job, slot) -> Fraction."""

    entries: tuple[tuple[tuple[int, int, int], Fraction], ...]

    def __init__(self, entries):
        items = entries.items() if isinstance(entries, Mapping) else entries
        cleaned = sorted(((i, j, s), as_fraction(v)) for (i, j, s), v in items if v != 0)
        object.__setattr__(self, "entries", tuple(cleaned))

    def as_dict(self) -> dict[tuple[int, int, int], Fraction]:
        return dict(self.entries)

    @property
    def jobs(self) -> tuple[int, ...]:
        return tuple(sorted({j for (_, j, _), _ in self.entries}))

    def mass_of(self, job_id: int) -> Fraction:
        return sum((v for (_, j, _), v in self.entries if j == job_id), Fraction(0))


def _slot_durations(inst: Instance, variant: str) -> dict[tuple[int, int], int]:
    """Slots a witness schedule books per permitted pair: the whole
    support for S-variants, the rounded-up mean for P-variants."""
    need = {}
    for job in inst.jobs:
        for machine in job.permitted:
            d = job.dist(machine)
            need[(machine, job.id)] = d.max_value if not _is_mean_only(variant) else math.ceil(d.mean)
    return need


def default_horizon(inst: Instance, variant: str) -> int:
    """Latest release plus everybody's worst-machine duration: enough
    room for any serialized schedule, so never infeasible."""
    need = _slot_durations(inst, variant)
    total = max((job.release for job in inst.jobs), default=0)
    for job in inst.jobs:
        total += max(need[(machine, job.id)] for machine in job.permitted)
    return max(total, 1)


def _check_witness(inst: Instance, variant: str, horizon: int) -> None:
    """Certify the horizon by fitting the greedy schedule into it.

    Each job books a block of `_slot_durations` slots on its greedy
    machine, in priority order, starting no earlier than its release
    for online variants.  Those blocks are a feasible y, so a horizon
    that holds the last block is provably large enough.
    """
    from . import greedy_list  # deferred: greedy_list does not import lp

    need = _slot_durations(inst, variant)
    online = _is_online(variant)
    assignment, _ = greedy_list.assign(inst)
    makespan = 0
    for machine in range(1, inst.machines + 1):
        clock = 0
        for job_id in machine_order(inst, machine, assignment.jobs_on(machine)):
            start = max(clock, inst.job(job_id).release) if online else clock
            clock = start + need[(machine, job_id)]
        makespan = max(makespan, clock)
    if makespan > horizon:
        raise HorizonTooSmallError(
            f"variant {variant} needs {makespan} slots for the greedy schedule, horizon is {horizon}")


def _objective_coeff(variant: str, dist: ProcDist, s: int) -> Fraction:
    base = (Fraction(s) + Fraction(1, 2)) / dist.mean
    if _is_mean_only(variant):
        return base + Fraction(1, 2)
    return base + (1 - dist.scv) / 2


def build_primal(inst: Instance, variant: str, horizon: Optional[int] = None) -> LpModel:
    """Time-indexed relaxation of the chosen variant at the horizon.

    Truncation is safe for upper-bound comparisons: shrinking the slot
    range only shrinks the feasible set, so the truncated optimum is
    never below the untruncated one.
    """
    online = _is_online(variant)
    T = default_horizon(inst, variant) if horizon is None else horizon
    if T < 1:
        raise HorizonTooSmallError("horizon must be at least 1")
    _check_witness(inst, variant, T)

    variables = []
    objective = []
    mass_rows: dict[int, list[tuple[str, Fraction]]] = {}
    need_rows: dict[int, list[tuple[str, Fraction]]] = {}
    cap_rows: dict[tuple[int, int], list[tuple[str, Fraction]]] = {}
    for job in inst.jobs:
        start = job.release if online else 0
        need_rows[job.id] = []
        mass_rows[job.id] = []
        for machine in job.permitted:
            dist = job.dist(machine)
            for s in range(start, T):
                name = f"y_{machine}_{job.id}_{s}"
                variables.append(Variable(name))
                coeff = _objective_coeff(variant, dist, s)
                objective.append((name, job.weight * coeff))
                need_rows[job.id].append((name, 1 / dist.mean))
                cap_rows.setdefault((machine, s), []).append((name, Fraction(1)))
                if not _is_mean_only(variant) and coeff != 1:
                    # zero terms would not survive serialization anyway
                    mass_rows[job.id].append((name, coeff - 1))

    constraints = []
    for (machine, s) in sorted(cap_rows):
        constraints.append(Constraint(f"cap_{machine}_{s}", tuple(cap_rows[(machine, s)]),
                                      "<=", Fraction(1)))
    for job in inst.jobs:
        constraints.append(Constraint(f"need_{job.id}", tuple(need_rows[job.id]),
                                      "=", Fraction(1)))
    if not _is_mean_only(variant):
        for job in inst.jobs:
            constraints.append(Constraint(f"mass_{job.id}", tuple(mass_rows[job.id]),
                                          ">=", Fraction(0)))
    return LpModel("min", T, tuple(variables), tuple(objective), tuple(constraints))


def build_dual(inst: Instance, variant: str, horizon: Optional[int] = None) -> LpModel:
    """LP dual of the mean-only primal: one free alpha per job, one
    nonnegative beta per machine and slot, maximizing sum(alpha) minus
    sum(beta) under the pricing constraints.

    Accepts the dual names D / D_o as aliases for P / P_o.
    """
    variant = {"D": "P", "D_o": "P_o"}.get(variant, variant)
    if not _is_mean_only(variant):
        raise ValueError("duals exist for the mean-only variants only (P/D, P_o/D_o)")
    online = _is_online(variant)
    T = default_horizon(inst, variant) if horizon is None else horizon
    if T < 1:
        raise HorizonTooSmallError("horizon must be at least 1")
    _check_witness(inst, variant, T)

    variables = [Variable(f"alpha_{job.id}", free=True) for job in inst.jobs]
    objective = [(f"alpha_{job.id}", Fraction(1)) for job in inst.jobs]
    for machine in range(1, inst.machines + 1):
        for s in range(T):
            variables.append(Variable(f"beta_{machine}_{s}"))
            objective.append((f"beta_{machine}_{s}", Fraction(-1)))

    constraints = []
    for job in inst.jobs:
        start = job.release if online else 0
        for machine in job.permitted:
            mean = job.dist(machine).mean
            for s in range(start, T):
                price = job.weight * ((Fraction(s) + Fraction(1, 2)) / mean + Fraction(1, 2))
                constraints.append(Constraint(
                    f"price_{machine}_{job.id}_{s}",
                    ((f"alpha_{job.id}", 1 / mean), (f"beta_{machine}_{s}", Fraction(-1))),
                    "<=", price))
    return LpModel("max", T, tuple(variables), tuple(objective), tuple(constraints))


def y_from_x(x: Mapping[tuple[int, int, int], FractionLike],
             dists: Mapping[tuple[int, int], ProcDist]) -> YSolution:
    """Turn start probabilities x[(machine, job, t)] into y-mass.

    A job started at t is still running in slot s with the probability
    its duration exceeds s - t; summed over starts this gives the
    expected in-progress mass per slot.
    """
    per_job: dict[int, Fraction] = {}
    for (machine, job_id, t), prob in x.items():
        p = as_fraction(prob)
        if p < 0:
            raise NotAPolicyDistributionError(f"negative start probability at {(machine, job_id, t)}")
        per_job[job_id] = per_job.get(job_id, Fraction(0)) + p
    for job_id, total in per_job.items():
        if total != 1:
            raise NotAPolicyDistributionError(f"job {job_id} start probabilities sum to {total}")
    y: dict[tuple[int, int, int], Fraction] = {}
    for (machine, job_id, t), prob in x.items():
        p = as_fraction(prob)
        if p == 0:
            continue
        dist = dists[(machine, job_id)]
        for s in range(t, t + dist.max_value):
            key = (machine, job_id, s)
            y[key] = y.get(key, Fraction(0)) + p * dist.tail(s - t)
    return YSolution(y)


def completion_from_y(y: YSolution, variant: str,
                      dists: Mapping[tuple[int, int], ProcDist]) -> dict[int, Fraction]:
    """Per-job completion value the variant's objective assigns to y."""
    _is_online(variant)  # validates the name
    out: dict[int, Fraction] = {}
    for (machine, job_id, s), mass in y.entries:
        coeff = _objective_coeff(variant, dists[(machine, job_id)], s)
        out[job_id] = out.get(job_id, Fraction(0)) + mass * coeff
    return out


def weighted_mass(y: YSolution, weights: Mapping[int, FractionLike]) -> Fraction:
    """Total weight-scaled y-mass (the quantity the S-variants bound)."""
    total = Fraction(0)
    for (_, job_id, _), mass in y.entries:
        total += as_fraction(weights[job_id]) * mass
    return total


def solve_lp(model: LpModel) -> LpSolution:
    """Exact optimum of the model via two-phase simplex.

    Free variables are split into positive and negative parts; maximize
    becomes minimize of the negation.  The returned duals are Lagrange
    multipliers for the constraints as written: multipliers times the
    right-hand sides equal the optimal value.
    """
    col_of: dict[str, int] = {}
    split: dict[str, tuple[int, int]] = {}
    n_cols = 0
    for var in model.variables:
        if var.free:
            split[var.name] = (n_cols, n_cols + 1)
            n_cols += 2
        else:
            col_of[var.name] = n_cols
            n_cols += 1

    def fill(coeffs, row):
        for name, value in coeffs:
            if name in col_of:
                row[col_of[name]] += value
            elif name in split:
                plus, minus = split[name]
                row[plus] += value
                row[minus] -= value
            else:
                raise ValueError(f"unknown variable {name!r}")

    costs = [Fraction(0)] * n_cols
    fill(model.objective, costs)
    if model.sense == "max":
        costs = [-c for c in costs]
    elif model.sense != "min":
        raise ValueError(f"sense must be min or max, got {model.sense!r}")

    rows = []
    senses = []
    rhs = []
    for con in model.constraints:
        row = [Fraction(0)] * n_cols
        fill(con.coeffs, row)
        rows.append(row)
        senses.append(con.sense)
        rhs.append(con.rhs)

    value, x, duals = simplex.solve_standard(costs, rows, senses, rhs)
    if model.sense == "max":
        value = -value
        duals = [-d for d in duals]

    primal = {}
    for var in model.variables:
        if var.free:
            plus, minus = split[var.name]
            primal[var.name] = x[plus] - x[minus]
        else:
            primal[var.name] = x[col_of[var.name]]
    dual = {con.name: duals[i] for i, con in enumerate(model.constraints)}
    return LpSolution(value, primal, dual)


def _frac_str(value: Fraction) -> str:
    return str(value)


def _terms_str(terms) -> str:
    return " + ".join(f"{_frac_str(v)} {name}" for name, v in terms if v != 0)


def export_lp(model: LpModel) -> str:
    """Versioned plain text.  First line holds the sense, horizon and
    objective; then one bound line per variable, one line per
    constraint, and a closing `end`.  An empty model is the header
    alone.  Output is canonical, so parse/export round-trips bytewise."""
    header = f"TIDX-LP v1 {model.sense} horizon={model.horizon} obj {_terms_str(model.objective)}".rstrip()
    if not model.variables and not model.constraints:
        return header + "\n"
    lines = [header]
    for var in model.variables:
        lines.append(f"{'free' if var.free else 'nonneg'} {var.name}")
    for con in model.constraints:
        lines.append(f"{con.name}: {_terms_str(con.coeffs)} {con.sense} {_frac_str(con.rhs)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_HEADER = re.compile(
    rf"^TIDX-LP v1 (min|max) horizon=(\d+) obj(?: (.*))?$")
_BOUND = re.compile(rf"^(nonneg|free) ({_NAME})$")
_CONSTRAINT = re.compile(rf"^({_NAME}): (.*) (<=|>=|=) (-?\d+(?:/\d+)?)$")
_TERM = re.compile(rf"^(-?\d+(?:/\d+)?) ({_NAME})$")


def _parse_terms(text: str) -> tuple[tuple[str, Fraction], ...]:
    if not text:
        return ()
    terms = []
    for chunk in text.split(" + "):
        m = _TERM.match(chunk)
        if not m:
            raise SchemaError(f"bad term {chunk!r}")
        terms.append((m.group(2), Fraction(m.group(1))))
    return tuple(terms)


def parse_lp(text: str) -> LpModel:
    lines = text.splitlines()
    if not lines:
        raise SchemaError("empty input")
    m = _HEADER.match(lines[0])
    if not m:
        raise SchemaError(f"bad header {lines[0]!r}")
    sense, horizon = m.group(1), int(m.group(2))
    objective = _parse_terms(m.group(3) or "")
    body = [line for line in lines[1:] if line.strip()]
    if not body:
        return LpModel(sense, horizon, (), objective, ())
    if body[-1] != "end":
        raise SchemaError("missing end line")
    variables = []
    constraints = []
    for line in body[:-1]:
        bound = _BOUND.match(line)
        if bound:
            if constraints:
                raise SchemaError("variable bounds must precede constraints")
            variables.append(Variable(bound.group(2), free=bound.group(1) == "free"))
            continue
        con = _CONSTRAINT.match(line)
        if not con:
            raise SchemaError(f"bad line {line!r}")
        constraints.append(Constraint(con.group(1), _parse_terms(con.group(2)),
                                      con.group(3), Fraction(con.group(4))))
    return LpModel(sense, horizon, tuple(variables), objective, tuple(constraints))
