"""Instance model: discrete processing-time distributions, jobs, machines.

Everything exact: probabilities, weights and all derived quantities are
`fractions.Fraction`, so identities tested elsewhere hold to the bit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    ForbiddenPairError,
    ProbSumError,
    SmallMeanWarning,
    UnschedulableError,
    ZeroMeanError,
)

FractionLike = Union[Fraction, int, str]

__all__ = [
    "ProcDist",
    "Job",
    "Instance",
    "PrioritySplit",
    "as_fraction",
    "max_scv",
    "priority_split",
    "fixed_assignment_cost",
]


def as_fraction(value: FractionLike) -> Fraction:
    """Coerce ints, 'p/q' strings, or Fractions to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a number here")
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class ProcDist:
    """Finite distribution over integer processing times >= 0.

    `pmf` maps value -> probability; probabilities are positive and sum
    to one.  Instances are immutable and safe to share between jobs.
    """

    pmf: tuple[tuple[int, Fraction], ...]

    def __init__(self, pmf: Union[Mapping[int, FractionLike], Iterable[tuple[int, FractionLike]]]):
        items = pmf.items() if isinstance(pmf, Mapping) else pmf
        norm = {}
        for value, prob in items:
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"support value {value!r} must be a nonnegative integer")
            p = as_fraction(prob)
            if p <= 0:
                raise ValueError(f"probability of {value} must be positive, got {p}")
            norm[value] = norm.get(value, Fraction(0)) + p
        if sum(norm.values(), Fraction(0)) != 1:
            raise ProbSumError(f"probabilities sum to {sum(norm.values(), Fraction(0))}, not 1")
        object.__setattr__(self, "pmf", tuple(sorted(norm.items())))

    @classmethod
    def point(cls, value: int) -> "ProcDist":
        return cls({value: Fraction(1)})

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.pmf)

    @property
    def max_value(self) -> int:
        return self.pmf[-1][0]

    @property
    def is_point(self) -> bool:
        return len(self.pmf) == 1

    @cached_property
    def mean(self) -> Fraction:
        return sum((Fraction(v) * p for v, p in self.pmf), Fraction(0))

    @cached_property
    def second_moment(self) -> Fraction:
        return sum((Fraction(v * v) * p for v, p in self.pmf), Fraction(0))

    @property
    def variance(self) -> Fraction:
        return self.second_moment - self.mean * self.mean

    @cached_property
    def scv(self) -> Fraction:
        """Squared coefficient of variation Var/mean^2."""
        if self.mean == 0:
            raise ZeroMeanError("squared coefficient of variation needs a positive mean")
        return self.variance / (self.mean * self.mean)

    def tail(self, r: FractionLike) -> Fraction:
        """P(X > r)."""
        r = as_fraction(r)
        return sum((p for v, p in self.pmf if v > r), Fraction(0))

    def sample(self, rng) -> int:
        """Draw one value.  Exact: the uniform draw is compared against
        the rational CDF, so no support point is ever mis-binned."""
        u = rng.random()
        acc = Fraction(0)
        for value, prob in self.pmf:
            acc += prob
            if u < acc:
                return value
        return self.pmf[-1][0]


@dataclass(frozen=True)
class Job:
    """One job: positive rational weight, integer release, and one
    distribution per machine (None where the machine cannot run it)."""

    id: int
    weight: Fraction
    release: int
    proc: tuple[Optional[ProcDist], ...]

    def __init__(self, id: int, weight: FractionLike, release: int,
                 proc: Sequence[Optional[ProcDist]]):
        if not isinstance(id, int) or id < 1:
            raise ValueError(f"job id must be a positive integer, got {id!r}")
        w = as_fraction(weight)
        if w <= 0:
            raise ValueError(f"job {id}: weight must be positive, got {w}")
        if not isinstance(release, int) or isinstance(release, bool) or release < 0:
            raise ValueError(f"job {id}: release must be a nonnegative integer")
        proc = tuple(proc)
        if not any(d is not None for d in proc):
            raise UnschedulableError(f"job {id} is forbidden on every machine")
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "release", release)
        object.__setattr__(self, "proc", proc)

    def dist(self, machine: int) -> ProcDist:
        """Distribution on `machine` (1-based); raises on a forbidden pair."""
        d = self.proc[machine - 1]
        if d is None:
            raise ForbiddenPairError(f"job {self.id} cannot run on machine {machine}")
        return d

    def allows(self, machine: int) -> bool:
        return self.proc[machine - 1] is not None

    @cached_property
    def permitted(self) -> tuple[int, ...]:
        return tuple(i + 1 for i, d in enumerate(self.proc) if d is not None)


@dataclass(frozen=True)
class Instance:
    """m unrelated machines and jobs numbered 1..n in arrival order."""

    machines: int
    jobs: tuple[Job, ...]

    def __init__(self, machines: int, jobs: Sequence[Job]):
        if not isinstance(machines, int) or machines < 1:
            raise ValueError("machine count must be a positive integer")
        jobs = tuple(jobs)
        small = 0
        seen_rows: set[int] = set()  # id()s are stable here: all rows stay alive
        for pos, job in enumerate(jobs, start=1):
            if job.id != pos:
                raise ValueError(f"job ids must be 1..n in order; position {pos} has id {job.id}")
            if len(job.proc) != machines:
                raise ValueError(f"job {job.id} lists {len(job.proc)} machines, expected {machines}")
            if pos > 1 and job.release < jobs[pos - 2].release:
                raise ValueError(f"releases must be nondecreasing in id; job {job.id} breaks this")
            if id(job.proc) in seen_rows:
                continue  # shared row already validated
            seen_rows.add(id(job.proc))
            for d in job.proc:
                if d is None:
                    continue
                if d.mean == 0:
                    raise ZeroMeanError(
                        f"job {job.id} has zero expected processing time on some machine")
                if d.mean < 1:
                    small += 1
        if small:
            warnings.warn(
                "some machine/job pairs have expected processing time < 1; "
                "approximation guarantees assume means >= 1",
                SmallMeanWarning, stacklevel=2)
        object.__setattr__(self, "machines", machines)
        object.__setattr__(self, "jobs", jobs)

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> Job:
        return self.jobs[job_id - 1]

    def mean(self, machine: int, job_id: int) -> Fraction:
        return self.job(job_id).dist(machine).mean

    def ratio(self, machine: int, job_id: int) -> Fraction:
        """Priority w_j / E[P_ij] used for sequencing on `machine`."""
        job = self.job(job_id)
        return job.weight / job.dist(machine).mean

    @property
    def has_releases(self) -> bool:
        return any(job.release > 0 for job in self.jobs)


@dataclass(frozen=True)
class PrioritySplit:
    """Jobs that go before (`before`) and after (`after`) a reference job
    on one machine.  The reference job itself sits in `before`."""

    before: frozenset[int]
    after: frozenset[int]


def priority_split(inst: Instance, machine: int, job_id: int) -> PrioritySplit:
    """Partition all jobs around `job_id` on `machine`.

    Higher ratio goes before; equal ratio goes before exactly for ids
    <= job_id, so the split is a total order consistent with arrival.
    Jobs forbidden on the machine land in `after` (they never precede
    anything there).  Fraction comparison is exact, which is the whole
    point of keeping weights rational.
    """
    ref = inst.ratio(machine, job_id)
    before, after = [], []
    for job in inst.jobs:
        if not job.allows(machine):
            after.append(job.id)
            continue
        r = inst.ratio(machine, job.id)
        if r > ref or (r == ref and job.id <= job_id):
            before.append(job.id)
        else:
            after.append(job.id)
    return PrioritySplit(frozenset(before), frozenset(after))


def max_scv(inst: Instance) -> Fraction:
    """Largest squared coefficient of variation over permitted pairs."""
    best = Fraction(0)
    for job in inst.jobs:
        for d in job.proc:
            if d is not None and d.scv > best:
                best = d.scv
    return best


def machine_order(inst: Instance, machine: int, job_ids: Iterable[int]) -> list[int]:
    """Processing order on one machine: ratio descending, id ascending."""
    return sorted(job_ids, key=lambda j: (-inst.ratio(machine, j), j))


def fixed_assignment_cost(inst: Instance, assignment: Mapping[int, int]) -> Fraction:
    """Weighted completion total when each machine runs its assigned jobs
    in priority order with processing times pinned at their means.

    `assignment` maps job ids to machine ids; a partial mapping prices
    just the assigned prefix, which is what the greedy's score-equals-
    cost-delta invariant is stated over.  Release dates are ignored
    here; this is the list-model objective.
    """
    per_machine: dict[int, list[int]] = {}
    for job_id, machine in assignment.items():
        job = inst.job(job_id)
        if not job.allows(machine):
            raise ForbiddenPairError(f"job {job.id} assigned to forbidden machine {machine}")
        per_machine.setdefault(machine, []).append(job.id)
    total = Fraction(0)
    for machine, ids in per_machine.items():
        clock = Fraction(0)
        for job_id in machine_order(inst, machine, ids):
            clock += inst.mean(machine, job_id)
            total += inst.job(job_id).weight * clock
    return total
