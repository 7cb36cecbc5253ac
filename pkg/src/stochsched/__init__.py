"""Stochastic scheduling on unrelated machines: greedy assignment policies,
time-indexed LP relaxations, and dual-fitting lower-bound certificates."""

from .core import Instance, Job, PrioritySplit, ProcDist, as_fraction, fixed_assignment_cost, max_scv, priority_split

__all__ = [
    "Instance",
    "Job",
    "PrioritySplit",
    "ProcDist",
    "as_fraction",
    "fixed_assignment_cost",
    "max_scv",
    "priority_split",
]
