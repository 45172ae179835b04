"""Branch-and-bound over the binary variables of a conic program.

Pure feasibility search: a node is pruned only on a certified infeasible
relaxation, a numerical failure forces branching instead of pruning, and a
claimed feasible point is always confirmed by re-solving with every binary
pinned.  This keeps the verdict exactly equal to exhaustive enumeration of
the binary assignments.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..conic_model import ConicProgram
from .socp import RelaxationResult, WarmStart, solve_relaxation

__all__ = ["MicpResult", "solve_micp"]

INT_TOL = 1e-6


@dataclass
class MicpResult:
    status: str  # "feasible" | "infeasible" | "budget_exceeded"
    x: np.ndarray | None = None
    binaries: dict[int, int] = field(default_factory=dict)
    nodes: int = 0
    relaxation_solves: int = 0
    ipm_iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _most_fractional(point, unfixed):
    """Index of the unfixed binary closest to 1/2; ties to the lowest index."""
    dist = [abs(point[i] - round(point[i])) for i in unfixed]
    best = int(np.argmax(dist))
    return unfixed[best], dist[best]


def solve_micp(
    prog: ConicProgram,
    start: WarmStart | None = None,
    node_budget: int = 10_000,
) -> MicpResult:
    """Best-first feasibility branch-and-bound on the binary variables.

    Returns Feasible with a point as soon as a confirmed integer-feasible
    relaxation exists, Infeasible when every branch is pruned by an
    infeasibility certificate, and BudgetExceeded (a distinct status, never
    conflated with infeasible) when the node budget runs out first.
    """
    binaries = prog.binary_indices()
    counter = 0
    heap: list[tuple[tuple, int, dict, WarmStart | None]] = []
    heapq.heappush(heap, ((0, 0), counter, {}, start))
    nodes = solves = ipm_iters = 0

    while heap:
        if nodes >= node_budget:
            return MicpResult("budget_exceeded", None, {}, nodes, solves, ipm_iters)
        _, _, fixed, warm = heapq.heappop(heap)
        nodes += 1
        res = solve_relaxation(prog, warm, fixed)
        solves += 1
        ipm_iters += res.iterations
        unfixed = [i for i in binaries if i not in fixed]

        if res.status == "infeasible":
            continue  # certified prune

        if res.status == "feasible":
            rounded = {i: int(round(res.x[i])) for i in unfixed}
            frac = [i for i in unfixed if abs(res.x[i] - rounded[i]) > INT_TOL]
            if not frac:
                if not unfixed:
                    return MicpResult(
                        "feasible",
                        res.x,
                        {i: int(round(res.x[i])) for i in binaries},
                        nodes,
                        solves,
                        ipm_iters,
                    )
                # confirm by pinning everything; the relaxation point being
                # integral does not by itself certify the integer program
                pinned = dict(fixed)
                pinned.update(rounded)
                confirm = solve_relaxation(prog, WarmStart(res.x), pinned)
                solves += 1
                ipm_iters += confirm.iterations
                if confirm.status == "feasible":
                    return MicpResult(
                        "feasible",
                        confirm.x,
                        {i: int(round(confirm.x[i])) for i in binaries},
                        nodes,
                        solves,
                        ipm_iters,
                    )
                # fall through and branch: the rounding was a false lead
            branch_var, _ = _most_fractional(res.x, unfixed) if frac else (unfixed[0], 0.0)
            child_warm = WarmStart(res.x.copy())
            first = int(round(res.x[branch_var]))
        else:
            # numerical failure: cannot prune, branch blindly
            if not unfixed:
                # retry once from scratch before giving up on this leaf
                retry = solve_relaxation(prog, None, fixed)
                solves += 1
                ipm_iters += retry.iterations
                if retry.status == "feasible":
                    return MicpResult(
                        "feasible",
                        retry.x,
                        {i: int(round(retry.x[i])) for i in binaries},
                        nodes,
                        solves,
                        ipm_iters,
                    )
                if retry.status == "infeasible":
                    continue
                raise ArithmeticError(
                    "relaxation solver failed on a fully pinned node; "
                    "verdict would be unsound"
                )
            branch_var = unfixed[0]
            child_warm = warm
            first = 0

        frac_count = len([i for i in unfixed if i != branch_var])
        for value in (first, 1 - first):
            child = dict(fixed)
            child[branch_var] = value
            counter += 1
            heapq.heappush(heap, ((frac_count, counter), counter, child, child_warm))

    return MicpResult("infeasible", None, {}, nodes, solves, ipm_iters)
