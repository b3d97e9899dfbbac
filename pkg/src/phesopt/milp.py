"""Branch-and-bound over binary variables, plus a brute-force reference solver."""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import Basis, LpProblem, Tolerances, _solve_compiled

__all__ = ["MilpProblem", "MilpSolution", "solve_milp", "solve_milp_bruteforce"]

BRUTEFORCE_MAX_BINARIES = 20


@dataclass(eq=False)
class MilpProblem:
    lp: LpProblem
    binary_vars: tuple[int, ...] = ()

    def __post_init__(self):
        self.binary_vars = tuple(sorted(int(j) for j in set(self.binary_vars)))

    def validate(self) -> None:
        self.lp.validate()
        n = self.lp.n_vars
        for j in self.binary_vars:
            if not 0 <= j < n:
                raise ValueError(f"binary index {j} out of range 0..{n - 1}")
            if self.lp.upper[j] < 0 or self.lp.lower[j] > 1:
                raise ValueError(f"binary x{j} has bounds outside [0, 1]")

    def binary_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lp.lower.copy()
        hi = self.lp.upper.copy()
        b = list(self.binary_vars)
        lo[b] = np.maximum(np.ceil(lo[b] - 1e-9), 0.0)
        hi[b] = np.minimum(np.floor(hi[b] + 1e-9), 1.0)
        return lo, hi


@dataclass
class MilpSolution:
    status: str  # "optimal" | "infeasible" | "time_limit_best"
    x: np.ndarray | None
    objective_value: float
    nodes_explored: int
    gap: float
    bound: float = np.nan
    tree: list[tuple[float, float]] = field(default_factory=list)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


@dataclass(order=True)
class _Node:
    key: tuple[float, int]
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    basis: Basis | None = field(compare=False)


def _relative_gap(bound: float, incumbent: float) -> float:
    return max(bound - incumbent, 0.0) / max(1.0, abs(incumbent))


def solve_milp(
    p: MilpProblem,
    time_limit: float | None = 60.0,
    node_limit: int = 200_000,
    integrality_tol: float = 1e-6,
    gap_tol: float = 1e-9,
    tol: Tolerances | None = None,
    record_tree: bool = False,
) -> MilpSolution:
    """Best-first branch-and-bound on LP relaxation bounds.

    Branches on the most fractional binary (lowest index on ties). Children are
    solved as soon as they are created, warm-started from the parent basis.
    Integral relaxations are polished by re-solving with the binaries fixed at
    their rounded values. The node count includes the root.
    """
    p.validate()
    tol = tol or Tolerances()
    comp = p.lp.compiled
    objective = p.lp.objective
    bins = np.asarray(p.binary_vars, dtype=np.int64)
    start = time.monotonic()
    counter = itertools.count()
    tree: list[tuple[float, float]] = []

    def lp(lo, hi, basis=None):
        return _solve_compiled(comp, lo, hi, objective, tol, basis)

    def fractionality(x):
        if bins.size == 0:
            return np.zeros(0)
        v = x[bins]
        return np.abs(v - np.round(v))

    best_x: np.ndarray | None = None
    best_obj = -np.inf

    def offer(sol, lo, hi) -> None:
        """Polish an integral relaxation and keep it if it beats the incumbent."""
        nonlocal best_x, best_obj
        flo, fhi = lo.copy(), hi.copy()
        vals = np.round(sol.x[bins])
        flo[bins] = vals
        fhi[bins] = vals
        pol = lp(flo, fhi, sol.basis)
        if pol.status == "optimal" and pol.max_violation <= tol.feasibility:
            x, obj = pol.x, pol.objective_value
        else:
            x, obj = sol.x, sol.objective_value
        if obj > best_obj:
            best_x, best_obj = x.copy(), obj

    lo0, hi0 = p.binary_bounds()
    if np.any(lo0 > hi0):
        return MilpSolution("infeasible", None, -np.inf, 0, np.inf)
    root = lp(lo0, hi0)
    nodes = 1
    if root.status == "infeasible":
        return MilpSolution("infeasible", None, -np.inf, nodes, np.inf)
    if root.status == "unbounded":
        raise ValueError("LP relaxation is unbounded; binaries cannot bound the objective")

    heap: list[_Node] = []
    if fractionality(root.x).max(initial=0.0) <= integrality_tol:
        offer(root, lo0, hi0)
    else:
        # cheap rounding heuristic for an early incumbent
        rlo, rhi = lo0.copy(), hi0.copy()
        vals = np.clip(np.round(root.x[bins]), rlo[bins], rhi[bins])
        rlo[bins] = vals
        rhi[bins] = vals
        rounded = lp(rlo, rhi, root.basis)
        if rounded.status == "optimal":
            offer(rounded, rlo, rhi)
        heapq.heappush(heap, _Node((-root.objective_value, next(counter)), lo0, hi0, root.x, root.objective_value, root.basis))

    limited = False
    while heap:
        top = heap[0]
        if top.bound <= best_obj + gap_tol * max(1.0, abs(best_obj)):
            heap.clear()
            break
        if nodes >= node_limit or (time_limit is not None and time.monotonic() - start > time_limit):
            limited = True
            break
        node = heapq.heappop(heap)
        frac = fractionality(node.x)
        k = int(np.argmax(frac))
        j = int(bins[k])
        for value in (0.0, 1.0):
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[j] = hi[j] = value
            child = lp(lo, hi, node.basis)
            nodes += 1
            if child.status != "optimal":
                continue
            if record_tree:
                tree.append((node.bound, child.objective_value))
            if child.objective_value <= best_obj + gap_tol * max(1.0, abs(best_obj)):
                continue
            if fractionality(child.x).max(initial=0.0) <= integrality_tol:
                offer(child, lo, hi)
            else:
                heapq.heappush(
                    heap,
                    _Node((-child.objective_value, next(counter)), lo, hi, child.x, child.objective_value, child.basis),
                )

    if not limited:
        if best_x is None:
            return MilpSolution("infeasible", None, -np.inf, nodes, np.inf, tree=tree)
        return MilpSolution("optimal", best_x, best_obj, nodes, 0.0, best_obj, tree)
    bound = max(heap[0].bound, best_obj) if heap else best_obj
    if best_x is None:
        return MilpSolution("time_limit_best", None, -np.inf, nodes, np.inf, bound, tree)
    return MilpSolution("time_limit_best", best_x, best_obj, nodes, _relative_gap(bound, best_obj), bound, tree)


def solve_milp_bruteforce(p: MilpProblem, tol: Tolerances | None = None) -> MilpSolution:
    """Enumerate every binary assignment and solve the residual LP (test oracle)."""
    p.validate()
    k = len(p.binary_vars)
    if k > BRUTEFORCE_MAX_BINARIES:
        raise ValueError(f"refusing to enumerate 2^{k} assignments (limit {BRUTEFORCE_MAX_BINARIES})")
    tol = tol or Tolerances()
    comp = p.lp.compiled
    lo0, hi0 = p.binary_bounds()
    bins = list(p.binary_vars)
    best = MilpSolution("infeasible", None, -np.inf, 0, np.inf)
    count = 0
    for assignment in itertools.product((0.0, 1.0), repeat=k):
        count += 1
        vals = np.asarray(assignment)
        if k and (np.any(vals < lo0[bins]) or np.any(vals > hi0[bins])):
            continue
        lo, hi = lo0.copy(), hi0.copy()
        lo[bins] = vals
        hi[bins] = vals
        sol = _solve_compiled(comp, lo, hi, p.lp.objective, tol)
        if sol.status == "unbounded":
            raise ValueError("residual LP is unbounded")
        if sol.status == "optimal" and sol.objective_value > best.objective_value:
            best = MilpSolution("optimal", sol.x, sol.objective_value, count, 0.0, sol.objective_value)
    best.nodes_explored = count
    return best
