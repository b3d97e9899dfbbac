"""Bounded-variable revised simplex for linear programs in canonical form.

Problems are maximization problems with sparse rows ``a.x (<=|=|>=) b`` and
per-variable bounds. Internally every row gets a slack column, so the working
form is ``[A | I] z = b`` with bounds on all of ``z``; inequality senses become
slack bounds. The basis inverse is kept as a sparse LU factorization plus a
product-form eta file, refactored every ``refactor_interval`` pivots.

Cold starts run a two-phase method with artificial columns. Warm starts take a
basis hint (as returned on :class:`LpSolution`) and, when the hint is dual but
not primal feasible, run the dual simplex first; this is what the
branch-and-bound code relies on after a bound change.
"""

from __future__ import annotations

import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "LE",
    "EQ",
    "GE",
    "Row",
    "LpProblem",
    "LpSolution",
    "Basis",
    "Tolerances",
    "ProblemValidationError",
    "IterationLimitError",
    "solve_lp",
    "dump_problem",
    "load_problem",
]

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class ProblemValidationError(ValueError):
    pass


class IterationLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Row:
    coeffs: Mapping[int, float]
    sense: str
    rhs: float


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-9
    pivot: float = 1e-9
    stall_threshold: int = 1000
    refactor_interval: int = 64
    max_iterations: int | None = None


@dataclass(eq=False)
class LpProblem:
    """``maximize objective.x`` subject to ``rows`` and ``lower <= x <= upper``."""

    n_vars: int
    objective: np.ndarray
    rows: list[Row]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = (
            np.zeros(self.n_vars) if self.lower is None else np.asarray(self.lower, dtype=float)
        )
        self.upper = (
            np.full(self.n_vars, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        )
        self.rows = [r if isinstance(r, Row) else Row(*r) for r in self.rows]

    def validate(self) -> None:
        errors = []
        n = self.n_vars
        if n < 0:
            errors.append(f"n_vars={n} is negative")
        for name in ("objective", "lower", "upper"):
            if getattr(self, name).shape != (n,):
                errors.append(f"{name} has shape {getattr(self, name).shape}, expected ({n},)")
        if not errors:
            if not np.all(np.isfinite(self.objective)):
                errors.append("objective has non-finite entries")
            bad = np.flatnonzero(~(self.lower <= self.upper))
            if bad.size:
                errors.append(f"lower > upper for variable {int(bad[0])}")
            if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
                errors.append("infinite bound on the wrong side")
        for i, row in enumerate(self.rows):
            if row.sense not in _SENSES:
                errors.append(f"row {i}: unknown relation {row.sense!r}")
            if not math.isfinite(row.rhs):
                errors.append(f"row {i}: rhs {row.rhs} is not finite")
            for j, a in row.coeffs.items():
                if not 0 <= j < n:
                    errors.append(f"row {i}: variable index {j} out of range")
                elif not math.isfinite(a):
                    errors.append(f"row {i}: coefficient of x{j} is not finite")
        if errors:
            raise ProblemValidationError("; ".join(errors))

    @cached_property
    def compiled(self) -> "_Compiled":
        self.validate()
        return _Compiled.from_problem(self)


@dataclass(frozen=True)
class Basis:
    """Basis over structural + slack columns (``n_vars + n_rows`` entries)."""

    basic: np.ndarray
    status: np.ndarray


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective_value: float
    iterations: int
    basis: Basis | None = None
    certificate: float | None = None  # positive infeasibility measure when infeasible
    ray: int | None = None  # improving column when unbounded
    max_violation: float = 0.0


class _Compiled:
    """Column-major working matrix ``[A | I | I]`` (structurals, slacks, artificials)."""

    def __init__(self, n, m, A, b, slack_lo, slack_hi, cost):
        self.n, self.m = n, m
        self.N = n + 2 * m
        self.A = A.tocsc()
        self.A.sort_indices()
        self.AT = self.A.T.tocsr()
        self.b = b
        self.slack_lo = slack_lo
        self.slack_hi = slack_hi
        self.cost = cost  # minimization cost for structurals

    @classmethod
    def from_problem(cls, p: LpProblem) -> "_Compiled":
        n, m = p.n_vars, len(p.rows)
        rows_i, cols_j, vals = [], [], []
        b = np.empty(m)
        slo = np.empty(m)
        shi = np.empty(m)
        for i, row in enumerate(p.rows):
            for j, a in row.coeffs.items():
                if a != 0.0:
                    rows_i.append(i)
                    cols_j.append(int(j))
                    vals.append(float(a))
            b[i] = row.rhs
            if row.sense == LE:
                slo[i], shi[i] = 0.0, np.inf
            elif row.sense == GE:
                slo[i], shi[i] = -np.inf, 0.0
            else:
                slo[i], shi[i] = 0.0, 0.0
        eye = np.arange(m)
        rows_i = np.concatenate([np.asarray(rows_i, dtype=np.int64), eye, eye])
        cols_j = np.concatenate([np.asarray(cols_j, dtype=np.int64), n + eye, n + m + eye])
        vals = np.concatenate([np.asarray(vals, dtype=float), np.ones(2 * m)])
        A = sp.csc_matrix((vals, (rows_i, cols_j)), shape=(m, n + 2 * m))
        return cls(n, m, A, b, slo, shi, -p.objective.astype(float))

    def column(self, j: int) -> np.ndarray:
        out = np.zeros(self.m)
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        out[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return out


class _Factor:
    """LU of the basis matrix followed by product-form eta updates."""

    def __init__(self, A: sp.csc_matrix, basic: np.ndarray):
        B = A[:, basic].tocsc()
        self.lu = splu(B, permc_spec="COLAMD") if basic.size else None
        self.rows: list[int] = []
        self.etas: list[np.ndarray] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return np.zeros(0)
        x = self.lu.solve(a)
        for r, w in zip(self.rows, self.etas):
            xr = x[r]
            if xr != 0.0:
                x += w * xr
        return x

    def btran(self, y: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return np.zeros(0)
        y = y.copy()
        for r, w in zip(reversed(self.rows), reversed(self.etas)):
            y[r] += y @ w
        return self.lu.solve(y, trans="T")

    def update(self, alpha: np.ndarray, r: int) -> None:
        w = -alpha / alpha[r]
        w[r] = 1.0 / alpha[r] - 1.0
        self.rows.append(r)
        self.etas.append(w)

    @property
    def n_updates(self) -> int:
        return len(self.rows)


class _Engine:
    def __init__(self, comp: _Compiled, lower: np.ndarray, upper: np.ndarray, tol: Tolerances):
        self.c = comp
        self.tol = tol
        m = comp.m
        self.lo = np.concatenate([lower, comp.slack_lo, np.zeros(m)])
        self.hi = np.concatenate([upper, comp.slack_hi, np.zeros(m)])
        self.status = np.empty(comp.N, dtype=np.int8)
        self.basic = np.empty(m, dtype=np.int64)
        self.x = np.zeros(comp.N)
        self.iterations = 0
        self.ray: int | None = None
        self.certificate: float | None = None
        self.factor: _Factor | None = None
        self.max_iter = tol.max_iterations or 50 * (comp.N + m) + 1000

    # -- basis bookkeeping -------------------------------------------------

    def _nonbasic_values(self) -> None:
        st = self.status
        self.x[st == _LOWER] = self.lo[st == _LOWER]
        self.x[st == _UPPER] = self.hi[st == _UPPER]
        self.x[st == _FREE] = 0.0

    def refactor(self) -> None:
        self.factor = _Factor(self.c.A, self.basic)
        self._nonbasic_values()
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.x[self.basic] = self.factor.ftran(self.c.b - self.c.A @ xn)

    def _status_for_bounds(self, j: int) -> int:
        if np.isfinite(self.lo[j]):
            return _LOWER
        if np.isfinite(self.hi[j]):
            return _UPPER
        return _FREE

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self.factor.btran(cost[self.basic])
        d = cost - self.c.AT @ y
        d[self.basic] = 0.0
        return d

    def _pivot(self, q: int, r: int, alpha: np.ndarray, leave_status: int, leave_value: float) -> None:
        leaving = self.basic[r]
        self.status[leaving] = leave_status
        self.x[leaving] = leave_value
        self.basic[r] = q
        self.status[q] = _BASIC
        self.factor.update(alpha, r)
        if self.factor.n_updates >= self.tol.refactor_interval:
            self.refactor()

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations > self.max_iter:
            raise IterationLimitError(f"simplex exceeded the iteration cap of {self.max_iter}")

    # -- starting points ---------------------------------------------------

    def cold_start(self) -> np.ndarray:
        """Slack basis plus artificials; returns the phase-one cost vector."""
        c = self.c
        n, m = c.n, c.m
        for j in range(n):
            self.status[j] = self._status_for_bounds(j)
        self.status[n:] = _LOWER
        self._nonbasic_values()
        self.x[n:] = 0.0
        resid = c.b - c.A[:, :n] @ self.x[:n]
        cost1 = np.zeros(c.N)
        fl = self.tol.feasibility
        for i in range(m):
            s, a = n + i, n + m + i
            r = resid[i]
            if self.lo[s] - fl <= r <= self.hi[s] + fl:
                self.basic[i] = s
                self.status[s] = _BASIC
                self.x[s] = r
                continue
            bound = self.lo[s] if r < self.lo[s] else self.hi[s]
            self.status[s] = _LOWER if bound == self.lo[s] else _UPPER
            self.x[s] = bound
            excess = r - bound
            if excess > 0:
                self.lo[a], self.hi[a], cost1[a] = 0.0, np.inf, 1.0
            else:
                self.lo[a], self.hi[a], cost1[a] = -np.inf, 0.0, -1.0
            self.basic[i] = a
            self.status[a] = _BASIC
            self.x[a] = excess
        self.refactor()
        return cost1

    def warm_start(self, hint: Basis) -> bool:
        c = self.c
        nm = c.n + c.m
        basic = np.asarray(hint.basic, dtype=np.int64)
        status = np.asarray(hint.status, dtype=np.int8)
        if basic.shape != (c.m,) or status.shape != (nm,) or np.any(basic >= nm):
            return False
        if np.count_nonzero(status == _BASIC) != c.m or np.any(status[basic] != _BASIC):
            return False
        self.basic[:] = basic
        self.status[:nm] = status
        self.status[nm:] = _LOWER
        for j in np.flatnonzero(status != _BASIC):
            st = status[j]
            if (st == _LOWER and not np.isfinite(self.lo[j])) or (
                st == _UPPER and not np.isfinite(self.hi[j])
            ) or (st == _FREE and (np.isfinite(self.lo[j]) or np.isfinite(self.hi[j]))):
                self.status[j] = self._status_for_bounds(j)
        try:
            self.refactor()
        except RuntimeError:
            return False
        return bool(np.all(np.isfinite(self.x)))

    # -- primal simplex ----------------------------------------------------

    def primal(self, cost: np.ndarray) -> str:
        tol = self.tol
        ftol, otol, ptol = tol.feasibility, tol.optimality, tol.pivot
        best = cost @ self.x
        stall = 0
        bland = False
        while True:
            d = self.reduced_costs(cost)
            st = self.status
            movable = self.lo < self.hi
            cand = movable & (
                ((st == _LOWER) & (d < -otol))
                | ((st == _UPPER) & (d > otol))
                | ((st == _FREE) & (np.abs(d) > otol))
            )
            if not cand.any():
                return "optimal"
            self._tick()
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
            sgn = 1.0 if d[q] < 0 else -1.0
            alpha = self.factor.ftran(self.c.column(q))
            delta = -sgn * alpha
            xb = self.x[self.basic]
            lb = self.lo[self.basic]
            ub = self.hi[self.basic]
            dec = delta < -ptol
            inc = delta > ptol
            with np.errstate(invalid="ignore", divide="ignore"):
                exact = np.full(self.c.m, np.inf)
                exact[dec] = (xb[dec] - lb[dec]) / -delta[dec]
                exact[inc] = (ub[inc] - xb[inc]) / delta[inc]
                exact = np.maximum(exact, 0.0)
                if bland:
                    theta = exact.min(initial=np.inf)
                    r = -1
                    if np.isfinite(theta):
                        ties = np.flatnonzero(exact <= theta + 1e-12)
                        r = int(ties[np.argmin(self.basic[ties])])
                else:
                    relaxed = np.full(self.c.m, np.inf)
                    relaxed[dec] = (xb[dec] - lb[dec] + ftol) / -delta[dec]
                    relaxed[inc] = (ub[inc] - xb[inc] + ftol) / delta[inc]
                    theta_max = relaxed.min(initial=np.inf)
                    r = -1
                    theta = np.inf
                    if np.isfinite(theta_max):
                        ok = exact <= theta_max
                        r = int(np.argmax(np.where(ok, np.abs(delta), -1.0)))
                        theta = exact[r]
            flip = self.hi[q] - self.lo[q]
            if not np.isfinite(theta) and not np.isfinite(flip):
                self.ray = q
                return "unbounded"
            if flip <= theta:
                self.x[self.basic] += flip * delta
                if st[q] == _LOWER:
                    st[q] = _UPPER
                    self.x[q] = self.hi[q]
                else:
                    st[q] = _LOWER
                    self.x[q] = self.lo[q]
            else:
                self.x[self.basic] += theta * delta
                self.x[q] += sgn * theta
                hit_lower = delta[r] < 0
                leave_val = lb[r] if hit_lower else ub[r]
                self._pivot(q, r, alpha, _LOWER if hit_lower else _UPPER, leave_val)
            obj = cost @ self.x
            if obj < best - 1e-12 * (1.0 + abs(best)):
                best = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= tol.stall_threshold:
                    bland = True

    # -- dual simplex ------------------------------------------------------

    def dual_feasible(self, cost: np.ndarray, slack: float = 1e-7) -> bool:
        d = self.reduced_costs(cost)
        st = self.status
        movable = self.lo < self.hi
        bad = movable & (
            ((st == _LOWER) & (d < -slack))
            | ((st == _UPPER) & (d > slack))
            | ((st == _FREE) & (np.abs(d) > slack))
        )
        return not bad.any()

    def dual(self, cost: np.ndarray, max_iter: int) -> str:
        tol = self.tol
        ftol, otol, ptol = tol.feasibility, tol.optimality, tol.pivot
        m = self.c.m
        for _ in range(max_iter):
            xb = self.x[self.basic]
            lb = self.lo[self.basic]
            ub = self.hi[self.basic]
            below = lb - xb
            above = xb - ub
            infeas = np.maximum(np.maximum(below, above), 0.0)
            r = int(np.argmax(infeas))
            if infeas[r] <= ftol:
                return "optimal"
            self._tick()
            going_up = below[r] > above[r]
            e = np.zeros(m)
            e[r] = 1.0
            rho = self.factor.btran(e)
            arow = self.c.AT @ rho
            d = self.reduced_costs(cost)
            st = self.status
            movable = (self.lo < self.hi) & (st != _BASIC)
            can_inc = movable & ((st == _LOWER) | (st == _FREE))
            can_dec = movable & ((st == _UPPER) | (st == _FREE))
            if going_up:
                inc = can_inc & (arow < -ptol)
                dec = can_dec & (arow > ptol)
            else:
                inc = can_inc & (arow > ptol)
                dec = can_dec & (arow < -ptol)
            elig = inc | dec
            if not elig.any():
                self.certificate = float(infeas[r])
                return "infeasible"
            dj = np.where(inc, d, -d)
            dj = np.maximum(dj, 0.0)
            aa = np.abs(arow)
            with np.errstate(divide="ignore", invalid="ignore"):
                relaxed = np.where(elig, (dj + otol) / aa, np.inf)
                exact = np.where(elig, dj / aa, np.inf)
            tmax = relaxed.min(initial=np.inf)
            pick = elig & (exact <= tmax)
            q = int(np.argmax(np.where(pick, aa, -1.0)))
            alpha = self.factor.ftran(self.c.column(q))
            if abs(alpha[r]) < ptol:
                self.refactor()
                continue
            bound = lb[r] if going_up else ub[r]
            dxq = (xb[r] - bound) / alpha[r]
            self.x[self.basic] -= alpha * dxq
            self.x[q] += dxq
            self._pivot(q, r, alpha, _LOWER if going_up else _UPPER, bound)
        return "limit"

    # -- artificial clean-up -----------------------------------------------

    def drive_out_artificials(self) -> None:
        c = self.c
        nm = c.n + c.m
        for r in range(c.m):
            if self.basic[r] < nm:
                continue
            e = np.zeros(c.m)
            e[r] = 1.0
            arow = c.AT @ self.factor.btran(e)
            arow[nm:] = 0.0
            arow[self.basic] = 0.0
            q = int(np.argmax(np.abs(arow)))
            if abs(arow[q]) < 1e-9:
                continue
            alpha = self.factor.ftran(c.column(q))
            art = self.basic[r]
            self._pivot(q, r, alpha, _LOWER, 0.0)
            self.x[art] = 0.0
        self.lo[nm:] = 0.0
        self.hi[nm:] = 0.0
        self.refactor()

    def primal_violation(self) -> float:
        viol = np.maximum(self.lo - self.x, 0.0) + np.maximum(self.x - self.hi, 0.0)
        resid = np.abs(self.c.A @ self.x - self.c.b)
        return float(max(viol.max(initial=0.0), resid.max(initial=0.0)))

    def basis(self) -> Basis:
        nm = self.c.n + self.c.m
        return Basis(self.basic.copy(), self.status[:nm].copy())


def _solve_compiled(
    comp: _Compiled,
    lower: np.ndarray,
    upper: np.ndarray,
    objective: np.ndarray,
    tol: Tolerances,
    basis: Basis | None = None,
) -> LpSolution:
    eng = _Engine(comp, lower, upper, tol)
    cost = np.concatenate([comp.cost, np.zeros(2 * comp.m)])
    n = comp.n

    def finish(status: str) -> LpSolution:
        x = eng.x[:n].copy()
        return LpSolution(
            status=status,
            x=x,
            objective_value=float(objective @ x),
            iterations=eng.iterations,
            basis=eng.basis() if status == "optimal" else None,
            certificate=eng.certificate,
            ray=eng.ray,
            max_violation=eng.primal_violation(),
        )

    warm = basis is not None and eng.warm_start(basis)
    if warm:
        xb = eng.x[eng.basic]
        primal_ok = np.all(xb >= eng.lo[eng.basic] - tol.feasibility) and np.all(
            xb <= eng.hi[eng.basic] + tol.feasibility
        )
        if not primal_ok:
            if eng.dual_feasible(cost):
                outcome = eng.dual(cost, max_iter=10 * comp.m + 1000)
                if outcome == "infeasible":
                    return finish("infeasible")
                if outcome == "limit":
                    warm = False
            else:
                warm = False
    if not warm:
        eng = _Engine(comp, lower, upper, tol)
        cost1 = eng.cold_start()
        eng.primal(cost1)
        infeas = float(cost1 @ eng.x)
        if infeas > tol.feasibility * max(1.0, float(np.abs(comp.b).max(initial=0.0))):
            eng.certificate = infeas
            return finish("infeasible")
        eng.drive_out_artificials()

    for _ in range(5):
        outcome = eng.primal(cost)
        if outcome == "unbounded":
            return finish("unbounded")
        eng.refactor()
        if eng.primal_violation() > tol.feasibility:
            # drift after many updates: restore feasibility from the fresh factorization
            if eng.dual(cost, max_iter=10 * comp.m + 1000) == "infeasible":
                return finish("infeasible")
            continue
        d = eng.reduced_costs(cost)
        st = eng.status
        movable = eng.lo < eng.hi
        if not (
            movable
            & (((st == _LOWER) & (d < -tol.optimality)) | ((st == _UPPER) & (d > tol.optimality)))
        ).any():
            break
    return finish("optimal")


def solve_lp(p: LpProblem, tol: Tolerances | None = None, basis: Basis | None = None) -> LpSolution:
    """Solve ``p`` to optimality, or report infeasibility / unboundedness.

    ``basis`` is an optional starting basis from a previous solve of a problem
    with the same rows (bounds may differ). Results are deterministic.
    """
    tol = tol or Tolerances()
    comp = p.compiled
    return _solve_compiled(comp, p.lower, p.upper, p.objective, tol, basis)


# ---------------------------------------------------------------------------
# text dump
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def dump_problem(p: LpProblem, dest=None, binary_vars: Sequence[int] = ()) -> str:
    """Write ``p`` as text: header lines, then one constraint row per line.

    Row lines are ``<relation> <rhs> <index>:<coef> ...``. Header lines are
    ``vars <n>``, ``obj ...`` (sparse), ``bound <j> <lo> <hi>`` for
    non-default bounds and ``binary ...``.
    """
    buf = io.StringIO()
    buf.write("# phesopt lp v1\n")
    buf.write(f"vars {p.n_vars}\n")
    obj = " ".join(f"{j}:{_fmt(v)}" for j, v in enumerate(p.objective) if v != 0.0)
    buf.write(f"obj {obj}\n".rstrip() + "\n")
    for j in range(p.n_vars):
        if p.lower[j] != 0.0 or p.upper[j] != np.inf:
            buf.write(f"bound {j} {_fmt(p.lower[j])} {_fmt(p.upper[j])}\n")
    if len(binary_vars):
        buf.write("binary " + " ".join(str(int(j)) for j in sorted(binary_vars)) + "\n")
    for row in p.rows:
        coeffs = " ".join(f"{j}:{_fmt(a)}" for j, a in sorted(row.coeffs.items()))
        buf.write(f"{row.sense} {_fmt(row.rhs)} {coeffs}".rstrip() + "\n")
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text, encoding="utf-8")
    return text


def load_problem(text: str) -> tuple[LpProblem, list[int]]:
    """Inverse of :func:`dump_problem`; returns the problem and its binary indices."""
    n = None
    objective = lower = upper = None
    rows: list[Row] = []
    binaries: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        try:
            if head == "vars":
                n = int(rest[0])
                objective = np.zeros(n)
                lower = np.zeros(n)
                upper = np.full(n, np.inf)
            elif n is None:
                raise ValueError("'vars' line must come first")
            elif head == "obj":
                for tok in rest:
                    j, v = tok.split(":")
                    objective[int(j)] = float(v)
            elif head == "bound":
                j = int(rest[0])
                lower[j], upper[j] = float(rest[1]), float(rest[2])
            elif head == "binary":
                binaries.extend(int(tok) for tok in rest)
            elif head in _SENSES:
                coeffs = {}
                for tok in rest[1:]:
                    j, v = tok.split(":")
                    coeffs[int(j)] = float(v)
                rows.append(Row(coeffs, head, float(rest[0])))
            else:
                raise ValueError(f"unknown line type {head!r}")
        except (ValueError, IndexError) as exc:
            raise ProblemValidationError(f"line {lineno}: {exc}") from None
    if n is None:
        raise ProblemValidationError("missing 'vars' line")
    return LpProblem(n, objective, rows, lower, upper), binaries
