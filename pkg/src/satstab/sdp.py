"""Linear-objective LMI problems and a small dense semidefinite solver.

Problems have the form

    maximize    c . y
    subject to  F0 + sum_i y_i Fi  >=  margin * I    (one or more blocks)
                lower_k <= y_k (<= upper_k)          (scalar box bounds)

over a packed variable vector ``y`` described by a :class:`VarSpace`.

The solver is a deterministic two-phase path-following method on the log-det
barrier of the constraint blocks. Phase one maximizes the smallest block
slack to find a strictly feasible point (or an infeasibility certificate);
phase two follows the central path, shrinking the barrier weight until the
implied duality gap meets ``gap_tol``. There is no randomized state anywhere:
identical problems produce identical reports.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ShapeError
from .linalg import as_matrix, sym_eig, sym_part

__all__ = [
    "INFEASIBLE",
    "MAX_ITERATIONS",
    "NUMERICAL_ERROR",
    "OPTIMAL",
    "LmiConstraint",
    "LmiProblem",
    "SolveOptions",
    "SolveReport",
    "VarSpace",
    "affine_constraint",
    "check_feasible",
    "dump_problem",
    "load_problem",
    "solve",
]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
MAX_ITERATIONS = "MaxIterations"
NUMERICAL_ERROR = "NumericalError"


@dataclass
class VarSpace:
    """Named decision variables and their packing into one coordinate vector.

    Packing order is fixed: scalars, symmetric upper triangles (row-major),
    diagonal entries, rectangular blocks (row-major). This makes solve
    reports byte-reproducible across runs.
    """

    scalars: Sequence[str] = ()
    sym_blocks: Sequence[tuple[str, int]] = ()
    diag_blocks: Sequence[tuple[str, int]] = ()
    rect_blocks: Sequence[tuple[str, tuple[int, int]]] = ()

    def __post_init__(self):
        self.scalars = tuple(self.scalars)
        self.sym_blocks = tuple((n, int(d)) for n, d in self.sym_blocks)
        self.diag_blocks = tuple((n, int(d)) for n, d in self.diag_blocks)
        self.rect_blocks = tuple((n, (int(r), int(c))) for n, (r, c) in self.rect_blocks)
        spans: dict[str, tuple[int, int]] = {}
        k = 0
        for name in self.scalars:
            spans[name] = (k, k + 1)
            k += 1
        for name, d in self.sym_blocks:
            spans[name] = (k, k + d * (d + 1) // 2)
            k = spans[name][1]
        for name, d in self.diag_blocks:
            spans[name] = (k, k + d)
            k += d
        for name, (r, c) in self.rect_blocks:
            spans[name] = (k, k + r * c)
            k = spans[name][1]
        if len(spans) != len(self.scalars) + len(self.sym_blocks) + len(self.diag_blocks) + len(self.rect_blocks):
            raise ShapeError("variable names must be unique")
        self._spans = spans
        self._size = k

    @property
    def size(self) -> int:
        return self._size

    def span(self, name: str) -> tuple[int, int]:
        try:
            return self._spans[name]
        except KeyError:
            raise ShapeError(f"unknown variable {name!r}") from None

    def scalar_index(self, name: str) -> int:
        if name not in self.scalars:
            raise ShapeError(f"{name!r} is not a scalar variable")
        return self._spans[name][0]

    def trace_coords(self, name: str) -> list[int]:
        """Packed coordinates holding the diagonal of a sym or diag block."""
        a, _ = self.span(name)
        for n, d in self.sym_blocks:
            if n == name:
                out, k = [], a
                for i in range(d):
                    out.append(k)
                    k += d - i
                return out
        for n, d in self.diag_blocks:
            if n == name:
                return list(range(a, a + d))
        raise ShapeError(f"{name!r} is not a sym or diag block")

    def unpack(self, y: np.ndarray) -> dict[str, float | np.ndarray]:
        y = np.asarray(y, dtype=float)
        if y.shape != (self._size,):
            raise ShapeError(f"packed vector must have length {self._size}, got {y.shape}")
        parts: dict[str, float | np.ndarray] = {}
        for name in self.scalars:
            parts[name] = float(y[self._spans[name][0]])
        for name, d in self.sym_blocks:
            a, b = self._spans[name]
            M = np.zeros((d, d))
            iu = np.triu_indices(d)
            M[iu] = y[a:b]
            M.T[iu] = y[a:b]
            parts[name] = M
        for name, d in self.diag_blocks:
            a, b = self._spans[name]
            parts[name] = np.diag(y[a:b])
        for name, (r, c) in self.rect_blocks:
            a, b = self._spans[name]
            parts[name] = y[a:b].reshape(r, c)
        return parts

    def pack(self, parts: Mapping[str, float | np.ndarray]) -> np.ndarray:
        y = np.zeros(self._size)
        for name in self.scalars:
            y[self._spans[name][0]] = float(parts[name])
        for name, d in self.sym_blocks:
            a, b = self._spans[name]
            M = as_matrix(parts[name], d, d)
            y[a:b] = M[np.triu_indices(d)]
        for name, d in self.diag_blocks:
            a, b = self._spans[name]
            M = np.asarray(parts[name], dtype=float)
            y[a:b] = np.diag(M) if M.ndim == 2 else M
        for name, (r, c) in self.rect_blocks:
            a, b = self._spans[name]
            y[a:b] = as_matrix(parts[name], r, c).ravel()
        return y


@dataclass
class LmiConstraint:
    """One block constraint F0 + sum_i y_i Fi >= margin * I."""

    F0: np.ndarray
    Fi: dict[int, np.ndarray]
    name: str = ""

    def __post_init__(self):
        self.F0 = sym_part(self.F0)
        d = self.F0.shape[0]
        self.Fi = {int(i): sym_part(as_matrix(F, d, d)) for i, F in self.Fi.items()}

    @property
    def block_dim(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        M = self.F0.copy()
        for i, F in self.Fi.items():
            M += y[i] * F
        return M


@dataclass
class LmiProblem:
    """LMI constraints, a linear objective to maximize, and scalar box bounds."""

    vars: VarSpace
    constraints: list[LmiConstraint]
    objective: np.ndarray
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.vars.size,):
            raise ShapeError(
                f"objective must have length {self.vars.size}, got {self.objective.shape}")
        if not np.all(np.isfinite(self.objective)):
            raise ShapeError("objective coefficients must be finite")
        for con in self.constraints:
            for i in con.Fi:
                if not 0 <= i < self.vars.size:
                    raise ShapeError(f"constraint {con.name!r} addresses coordinate {i}")
        for name in list(self.lower) + list(self.upper):
            self.vars.scalar_index(name)


def affine_constraint(vs: VarSpace, fn: Callable[[dict], np.ndarray], name: str = "") -> LmiConstraint:
    """Extract exact (F0, Fi) coefficients from an affine matrix-valued map.

    ``fn`` receives unpacked variables and must be affine in them; evaluating
    at zero and at unit coordinate vectors recovers the coefficients exactly.
    """
    F0 = sym_part(fn(vs.unpack(np.zeros(vs.size))))
    Fi: dict[int, np.ndarray] = {}
    e = np.zeros(vs.size)
    for i in range(vs.size):
        e[i] = 1.0
        D = sym_part(fn(vs.unpack(e))) - F0
        e[i] = 0.0
        if np.any(D != 0.0):
            Fi[i] = D
    return LmiConstraint(F0=F0, Fi=Fi, name=name)


@dataclass
class SolveOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    max_iter: int = 200
    margin: float = 1e-7


@dataclass
class SolveReport:
    status: str
    y: np.ndarray
    objective: float
    min_block_eigs: list[float]
    iterations: int
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# solver internals
# ---------------------------------------------------------------------------

class _Compiled:
    """Constraint block in stacked form for fast barrier evaluation."""

    __slots__ = ("F0", "idx", "stack", "dim")

    def __init__(self, F0: np.ndarray, Fi: dict[int, np.ndarray]):
        self.F0 = F0
        self.idx = np.array(sorted(Fi), dtype=int)
        self.dim = F0.shape[0]
        if len(self.idx):
            self.stack = np.stack([Fi[i] for i in self.idx])
        else:
            self.stack = np.zeros((0, self.dim, self.dim))

    def value(self, y: np.ndarray) -> np.ndarray:
        if len(self.idx) == 0:
            return self.F0
        return self.F0 + np.einsum("k,kab->ab", y[self.idx], self.stack)


def _cholesky(M: np.ndarray) -> np.ndarray | None:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


class _Barrier:
    """log-det barrier over compiled blocks; 1x1 blocks run batched."""

    def __init__(self, blocks: list[_Compiled], m: int):
        self.blocks = blocks
        self.m = m
        self.nu = sum(b.dim for b in blocks)
        self.big = [b for b in blocks if b.dim > 1]
        ones = [b for b in blocks if b.dim == 1]
        self.s_f0 = np.array([b.F0[0, 0] for b in ones])
        self.s_C = np.zeros((len(ones), m))
        for r, b in enumerate(ones):
            for k, i in enumerate(b.idx):
                self.s_C[r, i] = b.stack[k][0, 0]

    def _scalar_values(self, y) -> np.ndarray:
        return self.s_f0 + self.s_C @ y

    def min_eig(self, y) -> float:
        vals = [float(np.linalg.eigvalsh(b.value(y))[0]) for b in self.big]
        if len(self.s_f0):
            vals.append(float(np.min(self._scalar_values(y))))
        return min(vals)

    def strictly_feasible(self, y) -> bool:
        if len(self.s_f0) and np.min(self._scalar_values(y)) <= 0.0:
            return False
        return all(_cholesky(b.value(y)) is not None for b in self.big)

    def logdet_sum(self, y) -> float | None:
        total = 0.0
        if len(self.s_f0):
            v = self._scalar_values(y)
            if np.min(v) <= 0.0:
                return None
            total += float(np.sum(np.log(v)))
        for b in self.big:
            L = _cholesky(b.value(y))
            if L is None:
                return None
            total += 2.0 * float(np.sum(np.log(np.diag(L))))
        return total

    def grad_hess(self, y) -> tuple[np.ndarray, np.ndarray, float] | None:
        """Barrier gradient s_i = sum_j tr(Fj^-1 Fj,i), Hessian, and logdet sum.

        Derivatives go through the Cholesky factor (whitened coefficient
        matrices U_k = L^-1 F_k L^-T), which stays usable on blocks far too
        ill-conditioned for an explicit inverse.
        """
        s = np.zeros(self.m)
        H = np.zeros((self.m, self.m))
        logdet = 0.0
        if len(self.s_f0):
            v = self._scalar_values(y)
            if np.min(v) <= 0.0:
                return None
            logdet += float(np.sum(np.log(v)))
            Cv = self.s_C / v[:, None]
            s += Cv.sum(axis=0)
            H += Cv.T @ Cv
        for b in self.big:
            M = b.value(y)
            L = _cholesky(M)
            if L is None:
                return None
            logdet += 2.0 * float(np.sum(np.log(np.diag(L))))
            if len(b.idx) == 0:
                continue
            P = np.linalg.solve(L[None, :, :], b.stack)
            U = np.linalg.solve(L[None, :, :], P.transpose(0, 2, 1))
            s[b.idx] += np.einsum("kaa->k", U)
            Hb = np.einsum("iab,jab->ij", U, U)
            ii = np.ix_(b.idx, b.idx)
            H[ii] += 0.5 * (Hb + Hb.T)
        return s, H, logdet


def _newton_center(bar: _Barrier, y: np.ndarray, c: np.ndarray, tau: float,
                   dec_tol: float, budget: int) -> tuple[np.ndarray, int, bool]:
    """Damped Newton for minimize -c.y/tau - sum log det F(y). Returns (y, steps, stalled)."""
    steps = 0
    while steps < budget:
        gh = bar.grad_hess(y)
        if gh is None:
            return y, steps, True
        s, H, logdet = gh
        g = -c / tau - s
        phi = -float(c @ y) / tau - logdet
        scale = max(float(np.trace(H)) / bar.m, 1.0)
        ridge = 0.0
        while True:
            try:
                L = np.linalg.cholesky(H + ridge * np.eye(bar.m))
                break
            except np.linalg.LinAlgError:
                ridge = max(ridge * 10.0, 1e-14 * scale)
                if ridge > 1e6 * scale:
                    return y, steps, True
        dy = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        dec = max(float(-g @ dy), 0.0)
        if dec <= dec_tol:
            return y, steps, False
        steps += 1
        alpha = 1.0
        accepted = False
        while alpha > 1e-13:
            y_try = y + alpha * dy
            ld = bar.logdet_sum(y_try)
            if ld is not None and -float(c @ y_try) / tau - ld <= phi - 0.25 * alpha * dec:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return y, steps, True
        y = y + alpha * dy
        if not np.all(np.isfinite(y)) or float(np.max(np.abs(y))) > 1e14:
            return y, steps, True  # runaway iterate, treat as a stall
        if dec <= 4.0 * dec_tol:
            return y, steps, False
    return y, steps, False


def _initial_point(problem: LmiProblem) -> np.ndarray:
    """Documented deterministic start: scalars at feasible unit offsets,
    symmetric and diagonal blocks at identity, rectangular blocks at zero."""
    vs = problem.vars
    y = np.zeros(vs.size)
    for name in vs.scalars:
        lo = problem.lower.get(name)
        hi = problem.upper.get(name)
        v = 1.0
        if lo is not None:
            v = lo + 1.0
        if hi is not None:
            v = min(v, hi - 1.0) if lo is None else 0.5 * (lo + min(hi, lo + 2.0))
        y[vs.scalar_index(name)] = v
    for name, _ in vs.sym_blocks:
        y[list(vs.trace_coords(name))] = 1.0
    for name, d in vs.diag_blocks:
        a, _ = vs.span(name)
        y[a:a + d] = 1.0
    return y


def _compile(problem: LmiProblem, margin: float) -> tuple[list[_Compiled], np.ndarray]:
    """Shifted constraint blocks plus box bounds, equilibrated for conditioning.

    Each block is congruence-scaled by a diagonal (which preserves the
    feasible set exactly), then every variable coordinate is rescaled so its
    largest coefficient entry has unit magnitude. Returns the blocks over the
    scaled coordinates y' = y / var_scale together with var_scale.
    """
    vs = problem.vars
    raw: list[tuple[np.ndarray, dict[int, np.ndarray]]] = [
        (con.F0 - margin * np.eye(con.block_dim), con.Fi) for con in problem.constraints
    ]
    for name, lo in problem.lower.items():
        i = vs.scalar_index(name)
        raw.append((np.array([[-float(lo)]]), {i: np.array([[1.0]])}))
    for name, hi in problem.upper.items():
        i = vs.scalar_index(name)
        raw.append((np.array([[float(hi)]]), {i: np.array([[-1.0]])}))

    scaled: list[tuple[np.ndarray, dict[int, np.ndarray]]] = []
    for F0, Fi in raw:
        rows = np.abs(F0).max(axis=1)
        for F in Fi.values():
            rows = np.maximum(rows, np.abs(F).max(axis=1))
        d = 1.0 / np.sqrt(np.where(rows > 0, rows, 1.0))
        D = d[:, None] * d[None, :]
        scaled.append((F0 * D, {i: F * D for i, F in Fi.items()}))

    var_scale = np.ones(vs.size)
    for _, Fi in scaled:
        for i, F in Fi.items():
            var_scale[i] = max(var_scale[i], float(np.abs(F).max()))
    var_scale = 1.0 / var_scale
    blocks = [
        _Compiled(F0, {i: F * var_scale[i] for i, F in Fi.items()})
        for F0, Fi in scaled
    ]
    return blocks, var_scale


def solve(problem: LmiProblem, opts: SolveOptions | None = None) -> SolveReport:
    """Solve the LMI problem; never raises on numerical trouble.

    Status ``Optimal`` guarantees every constraint block has minimum
    eigenvalue at least ``margin - feas_tol`` and the implied duality gap is
    at most ``gap_tol`` relative. Infeasibility (at the margin) is reported
    as a status together with a Farkas-style certificate in diagnostics.
    """
    opts = opts or SolveOptions()
    try:
        return _solve_inner(problem, opts)
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        return SolveReport(
            status=NUMERICAL_ERROR, y=np.zeros(problem.vars.size), objective=float("nan"),
            min_block_eigs=[], iterations=0, diagnostics={"error": str(exc)})


def _solve_inner(problem: LmiProblem, opts: SolveOptions) -> SolveReport:
    m = problem.vars.size
    blocks, var_scale = _compile(problem, opts.margin)
    c = problem.objective * var_scale  # objective over scaled coordinates
    bar = _Barrier(blocks, m)
    y = _initial_point(problem) / var_scale
    total = 0
    diag: dict = {}

    def finish(y_scaled, status_hint=None):
        y_out = y_scaled * var_scale
        eigs = [float(sym_eig(con.evaluate(y_out))[0][0]) for con in problem.constraints]
        obj = float(problem.objective @ y_out)
        feas_ok = all(e >= opts.margin - opts.feas_tol for e in eigs) and _box_ok(problem, y_out, opts.feas_tol)
        gap = diag.get("gap", float("inf"))
        if status_hint is None and feas_ok and gap <= opts.gap_tol * (1.0 + abs(obj)):
            status = OPTIMAL
        elif status_hint is not None:
            status = status_hint
        elif total >= opts.max_iter:
            status = MAX_ITERATIONS
        else:
            status = NUMERICAL_ERROR
        return SolveReport(status=status, y=y_out, objective=obj,
                           min_block_eigs=eigs, iterations=total, diagnostics=diag)

    # ---- phase one: find a strictly feasible point -----------------------
    if not bar.strictly_feasible(y):
        min_eig = bar.min_eig(y)
        t_cap = 1.0 + max(0.0, min_eig)
        t0 = min(min_eig, t_cap) - 0.5 * max(1.0, abs(min_eig))
        aug_blocks = []
        for b in blocks:
            Fi = {int(i): b.stack[k] for k, i in enumerate(b.idx)}
            Fi[m] = -np.eye(b.dim)
            aug_blocks.append(_Compiled(b.F0, Fi))
        aug_blocks.append(_Compiled(np.array([[t_cap]]), {m: -np.array([[1.0]])}))
        # wide walls around the start keep the analytic center from drifting
        # off along unbounded interior directions; inert otherwise
        wall = 1e6 * max(1.0, float(np.max(np.abs(y))) if m else 1.0)
        for i in range(m):
            aug_blocks.append(_Compiled(np.array([[wall - y[i]]]), {i: np.array([[1.0]])}))
            aug_blocks.append(_Compiled(np.array([[wall + y[i]]]), {i: np.array([[-1.0]])}))
        bar1 = _Barrier(aug_blocks, m + 1)
        z = np.append(y, t0)
        cz = np.zeros(m + 1)
        cz[m] = 1.0
        tau = max(1.0, abs(t0))
        stalled = False
        while total < opts.max_iter:
            budget = opts.max_iter - total
            z, steps, stalled = _newton_center(bar1, z, cz, tau, dec_tol=1e-8, budget=budget)
            total += steps
            gap1 = tau * bar1.nu
            if stalled or z[m] > 0.2 * t_cap:
                break
            if z[m] > 0.0 and z[m] >= 0.3 * (z[m] + gap1):
                break  # slack is a constant fraction of the best achievable
            if z[m] + gap1 < 0.0:  # even the optimistic bound is infeasible
                break
            if gap1 < max(1e-12, 1e-9 * abs(z[m])):
                break
            tau *= 0.15
        diag["phase1_slack"] = float(z[m])
        diag["phase1_gap"] = float(tau * bar1.nu)
        y = z[:m]
        if z[m] <= 0.0 or not bar.strictly_feasible(y):
            if not stalled and total < opts.max_iter:
                diag["farkas"] = _farkas_certificate(bar1, z, tau, m)
                return finish(y, status_hint=INFEASIBLE)
            return finish(y, status_hint=MAX_ITERATIONS if total >= opts.max_iter else NUMERICAL_ERROR)

    # ---- phase two: follow the central path ------------------------------
    if not np.any(c):
        y, steps, _ = _newton_center(bar, y, c, 1.0, dec_tol=1e-12, budget=max(1, opts.max_iter - total))
        total += steps
        diag["gap"] = 0.0
        return finish(y)

    gh = bar.grad_hess(y)
    if gh is None:
        return finish(y, status_hint=NUMERICAL_ERROR)
    s = gh[0]
    den = float(-c @ s)
    tau = (float(c @ c) / den) if den > 0 else (1.0 + abs(float(c @ y))) / bar.nu
    tau = min(max(tau, 1e-8), 1e8)
    while total < opts.max_iter:
        budget = opts.max_iter - total
        y, steps, stalled = _newton_center(bar, y, c, tau, dec_tol=1e-6, budget=budget)
        total += steps
        obj = float(c @ y)
        gap = tau * bar.nu
        diag["gap"] = gap
        diag["tau"] = tau
        if gap <= opts.gap_tol * (1.0 + abs(obj)):
            break
        if stalled:
            diag["stalled"] = True
            break
        tau *= 0.15
    # polish the final centering so the implied dual is accurate
    y, steps, _ = _newton_center(bar, y, c, tau, dec_tol=1e-13,
                                 budget=min(10, max(0, opts.max_iter - total)))
    total += steps
    gh = bar.grad_hess(y)
    if gh is not None:
        diag["dual_residual"] = float(np.max(np.abs(c + tau * gh[0])))
    return finish(y)


def _box_ok(problem: LmiProblem, y: np.ndarray, tol: float) -> bool:
    for name, lo in problem.lower.items():
        if y[problem.vars.scalar_index(name)] < lo - tol:
            return False
    for name, hi in problem.upper.items():
        if y[problem.vars.scalar_index(name)] > hi + tol:
            return False
    return True


def _farkas_certificate(bar1: _Barrier, z: np.ndarray, tau: float, m: int) -> dict:
    """Dual combination X_j >= 0 with sum_j <F_ji, X_j> ~ 0, trace 1 and
    sum_j <F_j0, X_j> < 0, witnessing infeasibility at the margin."""
    Xs = []
    for b in bar1.blocks:
        w, V = np.linalg.eigh(b.value(z))
        w = np.maximum(w, 1e-300)
        Xs.append(tau * (V / w) @ V.T)
    trace = sum(float(np.trace(X)) for X in Xs)
    Xs = [X / trace for X in Xs]
    resid = np.zeros(m)
    dual_obj = 0.0
    for b, X in zip(bar1.blocks, Xs):
        dual_obj += float(np.sum(b.F0 * X))
        for k, i in enumerate(b.idx):
            if i < m:
                resid[i] += float(np.sum(b.stack[k] * X))
    return {
        "dual_objective": dual_obj,
        "residual_norm": float(np.max(np.abs(resid))) if m else 0.0,
        "trace": 1.0,
    }


def check_feasible(problem: LmiProblem, y: np.ndarray, margin: float) -> tuple[bool, float]:
    """Solver-free feasibility check: smallest block eigenvalue vs margin."""
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.vars.size,):
        raise ShapeError(f"expected packed vector of length {problem.vars.size}, got {y.shape}")
    worst = float("inf")
    for con in problem.constraints:
        w, _ = sym_eig(con.evaluate(y))
        worst = min(worst, float(w[0]))
    return worst >= margin, worst


# ---------------------------------------------------------------------------
# problem dump format (JSON) for external-solver cross-checks
# ---------------------------------------------------------------------------

def dump_problem(problem: LmiProblem) -> str:
    vs = problem.vars
    doc = {
        "vars": {
            "scalars": list(vs.scalars),
            "sym": [[n, d] for n, d in vs.sym_blocks],
            "diag": [[n, d] for n, d in vs.diag_blocks],
            "rect": [[n, [r, c]] for n, (r, c) in vs.rect_blocks],
        },
        "objective": problem.objective.tolist(),
        "lower": dict(problem.lower),
        "upper": dict(problem.upper),
        "constraints": [
            {
                "name": con.name,
                "dim": con.block_dim,
                "F0": con.F0.tolist(),
                "Fi": {str(i): F.tolist() for i, F in sorted(con.Fi.items())},
            }
            for con in problem.constraints
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def load_problem(text: str) -> LmiProblem:
    doc = json.loads(text)
    v = doc["vars"]
    vs = VarSpace(
        scalars=v["scalars"],
        sym_blocks=[(n, d) for n, d in v["sym"]],
        diag_blocks=[(n, d) for n, d in v["diag"]],
        rect_blocks=[(n, (r, c)) for n, (r, c) in v["rect"]],
    )
    cons = [
        LmiConstraint(
            F0=np.array(entry["F0"]),
            Fi={int(i): np.array(F) for i, F in entry["Fi"].items()},
            name=entry.get("name", ""),
        )
        for entry in doc["constraints"]
    ]
    return LmiProblem(vars=vs, constraints=cons, objective=np.array(doc["objective"]),
                      lower=dict(doc["lower"]), upper=dict(doc["upper"]))
