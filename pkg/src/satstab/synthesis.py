"""Controller synthesis: fixed-mu LMI problems, the mu sweep, certification.

Both design routes maximize alpha1 * eps + alpha2 * tr(W) over the decision
variables (eps[, eta], W, S, Y, Z) for each fixed mu of a grid, then keep the
feasible solve with the best objective. The model route constrains the
closed-loop matrix directly; the data route replaces it with Gram matrices of
a recorded experiment so that the certificate holds for every plant that
could have produced the data under the declared noise-energy bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import AllInfeasible, NumericalError, ShapeError
from .linalg import TRANSPOSE, BlockSpec, assemble, is_pd, sym_part
from .saturated_sys import (
    Controller,
    Ellipsoid,
    NoiseModel,
    Plant,
    ball_points,
    closed_loop_spectral_radius,
    ellipsoid_boundary_points,
    ellipsoid_in_S,
    in_S_of_G,
    sample_S_of_G,
    sample_in_ellipsoid,
    sample_shell,
    sat,
    simulate,
    sphere_points,
)
from .sdp import (
    OPTIMAL,
    LmiConstraint,
    LmiProblem,
    SolveOptions,
    SolveReport,
    VarSpace,
    affine_constraint,
    solve,
)

if TYPE_CHECKING:  # only for annotations; DataCollection lives in harness
    from .harness import DataCollection

__all__ = [
    "DEFAULT_MU_GRID",
    "CertificationReport",
    "CheckResult",
    "MuTableRow",
    "SynthesisConfig",
    "SynthesisResult",
    "build_inclusion",
    "build_phi",
    "build_psi",
    "certify",
    "make_var_space",
    "synthesize",
]

DEFAULT_MU_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))

EPS_FLOOR = 1.0 + 1e-6   # strict eps > 1 realized as a closed bound
ETA_FLOOR = 1e-9         # strict eta > 0 realized as a closed bound


@dataclass
class SynthesisConfig:
    """Tuning of one synthesis run.

    ``mu_grid`` values must lie strictly inside (0, 1). With ``lam == 0`` the
    attractor level is unconstrained by the matrix inequality, so ``eps`` is
    capped at ``eps_cap`` to keep the objective bounded (the attractor then
    shrinks to a point). The data-route multiplier ``eta`` gets a generous
    box cap as well: with exactly noiseless data its optimal face is
    unbounded, and a compact box keeps the interior-point path well posed
    without affecting solutions that do not hit the cap. Solver options
    default to a higher iteration budget than the solver's own default
    because a grid sweep tolerates slow cells.
    """

    mu_grid: tuple[float, ...] = DEFAULT_MU_GRID
    alpha1: float = 1.0
    alpha2: float = 1e-3
    lam: float = 0.05
    eps_cap: float = 1e6
    eta_cap: float = 1e8
    u_bar: np.ndarray | None = None  # saturation levels; required on the data route
    solve_opts: SolveOptions = field(default_factory=lambda: SolveOptions(max_iter=400))

    def __post_init__(self):
        self.mu_grid = tuple(float(m) for m in self.mu_grid)
        if not self.mu_grid:
            raise ValueError("mu grid must be nonempty")
        if any(not 0.0 < m < 1.0 for m in self.mu_grid):
            raise ValueError("mu grid values must lie strictly inside (0, 1)")
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("objective weights must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


@dataclass
class MuTableRow:
    mu: float
    status: str
    objective: float
    epsilon: float
    trace_w: float


@dataclass
class SynthesisResult:
    """One certified design: decision variables, gains, and solver report."""

    W: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    epsilon: float
    eta: float | None
    mu: float
    K: np.ndarray
    G: np.ndarray
    objective: float
    report: SolveReport | None = None

    def controller(self) -> Controller:
        return Controller(K=self.K, G=self.G)

    def basin(self) -> Ellipsoid:
        return Ellipsoid(M=np.linalg.inv(self.W), alpha=1.0)

    def attractor(self) -> Ellipsoid:
        return Ellipsoid(M=np.linalg.inv(self.W), alpha=self.epsilon)

    def to_json_dict(self) -> dict:
        return {
            "mu": self.mu,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "objective": self.objective,
            "W": self.W.tolist(),
            "S": np.diag(self.S).tolist(),
            "Y": self.Y.tolist(),
            "Z": self.Z.tolist(),
            "K": self.K.tolist(),
            "G": self.G.tolist(),
            "status": self.report.status if self.report else OPTIMAL,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SynthesisResult":
        return cls(
            W=np.array(doc["W"], dtype=float),
            S=np.diag(np.asarray(doc["S"], dtype=float)),
            Y=np.array(doc["Y"], dtype=float),
            Z=np.array(doc["Z"], dtype=float),
            epsilon=float(doc["epsilon"]),
            eta=None if doc.get("eta") is None else float(doc["eta"]),
            mu=float(doc["mu"]),
            K=np.array(doc["K"], dtype=float),
            G=np.array(doc["G"], dtype=float),
            objective=float(doc["objective"]),
        )


def make_var_space(n_x: int, n_u: int, with_eta: bool) -> VarSpace:
    scalars = ("eps", "eta") if with_eta else ("eps",)
    return VarSpace(
        scalars=scalars,
        sym_blocks=[("W", n_x)],
        diag_blocks=[("S", n_u)],
        rect_blocks=[("Y", (n_u, n_x)), ("Z", (n_u, n_x))],
    )


def build_phi(plant: Plant, vs: VarSpace, mu: float, lam: float) -> LmiConstraint:
    """Model-route block constraint of size 2*n_x + n_u, linear in (W,S,Y,Z,eps)."""
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    A, B = plant.A, plant.B
    nx, nu = plant.n_x, plant.n_u

    def matrix(parts):
        W, S, Y, Z = parts["W"], parts["S"], parts["Y"], parts["Z"]
        eps = parts["eps"]
        return assemble(BlockSpec(
            row_sizes=[nx, nu, nx],
            col_sizes=[nx, nu, nx],
            blocks=[
                [(1.0 - mu) * W, Y.T + Z.T, W @ A.T + Y.T @ B.T],
                [TRANSPOSE, 2.0 * S, S @ B.T],
                [TRANSPOSE, TRANSPOSE, W - (lam * eps / mu) * np.eye(nx)],
            ],
        ))

    return affine_constraint(vs, matrix, name="phi")


def build_inclusion(vs: VarSpace, u_bar) -> list[LmiConstraint]:
    """Per input row i, the block [[W, Z_(i)^T], [Z_(i), u_bar_i^2]]."""
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    (n_u, n_x) = dict(vs.rect_blocks)["Z"]
    if u_bar.shape != (n_u,):
        raise ShapeError(f"u_bar must have length {n_u}, got {u_bar.shape}")
    out = []
    for i in range(n_u):
        def matrix(parts, i=i):
            W, Z = parts["W"], parts["Z"]
            zi = Z[i:i + 1, :]
            corner = np.array([[u_bar[i] ** 2]])
            return assemble(BlockSpec([n_x, 1], [n_x, 1], [[W, zi.T], [TRANSPOSE, corner]]))
        out.append(affine_constraint(vs, matrix, name=f"inclusion_{i}"))
    return out


def build_psi(data: "DataCollection", noise: NoiseModel, vs: VarSpace, mu: float) -> LmiConstraint:
    """Data-route block constraint of size 3*n_x + 2*n_u, linear in (W,S,Y,Z,eps,eta).

    The eta variable multiplies exactly the data Gram blocks, including the
    noise-energy term -eta * p * lam * delta_omega inside the third diagonal
    block.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    Xp, X, U = data.Xplus, data.X, data.U
    nx, nu = X.shape[0], U.shape[0]
    if Xp.shape != X.shape or U.shape[1] != X.shape[1]:
        raise ShapeError("data matrices must share the sample count")
    p = data.p
    lam = noise.lam
    bound = p * lam * noise.delta_omega
    gram_pp = Xp @ Xp.T
    gram_px = Xp @ X.T
    gram_pu = Xp @ U.T
    gram_xx = X @ X.T
    gram_xu = X @ U.T
    gram_uu = U @ U.T

    def matrix(parts):
        W, S, Y, Z = parts["W"], parts["S"], parts["Y"], parts["Z"]
        eps, eta = parts["eps"], parts["eta"]
        psi3 = W - (lam * eps / mu) * np.eye(nx) + eta * (gram_pp - bound)
        return assemble(BlockSpec(
            row_sizes=[nx, nu, nx, nx, nu],
            col_sizes=[nx, nu, nx, nx, nu],
            blocks=[
                [(1.0 - mu) * W, Y.T + Z.T, None, W, Y.T],
                [TRANSPOSE, 2.0 * S, None, None, S],
                [None, None, psi3, -eta * gram_px, -eta * gram_pu],
                [TRANSPOSE, None, TRANSPOSE, eta * gram_xx, eta * gram_xu],
                [TRANSPOSE, TRANSPOSE, TRANSPOSE, TRANSPOSE, eta * gram_uu],
            ],
        ))

    return affine_constraint(vs, matrix, name="psi")


def _positivity_block(vs: VarSpace) -> LmiConstraint:
    # S >= margin * I through the same machinery as every other block
    n_u = dict(vs.diag_blocks)["S"]
    Fi = {coord: _unit(n_u, k) for k, coord in enumerate(vs.trace_coords("S"))}
    return LmiConstraint(F0=np.zeros((n_u, n_u)), Fi=Fi, name="S_pos")


def _unit(n, k):
    E = np.zeros((n, n))
    E[k, k] = 1.0
    return E


def _objective(vs: VarSpace, alpha1: float, alpha2: float) -> np.ndarray:
    c = np.zeros(vs.size)
    c[vs.scalar_index("eps")] = alpha1
    for coord in vs.trace_coords("W"):
        c[coord] = alpha2
    return c


def build_model_problem(plant: Plant, mu: float, cfg: SynthesisConfig) -> LmiProblem:
    vs = make_var_space(plant.n_x, plant.n_u, with_eta=False)
    constraints = [build_phi(plant, vs, mu, cfg.lam)]
    constraints += build_inclusion(vs, plant.u_bar)
    constraints.append(_positivity_block(vs))
    upper = {"eps": cfg.eps_cap} if cfg.lam == 0.0 else {}
    return LmiProblem(vars=vs, constraints=constraints,
                      objective=_objective(vs, cfg.alpha1, cfg.alpha2),
                      lower={"eps": EPS_FLOOR}, upper=upper)


def build_data_problem(data: "DataCollection", noise: NoiseModel, mu: float,
                       cfg: SynthesisConfig) -> LmiProblem:
    nx, nu = data.X.shape[0], data.U.shape[0]
    vs = make_var_space(nx, nu, with_eta=True)
    u_bar = _require_u_bar(cfg)
    constraints = [build_psi(data, noise, vs, mu)]
    constraints += build_inclusion(vs, u_bar)
    constraints.append(_positivity_block(vs))
    upper = {"eta": cfg.eta_cap}
    if noise.lam == 0.0:
        upper["eps"] = cfg.eps_cap
    return LmiProblem(vars=vs, constraints=constraints,
                      objective=_objective(vs, cfg.alpha1, cfg.alpha2),
                      lower={"eps": EPS_FLOOR, "eta": ETA_FLOOR}, upper=upper)


def _require_u_bar(cfg: SynthesisConfig) -> np.ndarray:
    if cfg.u_bar is None:
        raise ValueError("data-route synthesis needs cfg.u_bar (saturation levels)")
    return np.atleast_1d(np.asarray(cfg.u_bar, dtype=float))


def synthesize(target, cfg: SynthesisConfig) -> tuple[SynthesisResult, list[MuTableRow]]:
    """Sweep the mu grid, return the best feasible design and the full table.

    ``target`` is either a :class:`Plant` (model route) or a tuple
    ``(DataCollection, NoiseModel)`` (data route). Raises
    :class:`AllInfeasible` when no grid point admits a solution. Ties on the
    objective are broken toward smaller mu, which favors the larger basin.
    """
    if isinstance(target, Plant):
        plant = target
        builders = {mu: (lambda mu=mu: build_model_problem(plant, mu, cfg)) for mu in cfg.mu_grid}
        data_route = False
    else:
        data, noise = target
        if noise.lam != cfg.lam:
            raise ValueError(f"noise model lam={noise.lam} disagrees with cfg.lam={cfg.lam}")
        gram = np.vstack([data.X, data.U])
        gram = gram @ gram.T
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= 1e-10 * max(eigs[-1], 1e-300):
            raise AllInfeasible("data collection is not informative (stacked Gram is singular)")
        builders = {mu: (lambda mu=mu: build_data_problem(data, noise, mu, cfg)) for mu in cfg.mu_grid}
        data_route = True

    table: list[MuTableRow] = []
    best: tuple[float, float, SynthesisResult] | None = None
    for mu in cfg.mu_grid:
        problem = builders[mu]()
        report = solve(problem, cfg.solve_opts)
        if report.status == OPTIMAL:
            parts = problem.vars.unpack(report.y)
            result = _extract(parts, mu, report, data_route)
            row = MuTableRow(mu=mu, status=report.status, objective=report.objective,
                             epsilon=result.epsilon, trace_w=float(np.trace(result.W)))
            key = (report.objective, -mu)
            if best is None or key > best[:2]:
                best = (*key, result)
        else:
            row = MuTableRow(mu=mu, status=report.status, objective=float("nan"),
                             epsilon=float("nan"), trace_w=float("nan"))
        table.append(row)
    if best is None:
        raise AllInfeasible(f"no feasible solve on the mu grid {cfg.mu_grid}")
    return best[2], table


def _extract(parts: dict, mu: float, report: SolveReport, data_route: bool) -> SynthesisResult:
    W = sym_part(parts["W"])
    if not is_pd(W):
        raise NumericalError("solved W is not positive definite")
    Y, Z, S = parts["Y"], parts["Z"], parts["S"]
    K = np.linalg.solve(W, Y.T).T
    G = np.linalg.solve(W, Z.T).T
    return SynthesisResult(
        W=W, S=S, Y=Y, Z=Z,
        epsilon=float(parts["eps"]),
        eta=float(parts["eta"]) if data_route else None,
        mu=mu, K=K, G=G,
        objective=report.objective, report=report,
    )


# ---------------------------------------------------------------------------
# certification battery
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    passed: bool
    worst: float
    witness: np.ndarray | None = None
    note: str = ""


@dataclass
class CertificationReport:
    checks: dict[str, CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def summary(self) -> dict:
        return {name: {"passed": c.passed, "worst": c.worst, "note": c.note}
                for name, c in self.checks.items()}


def _batch_step(plant: Plant, K: np.ndarray, X: np.ndarray, Wn: np.ndarray) -> np.ndarray:
    return X @ plant.A.T + sat(X @ K.T, plant.u_bar) @ plant.B.T + Wn


def _noise_mix(rng: np.random.Generator, n: int, count: int, lam: float) -> np.ndarray:
    """Half worst-case sphere samples of radius sqrt(lam), half interior ball."""
    if lam == 0.0:
        return np.zeros((count, n))
    h = count // 2
    return np.vstack([
        sphere_points(rng, n, h, np.sqrt(lam)),
        ball_points(rng, n, count - h, np.sqrt(lam)),
    ])


def certify(result: SynthesisResult, plant: Plant, noise: NoiseModel,
            samples: int = 10_000, seed: int = 0, level_tol: float = 1e-9) -> CertificationReport:
    """Run the sector / inclusion / invariance / decrease battery.

    With ``lam == 0`` the invariance check degenerates to an asymptotic
    convergence check (spectral radius below one and a monotone Lyapunov
    value along noiseless simulations).
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    checks: dict[str, CheckResult] = {}
    W, K, G, eps = result.W, result.K, result.G, result.epsilon
    P = np.linalg.inv(W)
    P = sym_part(P)
    basin = Ellipsoid(M=P, alpha=1.0)
    attractor = Ellipsoid(M=P, alpha=eps)
    lam = noise.lam

    # sector: the dead-zone form is nonpositive on the validity region
    t_diag = 1.0 / np.diag(result.S)
    Xs = sample_S_of_G(G, plant.u_bar, samples, rng)
    Us = Xs @ K.T
    phi = sat(Us, plant.u_bar) - Us
    su = sat(Us, plant.u_bar)
    gx = Xs @ G.T
    lhs = np.einsum("ku,ku->k", phi * t_diag, su + gx)
    scale = 1.0 + np.linalg.norm(phi, axis=1) * np.max(t_diag) * (
        np.linalg.norm(su, axis=1) + np.linalg.norm(gx, axis=1))
    viol = lhs - 1e-12 * scale
    k = int(np.argmax(viol))
    checks["sector"] = CheckResult(passed=bool(np.all(viol <= 0)), worst=float(lhs[k]),
                                   witness=Xs[k])

    # inclusion: basin inside the sector validity region
    lmi_ok = ellipsoid_in_S(W, result.Z, plant.u_bar)
    bpts = ellipsoid_boundary_points(basin, samples, rng)
    margins = np.abs(bpts @ G.T) - plant.u_bar
    k = int(np.argmax(np.max(margins, axis=1)))
    mc_ok = bool(np.all(margins <= 1e-9))
    checks["inclusion"] = CheckResult(passed=lmi_ok and mc_ok,
                                      worst=float(np.max(margins)), witness=bpts[k])

    # decrease: V along the noisy step is non-increasing outside the attractor
    Xd = sample_shell(basin, samples, rng, inner=1.0 / eps)
    Wn = _noise_mix(rng, plant.n_x, samples, lam)
    Xd_next = _batch_step(plant, K, Xd, Wn)
    v0 = np.einsum("ki,ij,kj->k", Xd, P, Xd)
    v1 = np.einsum("ki,ij,kj->k", Xd_next, P, Xd_next)
    gap = v1 - v0
    k = int(np.argmax(gap))
    checks["decrease"] = CheckResult(passed=bool(np.all(gap <= level_tol)),
                                     worst=float(gap[k]), witness=Xd[k])

    # invariance of the attractor level set
    if lam > 0:
        half = samples // 2
        Xi = np.vstack([
            sample_in_ellipsoid(attractor, half, rng),
            ellipsoid_boundary_points(attractor, samples - half, rng),
        ])
        Wn = _noise_mix(rng, plant.n_x, samples, lam)
        Xi_next = _batch_step(plant, K, Xi, Wn)
        vi = np.einsum("ki,ij,kj->k", Xi_next, P, Xi_next)
        excess = vi - (1.0 / eps + level_tol)
        k = int(np.argmax(excess))
        checks["invariance"] = CheckResult(passed=bool(np.all(excess <= 0)),
                                           worst=float(vi[k] - 1.0 / eps), witness=Xi[k])
    else:
        rho = closed_loop_spectral_radius(plant, K)
        worst_rise = -np.inf
        witness = None
        for x0 in ellipsoid_boundary_points(basin, 8, rng):
            traj = simulate(plant, K, x0, None, 1000)
            v = np.einsum("ki,ij,kj->k", traj, P, traj)
            rise = float(np.max(np.diff(v) - (1e-12 * v[:-1] + 1e-15)))
            if rise > worst_rise:
                worst_rise, witness = rise, x0
        checks["invariance"] = CheckResult(
            passed=rho < 1.0 and worst_rise <= 0, worst=max(rho - 1.0, worst_rise),
            witness=witness, note=f"noiseless route: spectral radius {rho:.6f}")

    return CertificationReport(checks=checks)
