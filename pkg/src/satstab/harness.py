"""Data generation, experiment sweeps, and report emission.

Randomness policy: every stream is a numpy PCG64 generator seeded through
``SeedSequence(entropy=seed, spawn_key=(stream, *cell))``. Stream ids are
fixed constants below, so a single experiment seed splits reproducibly into
independent per-cell streams and outputs are byte-identical across runs.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AllInfeasible, ShapeError
from .linalg import as_matrix, read_matrices, write_matrices
from .saturated_sys import (
    Ellipsoid,
    NoiseModel,
    Plant,
    ball_points,
    ellipsoid_boundary_points,
    first_settle_index,
    sphere_points,
)
from .synthesis import (
    DEFAULT_MU_GRID,
    CertificationReport,
    SynthesisConfig,
    SynthesisResult,
    certify,
    synthesize,
)

__all__ = [
    "CellResult",
    "DataCollection",
    "ExperimentPlan",
    "ExperimentReport",
    "emit_figures",
    "generate_data",
    "informativity",
    "read_data",
    "read_plant",
    "run_experiment",
    "split_rng",
    "write_data",
    "write_plant",
]

STREAM_DATA = 1        # experiment data collections
STREAM_TRAJECTORY = 2  # per-cell simulation noise
STREAM_CERT = 3        # certification battery samples


def split_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for one named stream of a root seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


@dataclass
class DataCollection:
    """Recorded experiment: successor states, states, and applied inputs."""

    Xplus: np.ndarray
    X: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        self.Xplus = as_matrix(self.Xplus)
        self.X = as_matrix(self.X, *self.Xplus.shape)
        self.U = as_matrix(self.U, cols=self.Xplus.shape[1])
        if self.p < 1:
            raise ShapeError("a data collection needs at least one sample")

    @property
    def p(self) -> int:
        return self.X.shape[1]


def generate_data(plant: Plant, noise: NoiseModel, p: int, seed: int,
                  u_range=None) -> tuple[DataCollection, np.ndarray]:
    """Random data collection plus the noise matrix it was generated with.

    State samples are uniform on [-1, 1] per component; raw inputs are
    uniform on [-u_range, u_range] (defaulting to the saturation levels) and
    recorded after saturation. Each noise column has squared norm at most
    lam * min_eig(delta_omega), which keeps the stacked sample matrix inside
    the declared energy bound. The noise matrix is returned for oracle tests
    only and must never reach synthesis.
    """
    if p < 1:
        raise ValueError("p must be positive")
    rng = split_rng(seed, STREAM_DATA)
    u_range = plant.u_bar if u_range is None else np.atleast_1d(np.asarray(u_range, dtype=float))
    if u_range.shape != (plant.n_u,):
        raise ShapeError(f"u_range must have length {plant.n_u}")
    X = rng.uniform(-1.0, 1.0, size=(plant.n_x, p))
    raw = rng.uniform(-u_range, u_range, size=(p, plant.n_u)).T
    U = np.clip(raw, -plant.u_bar[:, None], plant.u_bar[:, None])
    if noise.lam > 0:
        radius = float(np.sqrt(noise.lam * np.linalg.eigvalsh(noise.delta_omega)[0]))
        omega = ball_points(rng, plant.n_x, p, radius).T
    else:
        omega = np.zeros((plant.n_x, p))
    Xplus = plant.A @ X + plant.B @ U + omega
    return DataCollection(Xplus=Xplus, X=X, U=U), omega


def informativity(data: DataCollection) -> tuple[bool, float]:
    """Nonsingularity of the stacked Gram [X; U][X; U]^T, with the smallest
    singular value of the stacked data matrix."""
    stacked = np.vstack([data.X, data.U])
    eigs = np.linalg.eigvalsh(stacked @ stacked.T)
    informative = bool(eigs[0] > 1e-10 * max(eigs[-1], 1e-300))
    return informative, float(np.sqrt(max(eigs[0], 0.0)))


@dataclass
class ExperimentPlan:
    """One sweep: noise levels x mu values, optionally x data sizes."""

    lambdas: tuple[float, ...]
    mus: tuple[float, ...] = ()
    p_values: tuple[int, ...] = ()
    seed: int = 1
    trajectories: int = 40
    steps: int = 200
    alpha1: float = 1.0
    alpha2: float = 1e-3
    include_model: bool = True
    full_mu_grid: bool = False
    delta_omega_scale: float = 0.05
    cert_samples: int = 2000

    def __post_init__(self):
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.mus = tuple(float(v) for v in (DEFAULT_MU_GRID if self.full_mu_grid else self.mus))
        self.p_values = tuple(int(v) for v in self.p_values)
        if not self.lambdas or not self.mus:
            raise ValueError("lambdas and mus must be nonempty")
        if not self.include_model and not self.p_values:
            raise ValueError("nothing to run: no model route and no data sizes")


@dataclass
class CellResult:
    kind: str
    lam: float
    mu: float
    p: int | None
    result: SynthesisResult | None
    failure: str = ""
    certification: CertificationReport | None = None
    trajectories: list[np.ndarray] = field(default_factory=list)
    settle_steps: list[int | None] = field(default_factory=list)
    basin_points: np.ndarray | None = None
    attractor_points: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.result is not None

    @property
    def name(self) -> str:
        tag = f"{self.kind}_lam{self.lam:g}_mu{self.mu:g}"
        return tag if self.p is None else f"{tag}_p{self.p}"

    def areas(self) -> tuple[float, float] | None:
        if self.result is None or self.result.W.shape[0] != 2:
            return None
        return self.result.basin().area(), self.result.attractor().area()


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    plant: Plant
    cells: list[CellResult]

    def summary_dict(self) -> dict:
        cells = []
        for cell in self.cells:
            entry: dict = {
                "cell": cell.name, "kind": cell.kind, "lambda": cell.lam,
                "mu": cell.mu, "p": cell.p, "feasible": cell.feasible,
            }
            if cell.result is not None:
                entry["objective"] = cell.result.objective
                entry["epsilon"] = cell.result.epsilon
                entry["eta"] = cell.result.eta
                entry["trace_w"] = float(np.trace(cell.result.W))
                areas = cell.areas()
                if areas is not None:
                    entry["basin_area"], entry["attractor_area"] = areas
                entry["converged"] = [s is not None for s in cell.settle_steps]
                if cell.certification is not None:
                    entry["certification"] = cell.certification.summary()
            else:
                entry["failure"] = cell.failure
            cells.append(entry)
        return {
            "seed": self.plan.seed,
            "trajectories": self.plan.trajectories,
            "steps": self.plan.steps,
            "cells": cells,
        }


def _run_cell(plant: Plant, plan: ExperimentPlan, kind: str, lam: float, mu: float,
              p: int | None, target, cell_key: tuple[int, ...]) -> CellResult:
    cfg = SynthesisConfig(mu_grid=(mu,), alpha1=plan.alpha1, alpha2=plan.alpha2,
                          lam=lam, u_bar=plant.u_bar)
    try:
        result, _ = synthesize(target, cfg)
    except AllInfeasible as exc:
        return CellResult(kind=kind, lam=lam, mu=mu, p=p, result=None, failure=str(exc))
    cell = CellResult(kind=kind, lam=lam, mu=mu, p=p, result=result)

    noise = NoiseModel(lam=lam, delta_omega=plan.delta_omega_scale * np.eye(plant.n_x))
    cert_seed = int(np.random.SeedSequence(entropy=plan.seed, spawn_key=(STREAM_CERT, *cell_key))
                    .generate_state(1)[0])
    cell.certification = certify(result, plant, noise, samples=plan.cert_samples, seed=cert_seed)

    basin = result.basin()
    attractor = result.attractor()
    rng = split_rng(plan.seed, STREAM_TRAJECTORY, *cell_key)
    starts = ellipsoid_boundary_points(basin, plan.trajectories, rng)
    P = basin.M
    level = 1.0 / result.epsilon
    for x0 in starts:
        if lam > 0:
            w_seq = sphere_points(rng, plant.n_x, plan.steps, np.sqrt(lam))
        else:
            w_seq = np.zeros((plan.steps, plant.n_x))
        traj = _simulate_fast(plant, result.K, x0, w_seq)
        cell.trajectories.append(traj)
        v = np.einsum("ki,ij,kj->k", traj, P, traj)
        cell.settle_steps.append(first_settle_index(v, level, tol=1e-12))
    count = max(plan.trajectories * 4, 128)
    cell.basin_points = ellipsoid_boundary_points(basin, count, rng)
    cell.attractor_points = ellipsoid_boundary_points(attractor, count, rng)
    return cell


def _simulate_fast(plant: Plant, K, x0, w_seq) -> np.ndarray:
    A, B, ub = plant.A, plant.B, plant.u_bar
    traj = np.empty((len(w_seq) + 1, plant.n_x))
    traj[0] = x0
    x = np.asarray(x0, dtype=float)
    for k, w in enumerate(w_seq):
        x = A @ x + B @ np.clip(K @ x, -ub, ub) + w
        traj[k + 1] = x
    return traj


def run_experiment(plan: ExperimentPlan, plant: Plant, workers: int = 1) -> ExperimentReport:
    """Synthesize, certify, and simulate every cell of the plan.

    Model cells enumerate (lambda, mu); data cells (p, lambda, mu), where the
    data collection for a (lambda, p) pair is generated once and shared by
    all mu cells. Infeasible cells are recorded, never fatal. Cells are
    independent jobs; outputs are merged in plan order, so worker count does
    not affect the report.
    """
    jobs = []
    if plan.include_model:
        for i, lam in enumerate(plan.lambdas):
            for j, mu in enumerate(plan.mus):
                jobs.append(("model", lam, mu, None, plant, (0, i, j)))
    noise_by_lam = {
        lam: NoiseModel(lam=lam, delta_omega=plan.delta_omega_scale * np.eye(plant.n_x))
        for lam in plan.lambdas
    }
    for k, p in enumerate(plan.p_values):
        for i, lam in enumerate(plan.lambdas):
            data_seed = int(np.random.SeedSequence(entropy=plan.seed,
                                                   spawn_key=(STREAM_DATA, i, k)).generate_state(1)[0])
            data, _ = generate_data(plant, noise_by_lam[lam], p, data_seed)
            for j, mu in enumerate(plan.mus):
                jobs.append(("data", lam, mu, p, (data, noise_by_lam[lam]), (1, i, j, k)))

    def run(job):
        kind, lam, mu, p, target, key = job
        return _run_cell(plant, plan, kind, lam, mu, p, target, key)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run, jobs))
    else:
        cells = [run(job) for job in jobs]
    return ExperimentReport(plan=plan, plant=plant, cells=cells)


# ---------------------------------------------------------------------------
# emission: CSV (delimited), SVG (polyline), PNG (matplotlib), JSON summary
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: np.ndarray, P: np.ndarray) -> str:
    n = traj.shape[1]
    header = "k," + ",".join(f"x{i + 1}" for i in range(n)) + ",V"
    v = np.einsum("ki,ij,kj->k", traj, P, traj)
    lines = [header]
    for k, row in enumerate(traj):
        lines.append(f"{k}," + ",".join(_fmt(x) for x in row) + f",{_fmt(v[k])}")
    return "\n".join(lines) + "\n"


def write_ellipse_csv(points: np.ndarray) -> str:
    if points.shape[1] != 2:
        raise ShapeError("ellipse CSV is a 2-D format")
    theta = np.arctan2(points[:, 1], points[:, 0])
    lines = ["theta,x1,x2"]
    for t, (x1, x2) in zip(theta, points):
        lines.append(f"{_fmt(t)},{_fmt(x1)},{_fmt(x2)}")
    return "\n".join(lines) + "\n"


def read_csv_columns(text: str) -> dict[str, np.ndarray]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    names = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(names)}


def _svg_polyline(points: np.ndarray, style: str) -> str:
    pts = " ".join(f"{x:.6f},{-y:.6f}" for x, y in points)
    return f'  <polyline fill="none" {style} points="{pts}" />'


def write_cell_svg(cell: CellResult) -> str:
    """One polyline per ellipse boundary and per trajectory, nothing else."""
    polys = []
    closed_b = np.vstack([cell.basin_points, cell.basin_points[:1]])
    closed_a = np.vstack([cell.attractor_points, cell.attractor_points[:1]])
    polys.append(_svg_polyline(closed_b, 'stroke="blue" stroke-dasharray="4 3" stroke-width="0.05"'))
    polys.append(_svg_polyline(closed_a, 'stroke="black" stroke-width="0.05"'))
    for traj in cell.trajectories:
        polys.append(_svg_polyline(traj[:, :2], 'stroke="gray" stroke-width="0.02"'))
    allpts = np.vstack([cell.basin_points] + [t[:, :2] for t in cell.trajectories])
    lo = allpts.min(axis=0) - 0.5
    hi = allpts.max(axis=0) + 0.5
    w, h = hi - lo
    view = f"{lo[0]:.3f} {-hi[1]:.3f} {w:.3f} {h:.3f}"
    body = "\n".join(polys)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view}" '
            f'width="480" height="480">\n{body}\n</svg>\n')


def _cell_axes(ax, cell: CellResult) -> None:
    for traj in cell.trajectories:
        ax.plot(traj[:, 0], traj[:, 1], color="0.6", lw=0.5, zorder=1)
    bp = np.vstack([cell.basin_points, cell.basin_points[:1]])
    ap = np.vstack([cell.attractor_points, cell.attractor_points[:1]])
    ax.plot(bp[:, 0], bp[:, 1], "b--", lw=1.4, zorder=3)
    ax.plot(ap[:, 0], ap[:, 1], "k-", lw=1.4, zorder=3)
    ax.set_aspect("equal")
    title = f"$\\lambda$={cell.lam:g}, $\\mu$={cell.mu:g}"
    if cell.p is not None:
        title += f", p={cell.p}"
    ax.set_title(title, fontsize=9)


def write_cell_png(cell: CellResult, path: Path) -> None:
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(4.5, 4.5))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    _cell_axes(ax, cell)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.tight_layout()
    fig.savefig(path, dpi=130)


def _write_grid_png(cells: list[CellResult], lambdas, mus, path: Path) -> None:
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(3.2 * len(lambdas), 3.2 * len(mus)))
    FigureCanvasAgg(fig)
    by_key = {(c.lam, c.mu): c for c in cells}
    for r, mu in enumerate(mus):
        for col, lam in enumerate(lambdas):
            ax = fig.add_subplot(len(mus), len(lambdas), r * len(lambdas) + col + 1)
            cell = by_key.get((lam, mu))
            if cell is not None and cell.feasible:
                _cell_axes(ax, cell)
            else:
                ax.set_title(f"$\\lambda$={lam:g}, $\\mu$={mu:g}: infeasible", fontsize=9)
                ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=130)


def _cells_table(report: ExperimentReport) -> str:
    lines = ["cell,kind,lambda,mu,p,feasible,objective,epsilon,eta,trace_w,"
             "basin_area,attractor_area,all_converged,cert_passed"]
    for cell in report.cells:
        if cell.result is not None:
            areas = cell.areas() or (float("nan"), float("nan"))
            conv = all(s is not None for s in cell.settle_steps)
            cert = cell.certification.passed if cell.certification else ""
            vals = [cell.name, cell.kind, _fmt(cell.lam), _fmt(cell.mu),
                    "" if cell.p is None else str(cell.p), "1",
                    _fmt(cell.result.objective), _fmt(cell.result.epsilon),
                    "" if cell.result.eta is None else _fmt(cell.result.eta),
                    _fmt(float(np.trace(cell.result.W))),
                    _fmt(areas[0]), _fmt(areas[1]), str(int(conv)), str(int(bool(cert)))]
        else:
            vals = [cell.name, cell.kind, _fmt(cell.lam), _fmt(cell.mu),
                    "" if cell.p is None else str(cell.p), "0",
                    "", "", "", "", "", "", "", ""]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def emit_figures(report: ExperimentReport, out_dir, formats=("csv", "svg", "png", "json")) -> list[Path]:
    """Write per-cell artifacts and the sweep summary; returns written paths.

    ``csv`` emits the delimited ellipse boundaries, trajectories, and the
    cells table; ``svg`` a direct polyline rendering of the same data;
    ``png`` matplotlib renderings (per cell plus one grid per route);
    ``json`` the summary document. An empty report writes nothing.
    """
    if not report.cells:
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(path: Path, text: str):
        path.write_text(text)
        written.append(path)

    for cell in report.cells:
        if not cell.feasible:
            continue
        cdir = out / "cells" / cell.name
        two_d = cell.basin_points is not None and cell.basin_points.shape[1] == 2
        P = cell.result.basin().M
        if "csv" in formats:
            cdir.mkdir(parents=True, exist_ok=True)
            if two_d:
                emit(cdir / "basin.csv", write_ellipse_csv(cell.basin_points))
                emit(cdir / "attractor.csv", write_ellipse_csv(cell.attractor_points))
            for k, traj in enumerate(cell.trajectories):
                emit(cdir / f"traj_{k:02d}.csv", write_trajectory_csv(traj, P))
        if two_d and "svg" in formats:
            cdir.mkdir(parents=True, exist_ok=True)
            emit(cdir / "figure.svg", write_cell_svg(cell))
        if two_d and "png" in formats:
            cdir.mkdir(parents=True, exist_ok=True)
            write_cell_png(cell, cdir / "figure.png")
            written.append(cdir / "figure.png")

    if "csv" in formats:
        emit(out / "cells.csv", _cells_table(report))
    if "json" in formats:
        emit(out / "summary.json", json.dumps(report.summary_dict(), sort_keys=True, indent=1))
    if "png" in formats and report.plant.n_x == 2:
        for kind in ("model", "data"):
            group = [c for c in report.cells if c.kind == kind]
            if kind == "data":
                for p in report.plan.p_values:
                    sub = [c for c in group if c.p == p]
                    if sub:
                        path = out / f"grid_data_p{p}.png"
                        _write_grid_png(sub, report.plan.lambdas, report.plan.mus, path)
                        written.append(path)
            elif group:
                path = out / "grid_model.png"
                _write_grid_png(group, report.plan.lambdas, report.plan.mus, path)
                written.append(path)
    return written


# ---------------------------------------------------------------------------
# plant and data files (matrix text format)
# ---------------------------------------------------------------------------

def write_plant(plant: Plant) -> str:
    return write_matrices([plant.A, plant.B, plant.u_bar.reshape(1, -1)])


def read_plant(text: str) -> Plant:
    A, B, ub = read_matrices(text, count=3)
    return Plant(A=A, B=B, u_bar=ub.ravel())


def write_data(data: DataCollection) -> str:
    return write_matrices([data.Xplus, data.X, data.U])


def read_data(text: str) -> DataCollection:
    Xplus, X, U = read_matrices(text, count=3)
    return DataCollection(Xplus=Xplus, X=X, U=U)
