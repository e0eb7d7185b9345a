"""Command-line interface.

Subcommands: synth-model, synth-data, gen-data, simulate, sweep, lemma-check.
Every flag can also be given in a key=value config file (--config FILE);
explicit flags win. Exit codes: 0 success, 2 infeasible everywhere,
3 invalid input, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, qmi_relaxation as qmi
from .errors import AllInfeasible, SatStabError
from .linalg import write_matrix
from .saturated_sys import NoiseModel, ellipsoid_boundary_points, simulate, sphere_points
from .sdp import OPTIMAL
from .synthesis import DEFAULT_MU_GRID, SynthesisConfig, SynthesisResult, synthesize

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_NUMERICAL = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _read_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"bad config line (want key=value): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _resolve(args, config: dict[str, str], key: str, default=None):
    """Flag value if given, else config value, else default."""
    attr = "lam" if key == "lambda" else key.replace("-", "_")
    value = getattr(args, attr, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _floats(text, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise CliError(f"bad {what}: {text!r}") from None


def _ints(text, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise CliError(f"bad {what}: {text!r}") from None


def _mu_grid(spec: str) -> tuple[float, ...]:
    if spec == "full":
        return DEFAULT_MU_GRID
    try:
        a, b, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise CliError(f"bad mu grid (want a:b:step or 'full'): {spec!r}") from None
    if step <= 0 or b < a:
        raise CliError(f"bad mu grid bounds: {spec!r}")
    n = int(round((b - a) / step))
    return tuple(round(a + k * step, 10) for k in range(n + 1))


def _load_plant(args, config):
    path = _resolve(args, config, "plant")
    if path is None:
        raise CliError("--plant FILE is required")
    try:
        return harness.read_plant(Path(path).read_text())
    except (OSError, SatStabError, ValueError) as exc:
        raise CliError(f"cannot load plant: {exc}")


def _load_data(args, config):
    path = _resolve(args, config, "data")
    if path is None:
        raise CliError("--data FILE is required")
    try:
        return harness.read_data(Path(path).read_text())
    except (OSError, SatStabError, ValueError) as exc:
        raise CliError(f"cannot load data: {exc}")


def _out_dir(args, config) -> Path:
    out = Path(_resolve(args, config, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(args, config, default="json,csv") -> tuple[str, ...]:
    fmts = tuple(str(_resolve(args, config, "format", default)).split(","))
    known = {"csv", "svg", "json", "png"}
    bad = set(fmts) - known
    if bad:
        raise CliError(f"unknown formats: {sorted(bad)} (choose from {sorted(known)})")
    return fmts


def _mu_config(args, config, lam: float, u_bar=None) -> SynthesisConfig:
    mu = _resolve(args, config, "mu")
    grid_spec = _resolve(args, config, "mu-grid")
    if mu is not None and grid_spec is not None:
        raise CliError("give either --mu or --mu-grid, not both")
    if mu is not None:
        grid = _floats(mu, "--mu")
    elif grid_spec is not None:
        grid = _mu_grid(str(grid_spec))
    else:
        grid = DEFAULT_MU_GRID
    try:
        return SynthesisConfig(
            mu_grid=grid,
            alpha1=float(_resolve(args, config, "alpha1", 1.0)),
            alpha2=float(_resolve(args, config, "alpha2", 1e-3)),
            lam=lam,
            u_bar=u_bar,
        )
    except ValueError as exc:
        raise CliError(str(exc))


def _write_synthesis_outputs(result: SynthesisResult, table, out: Path, fmts) -> None:
    if "json" in fmts:
        (out / "result.json").write_text(json.dumps(result.to_json_dict(), sort_keys=True, indent=1))
    if "csv" in fmts:
        lines = ["mu,status,objective,epsilon,trace_w"]
        for row in table:
            lines.append(f"{row.mu!r},{row.status},{row.objective!r},{row.epsilon!r},{row.trace_w!r}")
        (out / "mu_table.csv").write_text("\n".join(lines) + "\n")
    print(f"best mu={result.mu:g} objective={result.objective:.6f} "
          f"epsilon={result.epsilon:.6f} trace_w={np.trace(result.W):.6f}")


def _cmd_synth_model(args, config) -> int:
    plant = _load_plant(args, config)
    lam = float(_resolve(args, config, "lambda", 0.05))
    cfg = _mu_config(args, config, lam)
    try:
        result, table = synthesize(plant, cfg)
    except AllInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if result.report is not None and result.report.status != OPTIMAL:
        return EXIT_NUMERICAL
    _write_synthesis_outputs(result, table, _out_dir(args, config), _formats(args, config))
    return EXIT_OK


def _cmd_synth_data(args, config) -> int:
    data = _load_data(args, config)
    lam = float(_resolve(args, config, "lambda", 0.05))
    p_flag = _resolve(args, config, "p")
    if p_flag is not None and int(p_flag) != data.p:
        raise CliError(f"--p {p_flag} disagrees with the data file (p={data.p})")
    ubar_flag = _resolve(args, config, "ubar")
    if ubar_flag is not None:
        u_bar = np.array(_floats(ubar_flag, "--ubar"))
    else:
        plant_path = _resolve(args, config, "plant")
        if plant_path is None:
            raise CliError("data route needs saturation levels: give --ubar or --plant")
        u_bar = _load_plant(args, config).u_bar
    scale = float(_resolve(args, config, "delta-scale", 0.05))
    noise = NoiseModel(lam=lam, delta_omega=scale * np.eye(data.X.shape[0]))
    cfg = _mu_config(args, config, lam, u_bar=u_bar)
    try:
        result, table = synthesize((data, noise), cfg)
    except AllInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _write_synthesis_outputs(result, table, _out_dir(args, config), _formats(args, config))
    return EXIT_OK


def _cmd_gen_data(args, config) -> int:
    plant = _load_plant(args, config)
    lam = float(_resolve(args, config, "lambda", 0.05))
    p = int(_resolve(args, config, "p", 20))
    seed = int(_resolve(args, config, "seed", 1))
    scale = float(_resolve(args, config, "delta-scale", 0.05))
    noise = NoiseModel(lam=lam, delta_omega=scale * np.eye(plant.n_x))
    data, omega = harness.generate_data(plant, noise, p, seed)
    out = _out_dir(args, config)
    (out / "data.txt").write_text(harness.write_data(data))
    (out / "omega.txt").write_text(write_matrix(omega))
    informative, smin = harness.informativity(data)
    print(f"wrote {out / 'data.txt'} (p={p}, informative={informative}, min_singular={smin:.6g})")
    return EXIT_OK


def _cmd_simulate(args, config) -> int:
    plant = _load_plant(args, config)
    path = _resolve(args, config, "result")
    if path is None:
        raise CliError("--result FILE (synthesis result JSON) is required")
    try:
        result = SynthesisResult.from_json_dict(json.loads(Path(path).read_text()))
    except (OSError, KeyError, ValueError) as exc:
        raise CliError(f"cannot load result: {exc}")
    lam = float(_resolve(args, config, "lambda", 0.05))
    steps = int(_resolve(args, config, "steps", 200))
    count = int(_resolve(args, config, "trajectories", 40))
    seed = int(_resolve(args, config, "seed", 1))
    out = _out_dir(args, config)
    fmts = _formats(args, config, default="csv")

    basin = result.basin()
    rng = harness.split_rng(seed, harness.STREAM_TRAJECTORY)
    starts = ellipsoid_boundary_points(basin, count, rng)
    cell = harness.CellResult(kind="model", lam=lam, mu=result.mu, p=None, result=result)
    level = 1.0 / result.epsilon
    for x0 in starts:
        w_seq = (sphere_points(rng, plant.n_x, steps, np.sqrt(lam)) if lam > 0
                 else np.zeros((steps, plant.n_x)))
        traj = simulate(plant, result.K, x0, w_seq, steps)
        cell.trajectories.append(traj)
        v = np.einsum("ki,ij,kj->k", traj, basin.M, traj)
        cell.settle_steps.append(harness.first_settle_index(v, level, tol=1e-12))
    cell.basin_points = ellipsoid_boundary_points(basin, max(count * 4, 128), rng)
    cell.attractor_points = ellipsoid_boundary_points(result.attractor(), max(count * 4, 128), rng)

    P = basin.M
    for k, traj in enumerate(cell.trajectories):
        (out / f"traj_{k:02d}.csv").write_text(harness.write_trajectory_csv(traj, P))
    if "svg" in fmts and plant.n_x == 2:
        (out / "figure.svg").write_text(harness.write_cell_svg(cell))
    if "png" in fmts and plant.n_x == 2:
        harness.write_cell_png(cell, out / "figure.png")
    settled = sum(s is not None for s in cell.settle_steps)
    print(f"simulated {count} trajectories, {settled} settled into the attractor")
    return EXIT_OK


def _cmd_sweep(args, config) -> int:
    plant = _load_plant(args, config)
    lambdas = _floats(_resolve(args, config, "lambda", "0.01,0.05,0.1"), "--lambda")
    grid_spec = _resolve(args, config, "mu-grid")
    mu_flag = _resolve(args, config, "mu")
    full = False
    mus: tuple[float, ...] = ()
    if grid_spec is not None:
        if str(grid_spec) == "full":
            full = True
        else:
            mus = _mu_grid(str(grid_spec))
    else:
        mus = _floats(mu_flag if mu_flag is not None else "0.08,0.3,0.6", "--mu")
    p_flag = _resolve(args, config, "p")
    p_values = _ints(p_flag, "--p") if p_flag is not None else ()
    try:
        plan = harness.ExperimentPlan(
            lambdas=lambdas, mus=mus, p_values=p_values,
            seed=int(_resolve(args, config, "seed", 1)),
            trajectories=int(_resolve(args, config, "trajectories", 40)),
            steps=int(_resolve(args, config, "steps", 200)),
            alpha1=float(_resolve(args, config, "alpha1", 1.0)),
            alpha2=float(_resolve(args, config, "alpha2", 1e-3)),
            include_model=str(_resolve(args, config, "model", "yes")) not in ("no", "0", "false"),
            full_mu_grid=full,
            delta_omega_scale=float(_resolve(args, config, "delta-scale", 0.05)),
        )
    except ValueError as exc:
        raise CliError(str(exc))
    report = harness.run_experiment(plan, plant, workers=int(_resolve(args, config, "workers", 1)))
    out = _out_dir(args, config)
    fmts = _formats(args, config, default="csv,png,json")
    harness.emit_figures(report, out, formats=fmts)
    feasible = 0
    for cell in report.cells:
        if cell.feasible:
            feasible += 1
            conv = sum(s is not None for s in cell.settle_steps)
            print(f"{cell.name}: objective={cell.result.objective:.4f} "
                  f"epsilon={cell.result.epsilon:.4f} converged={conv}/{len(cell.settle_steps)}")
        else:
            print(f"{cell.name}: infeasible")
    if feasible == 0:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_lemma_check(args, config) -> int:
    seed = int(_resolve(args, config, "seed", 1))
    samples = int(_resolve(args, config, "samples", 1000))
    inst_path = _resolve(args, config, "instance")
    if inst_path is not None:
        try:
            inst = qmi.read_instance(Path(inst_path).read_text())
        except (OSError, SatStabError) as exc:
            raise CliError(f"cannot load instance: {exc}")
        rep = qmi.check_equivalence(inst, samples=samples, rng=harness.split_rng(seed, 9))
        print(f"relaxation feasible: {rep.ii_feasible} (eta={rep.eta_star}, "
              f"best min eig={rep.best_lambda_min:.3e}); sampled violations: {len(rep.i_violations)}")
        if rep.ii_feasible and rep.i_violations:
            return EXIT_NUMERICAL
        return EXIT_OK
    count = int(_resolve(args, config, "random", 20))
    rng = harness.split_rng(seed, 9)
    unsound = 0
    missed = 0
    for k in range(count):
        dims = rng.integers(1, 5, size=3)
        inst = qmi.random_feasible_instance(rng, *dims)
        rep = qmi.check_equivalence(inst, samples=samples, rng=rng)
        if rep.i_violations and rep.ii_feasible:
            unsound += 1
        bad = qmi.random_infeasible_instance(rng, *dims, at="center" if k % 2 else "boundary")
        rep = qmi.check_equivalence(bad, samples=samples, rng=rng)
        if not rep.i_violations:
            missed += 1
    print(f"{count} feasible instances: {unsound} soundness violations; "
          f"{count} engineered violations: {count - missed} exhibited")
    return EXIT_OK if unsound == 0 else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satstab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, *flags):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key=value file mirroring the flags")
        for flag in flags:
            if flag == "--lambda":
                p.add_argument("--lambda", dest="lam")
            else:
                p.add_argument(flag)
        return p

    add("synth-model", _cmd_synth_model,
        "--plant", "--lambda", "--mu", "--mu-grid", "--alpha1", "--alpha2", "--out", "--format")
    add("synth-data", _cmd_synth_data,
        "--data", "--plant", "--ubar", "--lambda", "--p", "--delta-scale",
        "--mu", "--mu-grid", "--alpha1", "--alpha2", "--out", "--format")
    add("gen-data", _cmd_gen_data,
        "--plant", "--lambda", "--p", "--seed", "--delta-scale", "--out")
    add("simulate", _cmd_simulate,
        "--plant", "--result", "--lambda", "--steps", "--trajectories", "--seed",
        "--out", "--format")
    add("sweep", _cmd_sweep,
        "--plant", "--lambda", "--mu", "--mu-grid", "--p", "--seed", "--alpha1", "--alpha2",
        "--steps", "--trajectories", "--model", "--delta-scale", "--workers", "--out", "--format")
    add("lemma-check", _cmd_lemma_check,
        "--instance", "--random", "--samples", "--seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _read_config(getattr(args, "config", None))
        return args.func(args, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except AllInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SatStabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
