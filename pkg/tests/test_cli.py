import json

import numpy as np
import pytest

from satstab.cli import main
from satstab.harness import write_plant
from satstab.qmi_relaxation import random_feasible_instance, write_instance
from satstab.saturated_sys import Plant


@pytest.fixture()
def plant_file(tmp_path, bench_plant):
    path = tmp_path / "plant.txt"
    path.write_text(write_plant(bench_plant))
    return path


def test_synth_model_writes_result_and_table(tmp_path, plant_file):
    out = tmp_path / "out"
    code = main(["synth-model", "--plant", str(plant_file), "--lambda", "0.05",
                 "--mu", "0.3", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["epsilon"] == pytest.approx(79.54, rel=1e-2)
    table = (out / "mu_table.csv").read_text().strip().splitlines()
    assert table[0] == "mu,status,objective,epsilon,trace_w"
    assert len(table) == 2


def test_gen_data_then_synth_data_pipeline(tmp_path, plant_file):
    data_dir = tmp_path / "data"
    code = main(["gen-data", "--plant", str(plant_file), "--lambda", "0.05",
                 "--p", "20", "--seed", "1", "--out", str(data_dir)])
    assert code == 0
    assert (data_dir / "data.txt").exists()
    assert (data_dir / "omega.txt").exists()

    out = tmp_path / "synth"
    code = main(["synth-data", "--data", str(data_dir / "data.txt"),
                 "--plant", str(plant_file), "--lambda", "0.05",
                 "--mu", "0.3", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["eta"] is not None and doc["eta"] > 0


def test_simulate_from_result_json(tmp_path, plant_file):
    out = tmp_path / "out"
    main(["synth-model", "--plant", str(plant_file), "--lambda", "0.05",
          "--mu", "0.3", "--out", str(out)])
    sim = tmp_path / "sim"
    code = main(["simulate", "--plant", str(plant_file), "--result", str(out / "result.json"),
                 "--lambda", "0.05", "--steps", "60", "--trajectories", "6",
                 "--seed", "2", "--out", str(sim), "--format", "csv,svg"])
    assert code == 0
    assert len(list(sim.glob("traj_*.csv"))) == 6
    assert (sim / "figure.svg").read_text().count("<polyline") == 8


def test_sweep_minimal(tmp_path, plant_file):
    out = tmp_path / "sweep"
    code = main(["sweep", "--plant", str(plant_file), "--lambda", "0.05", "--mu", "0.3",
                 "--trajectories", "8", "--steps", "60", "--seed", "3",
                 "--out", str(out), "--format", "csv,json"])
    assert code == 0
    assert (out / "summary.json").exists()
    assert (out / "cells.csv").exists()


def test_mu_grid_flag(tmp_path, plant_file):
    out = tmp_path / "grid"
    code = main(["synth-model", "--plant", str(plant_file), "--lambda", "0.05",
                 "--mu-grid", "0.2:0.4:0.1", "--out", str(out)])
    assert code == 0
    rows = (out / "mu_table.csv").read_text().strip().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == ["0.2", "0.3", "0.4"]


def test_missing_plant_is_invalid_input(tmp_path):
    code = main(["synth-model", "--plant", str(tmp_path / "nope.txt"), "--mu", "0.3"])
    assert code == 3


def test_unknown_format_is_invalid_input(tmp_path, plant_file):
    code = main(["synth-model", "--plant", str(plant_file), "--mu", "0.3",
                 "--format", "pdf", "--out", str(tmp_path)])
    assert code == 3


def test_uninformative_data_exits_infeasible(tmp_path, plant_file):
    x = np.array([[0.3], [0.7]])
    from satstab.harness import DataCollection, write_data
    data = DataCollection(Xplus=np.hstack([x, x]), X=np.hstack([x, x]), U=np.array([[0.5, 0.5]]))
    data_path = tmp_path / "thin.txt"
    data_path.write_text(write_data(data))
    code = main(["synth-data", "--data", str(data_path), "--plant", str(plant_file),
                 "--lambda", "0.05", "--mu", "0.3", "--out", str(tmp_path)])
    assert code == 2


def test_config_file_supplies_flags_and_flags_win(tmp_path, plant_file):
    out_cfg = tmp_path / "from_config"
    out_flag = tmp_path / "from_flag"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"plant = {plant_file}\n"
        "lambda = 0.05\n"
        "mu = 0.3\n"
        f"out = {out_cfg}\n"
        "# comment lines are ignored\n"
    )
    assert main(["synth-model", "--config", str(cfg)]) == 0
    assert (out_cfg / "result.json").exists()
    assert main(["synth-model", "--config", str(cfg), "--out", str(out_flag)]) == 0
    assert (out_flag / "result.json").exists()


def test_bad_config_line_is_invalid_input(tmp_path, plant_file):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this is not a key value pair\n")
    assert main(["synth-model", "--config", str(cfg), "--plant", str(plant_file)]) == 3


def test_lemma_check_instance(tmp_path):
    inst = random_feasible_instance(np.random.default_rng(1), 2, 2, 2)
    path = tmp_path / "instance.txt"
    path.write_text(write_instance(inst))
    assert main(["lemma-check", "--instance", str(path), "--samples", "200"]) == 0


def test_lemma_check_random_suite():
    assert main(["lemma-check", "--random", "4", "--samples", "200", "--seed", "5"]) == 0


def test_sweep_all_infeasible_exits_two(tmp_path):
    # a plant so expansive that no saturating feedback can certify a basin
    wild = Plant(A=5.0 * np.eye(2), B=[[1e-6], [1e-6]], u_bar=[1e-6])
    path = tmp_path / "wild.txt"
    path.write_text(write_plant(wild))
    code = main(["sweep", "--plant", str(path), "--lambda", "0.05", "--mu", "0.3",
                 "--trajectories", "4", "--steps", "10", "--out", str(tmp_path / "o"),
                 "--format", "csv"])
    assert code == 2
