import csv
import io
import json

import numpy as np
import pytest

from sparse_online import bench
from sparse_online.bench import (
    ETA_GRID,
    REPORT_COLUMNS,
    SECONDARY_GRID,
    AlgoParams,
    ExperimentSpec,
    SpecError,
    fold_indices,
    grid_search,
    make_config,
)
from sparse_online.cli import run
from sparse_online.data_io import SyntheticSpec, generate_synthetic, parse_libsvm_line

TOY_TRAIN = "+1 1:1\n-1 2:1\n"
TOY_TEST = "+1 1:1 2:0.5\n-1 1:0.5 2:1\n-1 1:2 2:1\n"


@pytest.fixture
def toy(tmp_path):
    tr, te = tmp_path / "train.svm", tmp_path / "test.svm"
    tr.write_text(TOY_TRAIN)
    te.write_text(TOY_TEST)
    return tr, te


@pytest.fixture
def synth_spec(tmp_path):
    p = tmp_path / "synth.json"
    p.write_text(json.dumps({"n_train": 300, "n_test": 100, "ambient_dim": 40,
                             "n_effective": 5, "n_noise": 8, "seed": 1}))
    return p


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_grids_match_stated_ranges():
    assert len(ETA_GRID) == 11 and ETA_GRID[0] == 0.5 and ETA_GRID[-1] == 512
    assert len(SECONDARY_GRID) == 11 and SECONDARY_GRID[0] == 2 ** -5 and SECONDARY_GRID[-1] == 32


def test_fold_indices_partition():
    folds = fold_indices(23, 5, seed=4)
    allidx = np.sort(np.concatenate(folds))
    assert allidx.tolist() == list(range(23))
    assert sorted(len(f) for f in folds) == [4, 4, 5, 5, 5]
    again = fold_indices(23, 5, seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    with pytest.raises(SpecError):
        fold_indices(10, 1, 0)


@pytest.fixture(scope="module")
def cv_data():
    tr, _, _ = generate_synthetic(SyntheticSpec(n_train=200, n_test=0, ambient_dim=30,
                                                n_effective=5, n_noise=5, seed=2))
    return tr


def test_grid_search_single_point(cv_data):
    res = grid_search("ssol-diag", cv_data, 30, eta_grid=[2.0], secondary_grid=[0.25])
    assert (res.best.eta, res.best.r) == (2.0, 0.25)
    assert len(res.table) == 1


def test_grid_search_deterministic(cv_data):
    a = grid_search("fsol", cv_data, 30, eta_grid=[0.5, 1.0, 4.0])
    b = grid_search("fsol", cv_data, 30, eta_grid=[0.5, 1.0, 4.0])
    assert a.best == b.best and a.table == b.table
    assert a.best_score == min(r["cv_score"] for r in a.table)


def test_grid_search_tie_break():
    # identical, trivially separable examples: every grid point scores 0
    data = [parse_libsvm_line("+1 1:1")] * 10
    res = grid_search("ssol-diag", data, 1, eta_grid=[4.0, 1.0, 2.0], secondary_grid=[8.0, 0.5])
    assert {r["cv_score"] for r in res.table} == {0.0}
    assert (res.best.eta, res.best.r) == (1.0, 0.5)


def test_grid_search_cost_sensitive_secondary_is_scale(cv_data):
    res = grid_search("cpa", cv_data, 30, secondary_grid=[0.5, 2.0])
    assert {r["param"] for r in res.table} == {"C"}
    assert len(res.table) == 2


def test_make_config_errors():
    with pytest.raises(SpecError):
        make_config("nope")
    with pytest.raises(SpecError):
        make_config("fsol", AlgoParams(c_pos=2.0))
    with pytest.raises(SpecError):
        make_config("fobos", AlgoParams(schedule="inv-t"))
    with pytest.raises(SpecError):
        ExperimentSpec(task="sweep", algorithms=["fsol"], seeds=0)


def test_train_eval_hand_trace(toy, tmp_path):
    # both orders end at theta = (1, -1): each first-round margin is 0 -> loss 1.
    # test margins: 0.5 (+1 ok), -0.5 (-1 ok), 1.0 (-1 wrong) -> error 1/3
    tr, te = toy
    out = tmp_path / "r.csv"
    assert run(["train", "--algo", "fsol", "--train", str(tr), "--test", str(te),
                "--out", str(out), "--deterministic"]) == 0
    rows = read_csv(out)
    assert float(rows[0]["test_error"]) == pytest.approx(1 / 3)
    assert rows[0]["test_error"] == "0.33333333333333331"  # 17 significant digits
    assert float(rows[0]["weighted_sum"]) == 0.75
    assert rows[0]["updates_count"] == "2"
    assert "train_time_seconds" not in rows[0]


def test_sweep_rows_sorted_with_summaries(synth_spec, tmp_path):
    out = tmp_path / "sweep.csv"
    rc = run(["sweep", "--algo", "ssol-diag,fsol", "--synth-spec", str(synth_spec),
              "--lambda-grid", "0,0.5,5", "--seeds", "3", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out)
    assert list(rows[0]) == list(REPORT_COLUMNS)
    per_seed = [r for r in rows if r["seed"] not in ("mean", "std")]
    assert len(per_seed) == 2 * 3 * 3
    assert len(rows) - len(per_seed) == 2 * 3 * 2
    keys = [(r["algorithm"], float(r["lambda"])) for r in rows]
    assert keys == sorted(keys)
    assert [r["algorithm"] for r in rows[:15]] == ["fsol"] * 15
    for r in per_seed:
        assert 0 <= float(r["test_error"]) <= 1 and float(r["train_time_seconds"]) >= 0


def test_deterministic_output_is_byte_identical(synth_spec, tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"d{k}.csv"
        assert run(["sweep", "--algo", "fsol,ssol-diag", "--synth-spec", str(synth_spec),
                    "--lambda-grid", "0,1", "--seeds", "2", "--out", str(p),
                    "--deterministic"]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_cost_on_insensitive_algorithm_is_rejected(synth_spec):
    assert run(["sweep", "--algo", "fsol", "--synth-spec", str(synth_spec),
                "--lambda-grid", "0", "--cpos", "2"]) == 2


def test_json_mirrors_csv_fields(toy, tmp_path):
    tr, te = toy
    out = tmp_path / "r.json"
    assert run(["train", "--algo", "ssol", "--train", str(tr), "--test", str(te),
                "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert list(rows[0]) == list(REPORT_COLUMNS)
    assert [r["seed"] for r in rows] == [0, "mean", "std"]


def test_synth_artifacts(synth_spec, tmp_path):
    out = tmp_path / "gen"
    assert run(["synth", "--spec", str(synth_spec), "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["train"]["n_examples"] == 300 and meta["test"]["n_examples"] == 100
    assert len(meta["true_plane"]) == 5
    assert len((out / "train.libsvm").read_text().splitlines()) == 300


def test_grid_search_cli(synth_spec, tmp_path):
    out = tmp_path / "g.csv"
    assert run(["grid-search", "--algo", "ssol-diag", "--synth-spec", str(synth_spec),
                "--eta-grid", "0.5,1", "--param-grid", "1,2", "--folds", "3",
                "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 4
    assert sum(r["best"] == "true" for r in rows) == 1


def test_regret_cli(synth_spec, tmp_path):
    out = tmp_path / "reg.csv"
    assert run(["regret", "--algo", "fsol", "--synth-spec", str(synth_spec),
                "--checkpoints", "50,100,200", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [int(r["T"]) for r in rows] == [50, 100, 200]
    for r in rows:
        gap = float(r["online_loss"]) - float(r["comparator_loss"])
        assert float(r["regret"]) == pytest.approx(gap, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("argv,code", [
    (["train", "--algo", "nope"], 2),
    (["sweep", "--algo", "fsol", "--lambda-grid", "-1"], 2),
    (["train", "--algo", "fsol", "--train", "/no/such/file", "--test", "/no/such/file"], 3),
    (["regret", "--algo", "fsol", "--checkpoints", "0"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert run(argv) == code
    assert "sol-bench" in capsys.readouterr().err


def test_malformed_data_is_a_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.svm"
    bad.write_text("+1 1:1\n1 a:b\n")
    assert run(["train", "--algo", "fsol", "--train", str(bad), "--test", str(bad)]) == 3
    assert "line 2" in capsys.readouterr().err


def test_full_matrix_cap_is_a_spec_error(toy):
    tr, te = toy
    assert run(["train", "--algo", "ssol", "--train", str(tr), "--test", str(te),
                "--full-dim-cap", "1"]) == 2


def test_experiment_spec_validation():
    with pytest.raises(SpecError):
        ExperimentSpec(task="grid-search", algorithms=["fsol"], folds=1)
    with pytest.raises(SpecError):
        ExperimentSpec(task="sweep", algorithms=["fsol"], lambda_grid=[])
    assert ExperimentSpec(task="sweep", algorithms=["fsol"], seed=3, seeds=2).seed_list == [3, 4]
    assert bench.Task("train") is bench.Task.TRAIN_EVAL
