"""Command-line interface: CSV I/O, config resolution, subcommands."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from aftsel import SimConfig, SurvivalDataset, compute_tpr_fdr, simulate_aft
from aftsel.cli import (
    emit_report_json,
    load_dataset_csv,
    main,
    write_dataset_csv,
)
from aftsel.errors import DatasetFormatError


@pytest.fixture
def runner():
    return CliRunner()


GOOD_CSV = (
    "time,status,x1,x2\n"
    "1.5,1,0.3,-0.2\n"
    "2.25,0,-1.1,0.4\n"
    "0.75,1,0.9,1.6\n"
)


# ----------------------------------------------------------------- CSV I/O


def test_load_small_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(GOOD_CSV)
    data = load_dataset_csv(path, standardize=False)
    assert data.n == 3 and data.p == 2
    assert np.array_equal(data.times, [1.5, 2.25, 0.75])
    assert np.array_equal(data.status, [1, 0, 1])
    assert data.design[1, 0] == -1.1


def test_load_standardizes_by_default(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(GOOD_CSV)
    data = load_dataset_csv(path)
    assert np.allclose(data.design.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(data.design.std(axis=0), 1.0, atol=1e-12)


def test_round_trip_is_exact(tmp_path):
    config = SimConfig(n=40, p=6, beta_true={0: 0.8, 3: -1.4},
                       target_censoring=0.4, seed=21)
    data = simulate_aft(config)
    path = tmp_path / "rt.csv"
    write_dataset_csv(data, str(path))
    back = load_dataset_csv(path, standardize=False)
    # repr-precision floats survive the text round trip bit-for-bit
    assert np.array_equal(back.times, data.times)
    assert np.array_equal(back.status, data.status)
    assert np.array_equal(back.design, data.design)


@pytest.mark.parametrize(
    "row,fragment",
    [
        ("0.0,1,0.3,0.1", "column 'time'"),
        ("-2.0,1,0.3,0.1", "column 'time'"),
        ("1.0,2,0.3,0.1", "column 'status'"),
        ("1.0,1,oops,0.1", "column 'x1'"),
        ("1.0,1,0.3", "expected 4 fields"),
        ("1.0,1,inf,0.1", "column 'x1'"),
    ],
)
def test_bad_cells_name_row_and_column(tmp_path, row, fragment):
    path = tmp_path / "bad.csv"
    path.write_text("time,status,x1,x2\n1.0,1,0.5,0.5\n" + row + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset_csv(path)
    assert "row 2" in str(exc.value)
    assert fragment in str(exc.value)


def test_header_and_empty_file_errors(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("t,status,x1\n1.0,1,0.5\n")
    with pytest.raises(DatasetFormatError, match="header"):
        load_dataset_csv(path)
    path.write_text("")
    with pytest.raises(DatasetFormatError, match="empty"):
        load_dataset_csv(path)
    path.write_text("time,status,x1\n")
    with pytest.raises(DatasetFormatError, match="no data rows"):
        load_dataset_csv(path)


def test_canonical_json_reserialize_is_byte_identical(tmp_path):
    payload = {"b": [1.5, 2], "a": {"z": 0.1, "k": None}}
    first = tmp_path / "one.json"
    second = tmp_path / "two.json"
    emit_report_json(payload, str(first))
    emit_report_json(json.loads(first.read_text()), str(second))
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().endswith("\n")


# -------------------------------------------------------------- simulate


def test_simulate_writes_csv(runner, tmp_path):
    out = tmp_path / "sim.csv"
    result = runner.invoke(
        main,
        ["simulate", "--n", "8", "--p", "3", "--beta", "0=1.2,2=-0.5",
         "--censoring", "0.3", "--seed", "5", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    data = load_dataset_csv(out, standardize=False)
    assert data.n == 8 and data.p == 3
    assert result.stderr.startswith("config: ")
    logged = json.loads(result.stderr.split("config: ", 1)[1].splitlines()[0])
    assert logged["n"] == 8 and logged["beta"] == "0=1.2,2=-0.5"


def test_simulate_to_stdout(runner):
    result = runner.invoke(main, ["simulate", "--n", "4", "--p", "2"])
    assert result.exit_code == 0
    assert result.stdout.splitlines()[0] == "time,status,x1,x2"
    assert len(result.stdout.splitlines()) == 5


def test_simulate_missing_required_flag(runner):
    result = runner.invoke(main, ["simulate", "--p", "3"])
    assert result.exit_code == 1
    assert "error: missing required option --n" in result.stderr


def test_simulate_rejects_bad_beta(runner):
    result = runner.invoke(
        main, ["simulate", "--n", "5", "--p", "2", "--beta", "0=1,0=2"]
    )
    assert result.exit_code == 1
    assert "error:" in result.stderr and "twice" in result.stderr
    result = runner.invoke(
        main, ["simulate", "--n", "5", "--p", "2", "--beta", "x"]
    )
    assert result.exit_code == 1
    assert "INDEX=VALUE" in result.stderr


def test_error_messages_are_single_line(runner):
    result = runner.invoke(
        main, ["simulate", "--n", "5", "--p", "2", "--censoring", "1.5"]
    )
    assert result.exit_code == 1
    error_lines = [
        ln for ln in result.stderr.splitlines() if ln.startswith("error:")
    ]
    assert len(error_lines) == 1


# ------------------------------------------------------------ config file


def test_config_file_with_flag_override(runner, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        "# a comment\n"
        "n = 6\n"
        "p = 2\n"
        "seed = 9   # trailing comment\n"
    )
    out = tmp_path / "sim.csv"
    result = runner.invoke(
        main,
        ["simulate", "--config", str(cfg), "--n", "11", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    logged = json.loads(result.stderr.split("config: ", 1)[1].splitlines()[0])
    assert logged["n"] == 11   # flag beats file
    assert logged["seed"] == 9  # file beats default
    assert load_dataset_csv(out, standardize=False).n == 11


def test_config_file_unknown_key(runner, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 6\np = 2\nbogus = 1\n")
    result = runner.invoke(main, ["simulate", "--config", str(cfg)])
    assert result.exit_code == 1
    assert "line 3" in result.stderr and "bogus" in result.stderr


def test_config_file_bad_value(runner, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = six\np = 2\n")
    result = runner.invoke(main, ["simulate", "--config", str(cfg)])
    assert result.exit_code == 1
    assert "'n'" in result.stderr and "six" in result.stderr


# ---------------------------------------------------------------- select


def _write_signal_csv(runner_path, n=250, p=12, seed=31):
    data = simulate_aft(
        SimConfig(n=n, p=p, beta_true={1: 1.6}, target_censoring=0.25,
                  seed=seed)
    )
    write_dataset_csv(data, str(runner_path))


def test_select_end_to_end(runner, tmp_path):
    csv_path = tmp_path / "d.csv"
    _write_signal_csv(csv_path)
    out = tmp_path / "sel.json"
    result = runner.invoke(
        main,
        ["select", "--data", str(csv_path), "--prior", "pemom",
         "--tau", "0.25", "--m", "2", "--maxno", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text())
    assert set(payload) >= {"selected", "stop_reason", "iterations", "config"}
    assert payload["config"]["prior"] == "pemom"
    assert [e["index"] for e in payload["selected"]] == [1]
    assert payload["final_fit"]["sigma"] > 0


def test_select_deterministic_output_bytes(runner, tmp_path):
    csv_path = tmp_path / "d.csv"
    _write_signal_csv(csv_path)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["select", "--data", str(csv_path), "--tau", "0.25",
             "--m", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_select_bad_row_error(runner, tmp_path):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("time,status,x1,x2\n1.0,1,0.2,0.3\n0.0,1,0.1,0.2\n")
    result = runner.invoke(main, ["select", "--data", str(csv_path)])
    assert result.exit_code == 1
    assert result.stderr.count("error:") == 1
    assert "row 2" in result.stderr and "'time'" in result.stderr


def test_select_missing_file_is_usage_error(runner, tmp_path):
    result = runner.invoke(
        main, ["select", "--data", str(tmp_path / "nope.csv")]
    )
    assert result.exit_code != 0


def test_threads_flag_validation(runner, tmp_path):
    csv_path = tmp_path / "d.csv"
    _write_signal_csv(csv_path, n=60, p=3)
    result = runner.invoke(
        main,
        ["select", "--data", str(csv_path), "--tau", "0.25", "--m", "1",
         "--threads", "0"],
    )
    assert result.exit_code == 1
    assert "--threads" in result.stderr


# ------------------------------------------------------------------ bench


BENCH_ARGS = [
    "bench", "--n", "150", "--p", "10", "--beta", "0=1.8",
    "--censoring", "0.2", "--seed", "41", "--replications", "2",
    "--priors", "pmom:0.25,pemom:0.25", "--m", "2", "--maxno", "2",
]


def test_bench_byte_identical_reruns(runner, tmp_path):
    blobs = []
    for name in ("r1.json", "r2.json"):
        out = tmp_path / name
        result = runner.invoke(main, BENCH_ARGS + ["--out", str(out)])
        assert result.exit_code == 0, result.output
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_bench_report_is_self_consistent(runner, tmp_path):
    out = tmp_path / "r.json"
    result = runner.invoke(main, BENCH_ARGS + ["--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert {m["label"] for m in report["methods"]} == {"pmom", "pemom"}
    assert report["generator"]["beta_true"] == {"0": 1.8}
    assert len(report["seeds"]) == 2
    truth = {0}
    for method in report["methods"]:
        assert method["prior"]["tau"] == 0.25
        for row in method["rows"]:
            if row["failed"]:
                continue
            tpr, fdr = compute_tpr_fdr(set(row["selected"]), truth)
            assert row["tpr"] == tpr and row["fdr"] == fdr
        ok = [r for r in method["rows"] if not r["failed"]]
        if ok:
            assert method["tpr_mean"] == pytest.approx(
                sum(r["tpr"] for r in ok) / len(ok), abs=1e-12
            )


def test_bench_priors_inherit_default_tau(runner, tmp_path):
    out = tmp_path / "r.json"
    args = [
        "bench", "--n", "100", "--p", "5", "--beta", "0=2.0",
        "--replications", "1", "--priors", "pmom:0.1,pemom",
        "--tau", "0.05", "--m", "1", "--maxno", "1",
    ]
    result = runner.invoke(main, args + ["--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    taus = {m["label"]: m["prior"]["tau"] for m in report["methods"]}
    assert taus == {"pmom": 0.1, "pemom": 0.05}


def test_bench_rejects_unknown_prior(runner):
    result = runner.invoke(
        main,
        ["bench", "--n", "50", "--p", "4", "--beta", "0=1.0",
         "--replications", "1", "--priors", "cauchy"],
    )
    assert result.exit_code == 1
    assert "error:" in result.stderr
