import json
import subprocess
import sys

import pytest

from edgeids.cli import EXIT_DATA, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from edgeids.dataio import save_csv
from synth import blobs

SMALL_GRID = {"n_trees": [2, 4], "max_depth": [3], "min_child_size": [5], "colsample": [1.0],
              "subsample": [1.0], "num_leaves": [8]}


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture
def csv_path(tmp_path):
    p = tmp_path / "data.csv"
    save_csv(blobs(n=150, d=5, n_classes=3, seed=2), p)
    return p


@pytest.fixture
def grid_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"grid": SMALL_GRID}))
    return p


def test_gridsearch_writes_outputs(tmp_path, csv_path, grid_config):
    out = tmp_path / "gs"
    assert run("gridsearch", "--config", grid_config, "--data", csv_path, "--out-dir", out) == EXIT_OK
    events = (out / "events.ndjson").read_text().splitlines()
    assert len(events) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_candidates"] == 2 and summary["best"]["status"] == "evaluated"
    assert (out / "best.hams").read_bytes()[:4] == b"HAMS"


def test_gridsearch_zero_flash_budget(tmp_path, csv_path, grid_config):
    out = tmp_path / "gs"
    code = run("gridsearch", "--config", grid_config, "--data", csv_path, "--out-dir", out,
               "--budget-flash-kb", 0)
    assert code == EXIT_INFEASIBLE
    assert json.loads((out / "summary.json").read_text())["n_feasible"] == 0


def test_config_supplies_required_flags(tmp_path, csv_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(csv_path), "out_dir": str(tmp_path / "o"), "grid": SMALL_GRID,
                               "budget-flash-kb": 0}))
    assert run("gridsearch", "--config", cfg) == EXIT_INFEASIBLE
    # an explicit flag overrides the config value
    assert run("gridsearch", "--config", cfg, "--budget-flash-kb", 300) == EXIT_OK


def test_unknown_config_key(tmp_path, csv_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"not_a_flag": 1}))
    assert run("eval", "--config", cfg, "--data", csv_path) == EXIT_USAGE


def test_missing_required_flag():
    assert run("gridsearch") == EXIT_USAGE
    assert run() == EXIT_USAGE


def test_missing_file(tmp_path):
    assert run("preprocess", "--data", tmp_path / "nope.csv", "--out-dir", tmp_path) == EXIT_IO


def test_bad_mapping_is_data_error(tmp_path, csv_path):
    m = tmp_path / "map.json"
    m.write_text(json.dumps({"k0": "a"}))
    assert run("preprocess", "--data", csv_path, "--out-dir", tmp_path / "p", "--mapping", m) == EXIT_DATA


def test_preprocess(tmp_path, csv_path):
    out = tmp_path / "p"
    assert run("preprocess", "--data", csv_path, "--out-dir", out) == EXIT_OK
    assert set(json.loads((out / "scaler.json").read_text())) == {"feature_names", "mins", "maxs"}
    assert (out / "clean.csv").exists()


def test_train_eval_profile_bench(tmp_path, csv_path, capsys):
    desc = tmp_path / "d.json"
    desc.write_text(json.dumps({"family": "GBDT_LEVELWISE", "n_trees": 3, "max_depth": 3}))
    model = tmp_path / "m.hams"
    assert run("train", "--data", csv_path, "--descriptor", desc, "--out", model) == EXIT_OK
    capsys.readouterr()

    rep = tmp_path / "eval.json"
    assert run("eval", "--data", csv_path, "--model", model, "--out", rep) == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["k"] == 5 and len(doc["folds"]) == 5
    assert 0.9 <= doc["accuracy"]["mean"] <= 1.0 and doc["accuracy"]["std"] >= 0

    prof = tmp_path / "prof.json"
    assert run("profile", "--model", model, "--out", prof) == EXIT_OK
    p = json.loads(prof.read_text())
    assert p["feasible"] and p["profile"]["compute_unit"] == "Ops"

    bench = tmp_path / "bench.json"
    assert run("bench", "--model", model, "--current-ma", 50, "--runs", 30, "--out", bench) == EXIT_OK
    b = json.loads(bench.read_text())
    assert b["power_mW"] == 250 and set(b["latency_ms"]) == {"mean", "p50", "p95"}


def test_cnn_descriptor_profile(tmp_path):
    desc = tmp_path / "cnn.json"
    desc.write_text(json.dumps({"blocks": [{"filters": 16, "kernel": 3}], "input_len": 47, "n_classes": 15}))
    out = tmp_path / "p.json"
    assert run("profile", "--descriptor", desc, "--out", out) == EXIT_OK
    assert json.loads(out.read_text())["profile"]["compute"] == 30170


def test_bench_runs_below_minimum(tmp_path, csv_path):
    desc = tmp_path / "d.json"
    desc.write_text(json.dumps({"family": "RF", "n_trees": 2, "max_depth": 2}))
    model = tmp_path / "m.hams"
    run("train", "--data", csv_path, "--descriptor", desc, "--out", model)
    assert run("bench", "--model", model, "--current-ma", 50, "--runs", 29) == EXIT_DATA


def test_extract_matches_golden(tmp_path, fixture_pcap_path, data_dir, capsys):
    out = tmp_path / "f.csv"
    assert run("extract", "--pcap", fixture_pcap_path, "--out", out) == EXIT_OK
    assert out.read_bytes() == (data_dir / "fixture_features.csv").read_bytes()
    stats = json.loads(capsys.readouterr().out)
    assert stats == {"flows": 5, "packets": 9, "skipped": 1, "truncated": 0}


def test_classify_schema_mismatch(tmp_path, csv_path, fixture_pcap_path):
    desc = tmp_path / "d.json"
    desc.write_text(json.dumps({"family": "RF", "n_trees": 2, "max_depth": 2}))
    model = tmp_path / "m.hams"
    run("train", "--data", csv_path, "--descriptor", desc, "--out", model)
    assert run("classify", "--pcap", fixture_pcap_path, "--model", model) == EXIT_DATA


def test_classify_fixture(tmp_path, fixture_pcap_path):
    from runtime_models import protocol_artifact

    model = tmp_path / "proto.hams"
    protocol_artifact().save(model)
    out = tmp_path / "pred.ndjson"
    assert run("classify", "--pcap", fixture_pcap_path, "--model", model, "--out", out) == EXIT_OK
    assert [json.loads(l)["class"] for l in out.read_text().splitlines()] == ["tcp", "tcp", "udp", "icmp", "tcp"]


def test_console_entry_point(tmp_path, fixture_pcap_path):
    out = tmp_path / "f.csv"
    r = subprocess.run([sys.executable, "-m", "edgeids.cli", "extract", "--pcap", str(fixture_pcap_path),
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
