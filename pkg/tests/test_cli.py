import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from ftcarbon.cli import main

DEMO = Path(__file__).resolve().parent.parent / "demo"


@pytest.fixture
def demo(tmp_path):
    shutil.copytree(DEMO, tmp_path / "demo")
    return tmp_path / "demo"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_estimate_t5_json(capsys, demo):
    code, out, err = run(capsys, "estimate", "--scenario", str(demo / "t5.json"))
    assert code == 0 and err == ""
    doc = json.loads(out)
    assert doc["energy"]["total_wh"] == pytest.approx(11.91, rel=0.005)
    assert doc["grams_co2e_per_epoch"] == pytest.approx(3.5, rel=0.005)
    assert doc["epochs"] == 5
    assert [q["route_label"] for q in doc["flight_equivalents"]] == ["Paris-London", "Kolkata-Dehradun"]


def test_estimate_with_registry(capsys, demo, tmp_path):
    reg = tmp_path / "reg.json"
    reg.write_text(json.dumps({"facilities": {"paper-iowa": {"carbon_intensity_g_per_kwh": 475, "pue": 1.1}}}))
    code, out, _ = run(capsys, "estimate", "--scenario", str(demo / "llama.json"), "--registry", str(reg))
    assert code == 0
    assert json.loads(out)["grams_co2e_per_epoch"] == pytest.approx(71.10, rel=0.005)


def test_estimate_overrides(capsys, demo):
    code, out, _ = run(capsys, "estimate", "--scenario", str(demo / "t5.json"), "--facility", "global-average",
                       "--epochs", "2", "--format", "table")
    assert code == 0
    assert "global-average" in out and "epochs" in out


def test_estimate_without_scenario_is_usage_error(capsys):
    code, out, err = run(capsys, "estimate")
    assert code == 1 and out == ""
    assert "usage:" in err and "error:" in err


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["estimate", "--scenario", "x", "--bogus"],
                                  ["score", "--pairs", "p", "--format", "xml"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_non_monotone_trace_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_seconds,cpu_util,gpu_util,gpu_mem_gb,sys_mem_gb\n0,1,1,1,1\n10,1,1,1,1\n5,1,1,1,1\n")
    code, out, err = run(capsys, "telemetry", "--trace", str(bad))
    assert code == 2 and out == ""
    assert err == "error: non-monotone timestamp at row 4\n"


def test_missing_file_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "estimate", "--scenario", str(tmp_path / "nope.json"))
    assert code == 2 and err.startswith("error: ")


def test_validation_exit_3(capsys, demo, tmp_path):
    code, _, err = run(capsys, "estimate", "--scenario", str(demo / "t5.json"), "--facility", "Paper-Iowa")
    assert code == 3 and "paper-iowa" in err
    reg = tmp_path / "reg.json"
    reg.write_text(json.dumps({"facilities": {"x": {"carbon_intensity_g_per_kwh": 1, "pue": 0.9}}}))
    code, _, err = run(capsys, "estimate", "--scenario", str(demo / "t5.json"), "--registry", str(reg))
    assert code == 3 and err.count("\n") == 1


def test_sweep_formats(capsys, demo):
    code, out, _ = run(capsys, "sweep", "--scenario", str(demo / "llama.json"),
                       "--locations", str(demo / "locations.json"), "--format", "json")
    assert code == 0
    results = json.loads(out)["results"]
    assert [r["location_id"] for r in results] == ["paper-iowa", "ci475-pue1.10", "global-average"]
    assert results[1]["grams_co2e_per_epoch"] == pytest.approx(71.10, rel=0.005)
    code, out, _ = run(capsys, "sweep", "--scenario", str(demo / "llama.json"), "--facility", "paper-iowa",
                       "--format", "csv")
    assert code == 0 and out.splitlines()[1].startswith("paper-iowa,293.80,1.10,149.68,43.98")


def test_sweep_defaults_to_registry_facilities(capsys, demo):
    code, out, _ = run(capsys, "sweep", "--scenario", str(demo / "t5.json"))
    assert code == 0 and "global-average" in out and "paper-iowa" in out


def test_telemetry(capsys, demo):
    code, out, _ = run(capsys, "telemetry", "--trace", str(demo / "trace.csv"))
    doc = json.loads(out)
    assert code == 0
    assert doc["effective"]["grams_co2e_per_epoch"] <= doc["full_usage"]["grams_co2e_per_epoch"]
    assert doc["full_usage"]["energy"]["total_wh"] == pytest.approx(11.91, rel=0.005)


def test_score(capsys, demo):
    code, out, _ = run(capsys, "score", "--pairs", str(demo / "pairs.tsv"))
    doc = json.loads(out)
    assert code == 0 and len(doc["pairs"]) == 2 and doc["corpus"]["bertscore"] is None
    code, out, _ = run(capsys, "score", "--pairs", str(demo / "pairs.tsv"), "--embeddings", str(demo / "emb"))
    assert json.loads(out)["corpus"]["bertscore"]["f1"] > 0


def test_score_missing_embeddings(capsys, demo):
    (demo / "emb" / "2.ref.emb").unlink()
    code, _, err = run(capsys, "score", "--pairs", str(demo / "pairs.tsv"), "--embeddings", str(demo / "emb"))
    assert code == 3 and "pair 2" in err


def test_report(capsys, demo):
    code, out, _ = run(capsys, "report", "--scenario", str(demo / "manifest.json"), "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("label,rouge1")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["BART-base", "LLaMA-3-8B", "T5-base"]


def test_report_with_pairs(capsys, demo):
    manifest = {"scenarios": {"m": {"runtime": {"minutes": 3}}},
                "scores": {"m": {"pairs": "pairs.tsv", "embeddings": "emb"}}}
    (demo / "m.json").write_text(json.dumps(manifest))
    code, out, _ = run(capsys, "report", "--scenario", str(demo / "m.json"), "--format", "json")
    assert code == 0
    assert json.loads(out)["records"][0]["scores"]["bertscore"] is not None


def test_report_label_mismatch(capsys, demo):
    manifest = json.loads((demo / "manifest.json").read_text())
    del manifest["scores"]["BART-base"]
    (demo / "m.json").write_text(json.dumps(manifest))
    code, _, err = run(capsys, "report", "--scenario", str(demo / "m.json"))
    assert code == 3 and "BART-base" in err


def test_out_flag(capsys, demo, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "estimate", "--scenario", str(demo / "t5.json"), "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["epochs"] == 5


def test_no_files_written_without_out(capsys, demo):
    before = sorted(p.name for p in demo.rglob("*"))
    for argv in (["estimate", "--scenario", str(demo / "t5.json")],
                 ["report", "--scenario", str(demo / "manifest.json")],
                 ["score", "--pairs", str(demo / "pairs.tsv")]):
        assert run(capsys, *argv)[0] == 0
    assert sorted(p.name for p in demo.rglob("*")) == before


@pytest.mark.parametrize("sub", ["estimate", "sweep", "telemetry", "score", "report"])
def test_help(capsys, sub):
    code, out, _ = run(capsys, sub, "--help")
    assert code == 0
    assert "--format" in out and "--out" in out


def test_help_lists_all_flags(capsys):
    flags = {"estimate": ["--scenario", "--registry", "--profile", "--facility", "--epochs"],
             "sweep": ["--scenario", "--registry", "--profile", "--locations", "--facility", "--epochs"],
             "telemetry": ["--trace", "--registry", "--profile", "--facility", "--epochs"],
             "score": ["--pairs", "--embeddings"],
             "report": ["--scenario", "--registry", "--locations", "--profile", "--facility", "--epochs"]}
    for sub, expected in flags.items():
        _, out, _ = run(capsys, sub, "--help")
        for flag in expected:
            assert flag in out, (sub, flag)


def test_module_entry_point(demo):
    proc = subprocess.run([sys.executable, "-m", "ftcarbon", "estimate", "--scenario", str(demo / "bart.json")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["energy"]["total_wh"] == pytest.approx(8.16, rel=0.005)

