import json
import subprocess
import sys

import pytest

from borrowimpact.cli import main


def test_analyze_writes_everything(golden, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(golden), "--out", str(out), "--jobs", "2"]) == 0
    assert "5 pairs: 3 analyzed" in capsys.readouterr().out
    for name in ("reports.ldjson", "summary.json", "run_meta.json", "ate_histogram.csv"):
        assert (out / name).is_file()
    assert len(list((out / "plots").glob("pair_*.csv"))) == 3
    assert json.loads((out / "summary.json").read_text())["either_causal_count"] == 2


def test_analyze_overrides(golden, tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(golden), "--out", str(out), "--max-lag", "2",
                 "--alpha", "0.01", "--granger-mode", "full"]) == 0
    first = json.loads((out / "reports.ldjson").read_text().splitlines()[0])
    assert first["granger"]["max_lag_used"] == 2
    assert first["granger"]["alpha"] == 0.01 and first["rdd"]["alpha"] == 0.01


def test_link_then_analyze_from_links_file(golden, tmp_path):
    out = tmp_path / "links"
    assert main(["link", "--config", str(golden), "--out", str(out)]) == 0
    doc = json.loads((out / "links.json").read_text())
    assert "clube" not in doc  # only songs that appear in the edge file are linked
    assert doc["peaches"]["match"]["freebase_mid"] == "/m/0fx0peaches"
    assert doc["ittakestwo"]["match"] is None
    assert doc["shots"]["match"]["kb_id"] == "Q900101"

    cfg = golden.parent / "linked.ini"
    cfg.write_text(golden.read_text().replace("songs = songs.csv\n", "")
                   .replace("fixture = entities.json\n", f"links = {out / 'links.json'}\n"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["analyze", "--config", str(golden), "--out", str(a)]) == 0
    assert main(["analyze", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "reports.ldjson").read_bytes() == (b / "reports.ldjson").read_bytes()


def test_report_rebuilds_summary(golden, tmp_path):
    out = tmp_path / "out"
    main(["analyze", "--config", str(golden), "--out", str(out)])
    summary = (out / "summary.json").read_bytes()
    (out / "summary.json").unlink()
    assert main(["report", "--out", str(out)]) == 0
    assert (out / "summary.json").read_bytes() == summary


def test_synth_golden_and_scenarios(tmp_path):
    assert main(["synth", "golden", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "config.ini").exists()
    scenarios = tmp_path / "s.ini"
    scenarios.write_text("[rdd:step]\nbeta = 10, 0, 20, 0\nnoise_sigma = 0\nseed = 1\n"
                    "[granger:coupled]\ncoupling = 0.8\nlength = 50\nseed = 3\n")
    assert main(["synth", "scenarios", str(scenarios), "--out", str(tmp_path / "s")]) == 0
    step = (tmp_path / "s" / "step.csv").read_text().splitlines()
    assert step[0] == "t,value" and len(step) == 25
    assert step[1] == "-12,10.0" and step[-1] == "12,30.0"
    assert len((tmp_path / "s" / "coupled.csv").read_text().splitlines()) == 51


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["analyze", "--config", str(tmp_path / "nope.ini")]) == 1
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.ini"
    bad.write_text("[pipeline]\nedges = e.csv\n")
    assert main(["analyze", "--config", str(bad)]) == 1
    assert main(["synth", "scenarios", "--out", str(tmp_path)]) == 1


def test_other_errors_exit_2(golden, tmp_path):
    (golden.parent / "edges.csv").write_text("a,b,parody,2010-01\n")
    assert main(["analyze", "--config", str(golden), "--out", str(tmp_path)]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 2


def test_module_entry_point(golden, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "borrowimpact.cli", "analyze", "--config",
                           str(golden), "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
