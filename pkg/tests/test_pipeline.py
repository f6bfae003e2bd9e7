import csv
import json
import math
import shutil

import numpy as np
import pytest

from borrowimpact.errors import ConfigError
from borrowimpact.fixtures import STEP_SCENARIO, build_golden_dataset, golden_dir
from borrowimpact.pipeline import (CACHE_ENV, Disposition, GrangerMode, PairReport,
                                   PipelineConfig, ate_histogram, emit_plot_data, read_reports,
                                   run_pipeline, summarize)
from borrowimpact.series import MonthKey, MonthlySeries
from borrowimpact.trends import TrendsCache, TrendsRecord


def by_pair(result):
    return {r.edge.borrowed_id: r for r in result.reports}


# -- golden dataset --------------------------------------------------------------

def test_golden_dispositions(golden):
    result = run_pipeline(PipelineConfig.from_file(golden), golden.parent / "out")
    s = result.summary
    assert s.total_pairs == 5 and s.analyzed == 3
    assert s.dispositions["dropped_all_zero"] == 1 and s.dispositions["dropped_unlinked"] == 1
    assert s.total_pairs == sum(s.dispositions.values())
    assert result.exit_code == 0
    pairs = by_pair(result)
    assert pairs["quiet"].disposition is Disposition.DROPPED_ALL_ZERO
    assert pairs["ittakestwo"].disposition is Disposition.DROPPED_UNLINKED
    assert "ittakestwo" in pairs["ittakestwo"].reason
    for r in result.reports:
        if r.disposition is Disposition.ANALYZED:
            assert r.rdd is not None and r.granger is not None


def test_planted_step_pair(golden):
    spin = by_pair(run_pipeline(PipelineConfig.from_file(golden), None))["spin"]
    beta = STEP_SCENARIO.beta
    assert beta[2] / beta[0] == 2 and STEP_SCENARIO.noise_sigma == 0.3
    assert spin.rdd.significant
    assert 150 <= spin.rdd.ate_relative_pct <= 250


def test_renewed_interest_pair(golden):
    shots = by_pair(run_pipeline(PipelineConfig.from_file(golden), None))["shots"]
    assert shots.rdd.significant and shots.rdd.ate_relative_pct > 0
    assert shots.granger.causal
    # 24 points cap the lag at 7
    assert shots.granger.max_lag_used == 7
    assert all(e.df2 >= 1 for e in shots.granger.per_lag)


def test_null_pair_is_null(golden):
    close = by_pair(run_pipeline(PipelineConfig.from_file(golden), None))["closetome"]
    assert not close.rdd.significant and not close.granger.causal


def test_summary_tallies(golden):
    s = run_pipeline(PipelineConfig.from_file(golden), None).summary
    assert (s.rdd_significant_count, s.granger_causal_count) == (2, 1)
    assert (s.either_causal_count, s.both_causal_count) == (2, 1)
    assert s.max_lag_capped_pairs == 3
    assert sum(s.ate_histogram["counts"]) == 2
    assert s.ate_histogram["negative"] == [0] * len(s.ate_histogram["counts"])


def test_reports_byte_identical_across_runs_and_workers(golden, tmp_path):
    outputs = []
    for jobs in (1, 4, 1, 4):
        out = tmp_path / f"out{len(outputs)}"
        run_pipeline(PipelineConfig.from_file(golden, jobs=jobs), out)
        outputs.append(((out / "reports.ldjson").read_bytes(), (out / "summary.json").read_bytes()))
    assert len(set(outputs)) == 1


def test_timestamps_only_in_metadata(golden, tmp_path):
    run_pipeline(PipelineConfig.from_file(golden), tmp_path)
    meta = json.loads((tmp_path / "run_meta.json").read_text())
    assert meta["started_at"] <= meta["finished_at"]
    assert "started_at" not in (tmp_path / "reports.ldjson").read_text()


def test_reports_round_trip(golden, tmp_path):
    result = run_pipeline(PipelineConfig.from_file(golden), tmp_path)
    back = read_reports(tmp_path / "reports.ldjson")
    assert [r.to_dict() for r in back] == json.loads(
        "[" + ",".join((tmp_path / "reports.ldjson").read_text().splitlines()) + "]")
    assert summarize(back) == result.summary


def test_full_granger_mode(golden):
    result = run_pipeline(PipelineConfig.from_file(golden, granger_mode="full"), None)
    shots = by_pair(result)["shots"]
    assert shots.granger.n_observations == 192
    assert shots.granger.max_lag_used == 10
    assert shots.granger.causal
    assert by_pair(result)["spin"].rdd == by_pair(run_pipeline(
        PipelineConfig.from_file(golden), None))["spin"].rdd


def test_cache_dir_from_environment(golden, tmp_path, monkeypatch):
    moved = tmp_path / "elsewhere"
    shutil.move(str(golden.parent / "cache"), moved)
    monkeypatch.setenv(CACHE_ENV, str(moved))
    config = PipelineConfig.from_file(golden)
    assert config.cache_dir == moved
    assert run_pipeline(config, None).summary.analyzed == 3


def test_shipped_golden_files_regenerate_identically(tmp_path):
    build_golden_dataset(tmp_path)
    shipped = golden_dir()
    names = sorted(p.relative_to(shipped).as_posix() for p in shipped.rglob("*") if p.is_file())
    fresh = sorted(p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*") if p.is_file())
    assert names == fresh
    for name in names:
        assert (shipped / name).read_bytes() == (tmp_path / name).read_bytes(), name


# -- hand-built datasets -----------------------------------------------------------

def write_dataset(root, series, edges, *, normalize=False, extra=""):
    """series: song_id -> (start, values); every song is pre-linked."""
    root.mkdir(parents=True, exist_ok=True)
    cache = TrendsCache(root / "cache")
    links = {}
    for i, (song_id, (start, values)) in enumerate(sorted(series.items())):
        mid = f"/m/0t{i:03d}"
        cache.put(TrendsRecord(mid, MonthlySeries(mid, MonthKey.parse(start), values)))
        links[song_id] = {"match": {"kb_id": f"Q{i + 1}", "freebase_mid": mid}}
    (root / "links.json").write_text(json.dumps(links))
    (root / "edges.csv").write_text("\n".join(",".join(e) for e in edges) + "\n")
    (root / "config.ini").write_text(
        "[pipeline]\nedges = edges.csv\nlinks = links.json\ncache_dir = cache\n"
        f"normalize = {str(normalize).lower()}\n{extra}")
    return root / "config.ini"


def test_step_pair_plot_columns(tmp_path, rng):
    # 25 months: the release month itself sits between the two halves
    borrowee = [0] * 12 + list(rng.integers(20, 80, 13))
    cfg = write_dataset(tmp_path / "d", {"a": ("2010-01", [10] * 12 + [99] + [30] * 12),
                                         "b": ("2010-01", borrowee)},
                        [("a", "b", "sample", "2011-01")])
    result = run_pipeline(PipelineConfig.from_file(cfg), None)
    (report,) = result.reports
    assert report.disposition is Disposition.ANALYZED
    assert report.rdd.ate_relative_pct == pytest.approx(200, abs=1e-9)

    written = emit_plot_data(result.reports, tmp_path / "plots")
    with open(written[0], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["t", "observed", "fitted_pre", "fitted_post"]
    assert len(rows) == 24 and "0" not in {r["t"] for r in rows}
    assert [int(r["t"]) for r in rows] == list(range(-12, 0)) + list(range(1, 13))
    assert all(float(r["fitted_pre"]) == pytest.approx(10, abs=1e-9) for r in rows)
    assert all(float(r["fitted_post"]) == pytest.approx(30, abs=1e-9) for r in rows)

    with open(written[-1], newline="") as fh:
        hist = list(csv.reader(fh))
    assert hist[0] == ["borrowed_id", "borrowee_id", "disposition", "ate_relative_pct", "sign",
                       "log10_abs_ate"]
    assert hist[1][:3] == ["a", "b", "analyzed"] and hist[1][4] == "1"
    assert float(hist[1][5]) == pytest.approx(math.log10(200))


def test_empty_report_set_gives_header_only_histogram(tmp_path):
    written = emit_plot_data([], tmp_path)
    assert len(written) == 1
    assert written[0].read_text() == \
        "borrowed_id,borrowee_id,disposition,ate_relative_pct,sign,log10_abs_ate\n"


def test_unwritable_plot_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_plot_data([], blocker)


def test_window_and_outlier_dispositions(tmp_path):
    flat = [5] * 40
    late = [0] * 24 + list(range(10, 26))
    cfg = write_dataset(tmp_path / "d", {
        "early": ("2010-01", flat), "cover": ("2010-01", flat),
        "silent": ("2010-01", late), "remix": ("2010-01", [3] * 40),
    }, [("early", "cover", "cover", "2010-06"), ("silent", "remix", "remix", "2012-01")])
    pairs = by_pair(run_pipeline(PipelineConfig.from_file(cfg), None))
    assert pairs["early"].disposition is Disposition.DROPPED_WINDOW
    assert "2009-06" in pairs["early"].reason
    out = pairs["silent"]
    assert out.disposition is Disposition.OUTLIER and out.rdd.outlier
    assert math.isnan(out.rdd.ate_relative_pct)
    assert out.granger is not None


def test_missing_series_counts_as_unlinked(tmp_path):
    cfg = write_dataset(tmp_path / "d", {"a": ("2010-01", [5] * 40)},
                        [("a", "b", "cover", "2011-01")])
    links = json.loads((tmp_path / "d" / "links.json").read_text())
    links["b"] = {"match": {"kb_id": "Q9", "freebase_mid": "/m/0nocache"}}
    (tmp_path / "d" / "links.json").write_text(json.dumps(links))
    (report,) = run_pipeline(PipelineConfig.from_file(cfg), None).reports
    assert report.disposition is Disposition.DROPPED_UNLINKED
    assert "/m/0nocache" in report.reason


def test_failing_pair_sets_exit_code(tmp_path):
    # a constant window on both sides: RDD fits, but the Granger target is constant
    cfg = write_dataset(tmp_path / "d", {"a": ("2010-01", [7] * 40), "b": ("2010-01", [7] * 40)},
                        [("a", "b", "cover", "2011-06")])
    result = run_pipeline(PipelineConfig.from_file(cfg), tmp_path / "out")
    (report,) = result.reports
    assert report.disposition is Disposition.FAILED
    assert "DegenerateTarget" in report.reason
    assert result.exit_code == 2
    assert (tmp_path / "out" / "reports.ldjson").exists()


def test_every_edge_reported_once_in_order(tmp_path, rng):
    songs = {f"s{i}": ("2008-01", list(rng.integers(1, 100, 60))) for i in range(12)}
    edges = [(f"s{i}", f"s{(i * 5 + 1) % 12}", "sample", f"2010-{m:02d}")
             for i, m in zip(range(12), range(1, 13)) if i != (i * 5 + 1) % 12]
    edges.append(("s0", "ghost", "cover", "2010-01"))
    cfg = write_dataset(tmp_path / "d", songs, edges)
    serial = run_pipeline(PipelineConfig.from_file(cfg, jobs=1), None)
    parallel = run_pipeline(PipelineConfig.from_file(cfg, jobs=6), None)
    assert [(r.edge.borrowed_id, r.edge.borrowee_id) for r in serial.reports] == \
        [(a, b) for a, b, _, _ in edges]
    assert [r.to_dict() for r in serial.reports] == [r.to_dict() for r in parallel.reports]
    s = serial.summary
    assert s.total_pairs == len(edges) == sum(s.dispositions.values())


# -- config ---------------------------------------------------------------------

def test_config_paths_relative_to_file(golden):
    cfg = PipelineConfig.from_file(golden)
    assert cfg.edges == golden.parent / "edges.csv"
    assert cfg.granger_mode is GrangerMode.WINDOWED and cfg.max_lag == 10


@pytest.mark.parametrize("text", [
    "not an ini file",
    "[other]\nedges = e.csv\n",
    "[pipeline]\ncache_dir = c\n",
    "[pipeline]\nedges = e.csv\ncache_dir = c\nalpha = lots\n",
    "[pipeline]\nedges = e.csv\ncache_dir = c\ngranger_mode = sometimes\n",
])
def test_bad_config(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(p)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(tmp_path / "absent.ini")


@pytest.mark.parametrize("override", [{"alpha": 1.5}, {"max_lag": 0}, {"jobs": 0}])
def test_config_validation(golden, override):
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig.from_file(golden, **override), None)


# -- histogram ---------------------------------------------------------------------

def test_histogram_bins_are_quarter_decades():
    h = ate_histogram([150.0, -150.0, 10.0, 1000.0])
    edges = np.array(h["log10_abs_edges"])
    assert np.allclose(np.diff(edges), 0.25)
    assert edges[0] <= 1.0 and edges[-1] >= 3.0
    assert sum(h["counts"]) == 4 and sum(h["positive"]) == 3 and sum(h["negative"]) == 1


def test_histogram_empty():
    assert ate_histogram([]) == {"log10_abs_edges": [], "counts": [], "positive": [],
                                 "negative": []}


def test_pair_report_non_finite_values_serialize_as_null(tmp_path):
    cfg = write_dataset(tmp_path / "d", {"a": ("2010-01", [0] * 24 + [9] * 16),
                                         "b": ("2010-01", [4] * 40)},
                        [("a", "b", "cover", "2012-01")])
    run_pipeline(PipelineConfig.from_file(cfg), tmp_path / "out")
    line = (tmp_path / "out" / "reports.ldjson").read_text()
    assert "NaN" not in line and "Infinity" not in line
    back = read_reports(tmp_path / "out" / "reports.ldjson")[0]
    assert isinstance(back, PairReport) and math.isnan(back.rdd.ate_relative_pct)
