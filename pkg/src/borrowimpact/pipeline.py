"""End-to-end analysis of a borrowing catalogue.

For every edge: link both songs to MIDs, load their series, cut the
24-month window around the borrowee release, apply the drop rules, then
run the discontinuity fit and the Granger test. Reports are written as
line-delimited JSON in input order, whatever the worker count.
"""

from __future__ import annotations

import configparser
import csv
import enum
import json
import logging
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .catalog import (DEFAULT_ALLOWED_CLASSES, SIMILARITY_THRESHOLD, BorrowingEdge,
                      BorrowingKind, FixtureSource, MatchDecision, SongRecord, WikidataSource,
                      best_match, load_graph, load_songs, resolve_song)
from .errors import BorrowImpactError, ConfigError, WindowOutOfRange
from .granger import GrangerResult, LagTest, granger_test
from .rdd import RddFit, fit_rdd
from .series import (WINDOW_T, EventWindow, MonthKey, align_series, extract_window, is_all_zero,
                     normalize_peak)
from .trends import TrendsCache, TrendsStore

logger = logging.getLogger(__name__)

CACHE_ENV = "BORROWIMPACT_CACHE_DIR"
REPORTS_FILE = "reports.ldjson"
SUMMARY_FILE = "summary.json"
META_FILE = "run_meta.json"
HISTOGRAM_FILE = "ate_histogram.csv"
PLOT_DIR = "plots"
HIST_BIN_WIDTH = 0.25  # decades


class Disposition(str, enum.Enum):
    ANALYZED = "analyzed"
    DROPPED_ALL_ZERO = "dropped_all_zero"
    DROPPED_UNLINKED = "dropped_unlinked"
    DROPPED_WINDOW = "dropped_window"
    OUTLIER = "outlier"
    FAILED = "failed"


class GrangerMode(str, enum.Enum):
    WINDOWED = "windowed"
    FULL = "full"


# -- configuration ------------------------------------------------------------

@dataclass
class PipelineConfig:
    """Run configuration, usually read from an INI file's ``[pipeline]`` section.

    Relative paths, including the default ``out`` directory, are resolved
    against the config file's directory. The cache directory can be
    overridden with ``BORROWIMPACT_CACHE_DIR``.
    """

    edges: Path
    cache_dir: Path
    songs: Path | None = None
    fixture: Path | None = None
    endpoint: str | None = None
    links: Path | None = None
    csv_dir: Path | None = None
    out: Path = Path("out")
    alpha: float = 0.05
    max_lag: int = 10
    granger_mode: GrangerMode = GrangerMode.WINDOWED
    jobs: int = 1
    normalize: bool = True
    similarity_threshold: float = SIMILARITY_THRESHOLD
    allowed_classes: frozenset[str] = DEFAULT_ALLOWED_CLASSES
    requests_per_second: float = 5.0

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "PipelineConfig":
        path = Path(path)
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if "pipeline" not in parser:
            raise ConfigError(f"{path}: missing [pipeline] section")
        sec = parser["pipeline"]
        base = path.parent

        def p(key):
            value = sec.get(key, "").strip()
            return (base / value) if value else None

        try:
            kwargs = dict(
                edges=p("edges"), cache_dir=p("cache_dir"), songs=p("songs"),
                fixture=p("fixture"), endpoint=sec.get("endpoint") or None, links=p("links"),
                csv_dir=p("csv_dir"), out=p("out") or base / "out",
                alpha=sec.getfloat("alpha", 0.05), max_lag=sec.getint("max_lag", 10),
                granger_mode=GrangerMode(sec.get("granger_mode", "windowed")),
                jobs=sec.getint("jobs", 1), normalize=sec.getboolean("normalize", True),
                similarity_threshold=sec.getfloat("similarity_threshold", SIMILARITY_THRESHOLD),
                requests_per_second=sec.getfloat("requests_per_second", 5.0),
            )
            if sec.get("allowed_classes"):
                kwargs["allowed_classes"] = frozenset(
                    c.strip() for c in sec["allowed_classes"].split(",") if c.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if os.environ.get(CACHE_ENV):
            kwargs["cache_dir"] = Path(os.environ[CACHE_ENV])
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        if isinstance(kwargs["granger_mode"], str):
            kwargs["granger_mode"] = GrangerMode(kwargs["granger_mode"])
        if kwargs["edges"] is None or kwargs["cache_dir"] is None:
            raise ConfigError(f"{path}: 'edges' and 'cache_dir' are required")
        return cls(**kwargs)

    def validate(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_lag < 1 or self.jobs < 1:
            raise ConfigError("max_lag and jobs must be positive")
        if not self.edges.exists():
            raise ConfigError(f"edge file {self.edges} does not exist")
        if self.links is None and (self.songs is None or
                                   (self.fixture is None and self.endpoint is None)):
            raise ConfigError("need either 'links' or 'songs' plus 'fixture'/'endpoint'")


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class Link:
    song_id: str
    kb_id: str
    freebase_mid: str

    @classmethod
    def from_decision(cls, d: MatchDecision) -> "Link":
        return cls(d.song_id, d.kb_id, d.freebase_mid)


@dataclass(frozen=True)
class PairReport:
    edge: BorrowingEdge
    disposition: Disposition
    reason: str = ""
    borrowed_mid: str | None = None
    borrowee_mid: str | None = None
    window: EventWindow | None = None
    borrowee_window: EventWindow | None = None
    rdd: RddFit | None = None
    granger: GrangerResult | None = None
    months_trimmed: int = 0

    def to_dict(self) -> dict:
        return {
            "edge": self.edge.to_dict(),
            "disposition": self.disposition.value,
            "reason": self.reason,
            "borrowed_mid": self.borrowed_mid,
            "borrowee_mid": self.borrowee_mid,
            "window": _window_dict(self.window),
            "borrowee_window": _window_dict(self.borrowee_window),
            "rdd": self.rdd.to_dict() if self.rdd else None,
            "granger": self.granger.to_dict() if self.granger else None,
            "months_trimmed": self.months_trimmed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PairReport":
        e = d["edge"]
        edge = BorrowingEdge(e["borrowed_id"], e["borrowee_id"], BorrowingKind(e["kind"]),
                             MonthKey.parse(e["release"]))
        return cls(
            edge=edge, disposition=Disposition(d["disposition"]), reason=d.get("reason", ""),
            borrowed_mid=d.get("borrowed_mid"), borrowee_mid=d.get("borrowee_mid"),
            window=_window_from(d.get("window"), edge),
            borrowee_window=_window_from(d.get("borrowee_window"), edge),
            rdd=_rdd_from(d.get("rdd")), granger=_granger_from(d.get("granger")),
            months_trimmed=d.get("months_trimmed", 0),
        )


def _window_dict(w: EventWindow | None):
    return None if w is None else {"pre": list(w.pre), "post": list(w.post)}


def _window_from(d, edge: BorrowingEdge) -> EventWindow | None:
    if d is None:
        return None
    return EventWindow(edge.borrowed_id, edge.borrowee_id, edge.release, d["pre"], d["post"])


def _num(value, missing=math.nan) -> float:
    return missing if value is None else float(value)


def _rdd_from(d) -> RddFit | None:
    if d is None:
        return None
    d = dict(d)
    for key in ("ate_relative_pct", "p_value_jump", "se_jump", "f_stat_model", "p_value_model"):
        d[key] = _num(d.get(key), math.inf if key == "f_stat_model" else math.nan)
    t = d.get("t_jump")
    d["t_jump"] = math.copysign(math.inf, d["beta2_jump"]) if t is None else float(t)
    return RddFit(**d)


def _granger_from(d) -> GrangerResult | None:
    if d is None:
        return None
    d = dict(d)
    d["per_lag"] = tuple(LagTest(**{**e, "f_stat": _num(e["f_stat"], math.inf)})
                         for e in d["per_lag"])
    return GrangerResult(**d)


def _jsonable(obj):
    """Replace non-finite floats by ``null`` and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), ensure_ascii=False, allow_nan=False)


# -- summary ------------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    total_pairs: int
    analyzed: int
    dispositions: dict[str, int]
    rdd_significant_count: int
    granger_causal_count: int
    either_causal_count: int
    both_causal_count: int
    ate_histogram: dict = field(default_factory=dict)
    max_lag_capped_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "total_pairs": self.total_pairs,
            "analyzed": self.analyzed,
            "dispositions": self.dispositions,
            "rdd_significant_count": self.rdd_significant_count,
            "granger_causal_count": self.granger_causal_count,
            "either_causal_count": self.either_causal_count,
            "both_causal_count": self.both_causal_count,
            "ate_histogram": self.ate_histogram,
            "max_lag_capped_pairs": self.max_lag_capped_pairs,
        }


def histogram_values(reports: Iterable[PairReport]) -> list[tuple[PairReport, float]]:
    """Reports with a significant jump and a finite, non-zero relative ATE."""
    out = []
    for r in reports:
        if r.rdd is not None and r.rdd.significant and r.rdd.ate_defined and r.rdd.ate_relative_pct != 0:
            out.append((r, r.rdd.ate_relative_pct))
    return out


def ate_histogram(ates: Sequence[float]) -> dict:
    """Histogram of ``log10 |ATE %|`` with quarter-decade bins, split by sign."""
    if not ates:
        return {"log10_abs_edges": [], "counts": [], "positive": [], "negative": []}
    logs = np.log10(np.abs(np.asarray(ates, dtype=float)))
    lo = math.floor(logs.min() / HIST_BIN_WIDTH) * HIST_BIN_WIDTH
    hi = math.ceil(logs.max() / HIST_BIN_WIDTH) * HIST_BIN_WIDTH
    if hi <= lo:
        hi = lo + HIST_BIN_WIDTH
    nbins = int(round((hi - lo) / HIST_BIN_WIDTH))
    edges = lo + HIST_BIN_WIDTH * np.arange(nbins + 1)
    signs = np.sign(ates)
    counts = np.histogram(logs, edges)[0]
    pos = np.histogram(logs[signs > 0], edges)[0]
    neg = np.histogram(logs[signs < 0], edges)[0]
    return {"log10_abs_edges": [round(float(e), 10) for e in edges],
            "counts": counts.tolist(), "positive": pos.tolist(), "negative": neg.tolist()}


def summarize(reports: Sequence[PairReport]) -> RunSummary:
    counts = {d.value: 0 for d in Disposition}
    for r in reports:
        counts[r.disposition.value] += 1
    analyzed = [r for r in reports if r.disposition is Disposition.ANALYZED]
    rdd_sig = {id(r) for r in analyzed if r.rdd.significant}
    granger = {id(r) for r in analyzed if r.granger.causal}
    summary = RunSummary(
        total_pairs=len(reports),
        analyzed=counts[Disposition.ANALYZED.value],
        dispositions=counts,
        rdd_significant_count=len(rdd_sig),
        granger_causal_count=len(granger),
        either_causal_count=len(rdd_sig | granger),
        both_causal_count=len(rdd_sig & granger),
        ate_histogram=ate_histogram([a for _, a in histogram_values(reports)]),
        max_lag_capped_pairs=sum(1 for r in reports if r.granger is not None
                                 and r.granger.max_lag_used < r.granger.max_lag_requested),
    )
    assert summary.total_pairs == sum(counts.values())
    return summary


# -- linking ------------------------------------------------------------------

def entity_source(config: PipelineConfig):
    if config.fixture is not None:
        return FixtureSource(config.fixture)
    return WikidataSource(config.endpoint, requests_per_second=config.requests_per_second)


def link_songs(song_ids: Iterable[str], songs: Mapping[str, SongRecord], source, *,
               allowed_classes=DEFAULT_ALLOWED_CLASSES, threshold=SIMILARITY_THRESHOLD,
               jobs: int = 1) -> dict[str, list[MatchDecision]]:
    """Resolve each song id; ids missing from ``songs`` map to no decisions."""
    ids = sorted(set(song_ids))

    def one(song_id):
        song = songs.get(song_id)
        if song is None:
            return []
        return resolve_song(song, source, allowed_classes=allowed_classes, threshold=threshold)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return dict(zip(ids, pool.map(one, ids)))


def links_document(decisions: Mapping[str, list[MatchDecision]]) -> dict:
    doc = {}
    for song_id in sorted(decisions):
        best = best_match(decisions[song_id])
        doc[song_id] = {"match": best.to_dict() if best else None,
                        "decisions": [d.to_dict() for d in decisions[song_id]]}
    return doc


def links_from_document(doc: Mapping) -> dict[str, Link]:
    out = {}
    for song_id, entry in doc.items():
        m = entry.get("match")
        if m and m.get("freebase_mid"):
            out[song_id] = Link(song_id, m["kb_id"], m["freebase_mid"])
    return out


def load_links(config: PipelineConfig, song_ids: Iterable[str]) -> dict[str, Link]:
    if config.links is not None:
        try:
            doc = json.loads(Path(config.links).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read links {config.links}: {exc}") from exc
        return links_from_document(doc)
    songs = load_songs(config.songs)
    decisions = link_songs(song_ids, songs, entity_source(config),
                           allowed_classes=config.allowed_classes,
                           threshold=config.similarity_threshold, jobs=config.jobs)
    return links_from_document(links_document(decisions))


# -- per-pair analysis --------------------------------------------------------

def analyze_pair(edge: BorrowingEdge, links: Mapping[str, Link], store: TrendsStore,
                 config: PipelineConfig) -> PairReport:
    """Apply the drop rules in order, then fit both models."""
    report = PairReport(edge, Disposition.DROPPED_UNLINKED)
    unlinked = [s for s in (edge.borrowed_id, edge.borrowee_id) if s not in links]
    if unlinked:
        return replace(report, reason=f"no entity match for {', '.join(unlinked)}")
    mids = links[edge.borrowed_id].freebase_mid, links[edge.borrowee_id].freebase_mid
    report = replace(report, borrowed_mid=mids[0], borrowee_mid=mids[1])

    series = []
    for song_id, mid in zip((edge.borrowed_id, edge.borrowee_id), mids):
        record = store.get(mid)
        if record is None:
            return replace(report, reason=f"no search-interest series for {song_id} ({mid})")
        s = record.series
        s = type(s)(song_id, s.start, s.values)
        series.append(normalize_peak(s) if config.normalize else s)
    borrowed, borrowee = series

    try:
        window = extract_window(borrowed, edge.release, edge.borrowee_id)
        borrowee_window = extract_window(borrowee, edge.release, edge.borrowee_id)
    except WindowOutOfRange as exc:
        return replace(report, disposition=Disposition.DROPPED_WINDOW, reason=str(exc))
    report = replace(report, window=window, borrowee_window=borrowee_window)

    if is_all_zero(window):
        return replace(report, disposition=Disposition.DROPPED_ALL_ZERO,
                       reason="borrowed series is zero throughout the window")

    try:
        rdd = fit_rdd(window, alpha=config.alpha)
        report = replace(report, rdd=rdd)
        trimmed = 0
        if config.granger_mode is GrangerMode.FULL:
            target, predictor, trimmed = align_series(borrowed, borrowee)
            if trimmed:
                logger.info("%s -> %s: %d month(s) trimmed to align series",
                            edge.borrowed_id, edge.borrowee_id, trimmed)
            target, predictor = target.to_numpy(), predictor.to_numpy()
        else:
            target, predictor = window.values, borrowee_window.values
        granger = granger_test(target, predictor, max_lag=config.max_lag, alpha=config.alpha)
    except BorrowImpactError as exc:
        return replace(report, disposition=Disposition.FAILED,
                       reason=f"{type(exc).__name__}: {exc}")
    report = replace(report, granger=granger, months_trimmed=trimmed)
    if rdd.outlier:
        return replace(report, disposition=Disposition.OUTLIER,
                       reason="no pre-release search activity" if not any(window.pre)
                       else "pre-release intercept is zero")
    return replace(report, disposition=Disposition.ANALYZED)


@dataclass
class RunResult:
    reports: list[PairReport]
    summary: RunSummary

    @property
    def exit_code(self) -> int:
        return 2 if self.summary.dispositions[Disposition.FAILED.value] else 0


def run_pipeline(config: PipelineConfig, out_dir: str | Path | None = None) -> RunResult:
    """Analyse every edge and write reports, summary and run metadata.

    Outputs go to ``out_dir``, or ``config.out`` when it is not given;
    nothing is written if both are ``None``. Timestamps only appear in the
    metadata file so the reports themselves are reproducible byte for byte.
    """
    config.validate()
    started = datetime.now(timezone.utc)
    graph = load_graph(config.edges)
    edges = graph.edges
    links = load_links(config, graph.nodes)
    store = TrendsStore(TrendsCache(config.cache_dir), config.csv_dir)

    def one(edge):
        return analyze_pair(edge, links, store, config)

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        reports = list(pool.map(one, edges))
    summary = summarize(reports)
    result = RunResult(reports, summary)

    out_dir = Path(out_dir) if out_dir is not None else config.out
    if out_dir is not None:
        write_outputs(result, out_dir)
        meta = {
            "started_at": started.isoformat(),
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "python": platform.python_version(),
            "jobs": config.jobs,
            "duplicate_edges": graph.duplicates,
            "config": {k: str(v) if isinstance(v, Path) else v
                       for k, v in vars(config).items() if k != "allowed_classes"},
            "allowed_classes": sorted(config.allowed_classes),
        }
        (out_dir / META_FILE).write_text(dumps(meta) + "\n", encoding="utf-8")
    return result


def write_outputs(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / REPORTS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for r in result.reports:
            fh.write(dumps(r.to_dict()) + "\n")
    (out_dir / SUMMARY_FILE).write_text(
        json.dumps(_jsonable(result.summary.to_dict()), indent=2, allow_nan=False) + "\n",
        encoding="utf-8")


def read_reports(path: str | Path) -> list[PairReport]:
    with open(path, encoding="utf-8") as fh:
        return [PairReport.from_dict(json.loads(line)) for line in fh if line.strip()]


# -- plot data ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def plot_filename(index: int, report: PairReport) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_"
                   for c in f"{report.edge.borrowed_id}__{report.edge.borrowee_id}")
    return f"pair_{index:04d}_{safe}.csv"


def emit_plot_data(reports: Sequence[PairReport], out_dir: str | Path) -> list[Path]:
    """Write overlay CSVs for fitted pairs and the ATE histogram CSV.

    Overlay files have columns ``t, observed, fitted_pre, fitted_post``;
    both fitted lines are evaluated on all 24 points so the pre-release
    trend doubles as the counterfactual after the release.
    """
    out_dir = Path(out_dir)
    try:
        (out_dir / PLOT_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write plot data to {out_dir}: {exc}") from exc
    written = []
    for i, r in enumerate(reports):
        if r.rdd is None or r.window is None:
            continue
        b0, b1, b2, b3 = r.rdd.coefficients
        path = out_dir / PLOT_DIR / plot_filename(i, r)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "observed", "fitted_pre", "fitted_post"])
            for t, y in zip(WINDOW_T, r.window.values):
                w.writerow([int(t), _fmt(y), _fmt(b0 + b1 * t), _fmt(b0 + b2 + (b1 + b3) * t)])
        written.append(path)

    path = out_dir / HISTOGRAM_FILE
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["borrowed_id", "borrowee_id", "disposition", "ate_relative_pct", "sign",
                    "log10_abs_ate"])
        for r, ate in histogram_values(reports):
            w.writerow([r.edge.borrowed_id, r.edge.borrowee_id, r.disposition.value, _fmt(ate),
                        1 if ate > 0 else -1, _fmt(math.log10(abs(ate)))])
    written.append(path)
    return written
