"""Command line entry point.

    borrowimpact link     --config run.ini [--out DIR]
    borrowimpact analyze  --config run.ini [--alpha A] [--max-lag L]
                          [--granger-mode windowed|full] [--jobs N] [--out DIR]
    borrowimpact report   --out DIR [--reports FILE]
    borrowimpact synth    golden --out DIR
    borrowimpact synth    scenarios FILE --out DIR

The cache directory named in the config can be overridden with the
BORROWIMPACT_CACHE_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .catalog import load_graph, load_songs
from .errors import BorrowImpactError, ConfigError
from .fixtures import build_golden_dataset
from .pipeline import (REPORTS_FILE, SUMMARY_FILE, PipelineConfig, emit_plot_data,
                       entity_source, link_songs, links_document, read_reports, run_pipeline,
                       summarize)
from .series import WINDOW_T
from .synth import GrangerScenario, gen_granger_pair, gen_rdd_window, load_scenarios

logger = logging.getLogger("borrowimpact")


def _config(args) -> PipelineConfig:
    return PipelineConfig.from_file(
        args.config, alpha=getattr(args, "alpha", None), max_lag=getattr(args, "max_lag", None),
        granger_mode=getattr(args, "granger_mode", None), jobs=args.jobs,
        out=Path(args.out) if args.out else None)


def cmd_link(args) -> int:
    config = _config(args)
    if config.songs is None or (config.fixture is None and config.endpoint is None):
        raise ConfigError("linking needs 'songs' and a 'fixture' or 'endpoint'")
    graph = load_graph(config.edges)
    decisions = link_songs(graph.nodes, load_songs(config.songs), entity_source(config),
                           allowed_classes=config.allowed_classes,
                           threshold=config.similarity_threshold, jobs=config.jobs)
    doc = links_document(decisions)
    config.out.mkdir(parents=True, exist_ok=True)
    path = config.out / "links.json"
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    linked = sum(1 for v in doc.values() if v["match"])
    print(f"linked {linked}/{len(doc)} songs -> {path}")
    return 0


def cmd_analyze(args) -> int:
    config = _config(args)
    result = run_pipeline(config)
    emit_plot_data(result.reports, config.out)
    s = result.summary
    print(f"{s.total_pairs} pairs: {s.analyzed} analyzed, "
          f"{s.rdd_significant_count} RDD-significant, {s.granger_causal_count} Granger-causal, "
          f"{s.either_causal_count} either -> {config.out}")
    return result.exit_code


def cmd_report(args) -> int:
    out = Path(args.out)
    reports = read_reports(Path(args.reports) if args.reports else out / REPORTS_FILE)
    summary = summarize(reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / SUMMARY_FILE).write_text(json.dumps(summary.to_dict(), indent=2) + "\n",
                                    encoding="utf-8")
    written = emit_plot_data(reports, out)
    print(f"wrote {len(written)} plot-data file(s) to {out}")
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.what == "golden":
        print(build_golden_dataset(out))
        return 0
    if not args.file:
        raise ConfigError("'synth scenarios' needs a scenario file")
    out.mkdir(parents=True, exist_ok=True)
    for name, scenario in load_scenarios(args.file).items():
        path = out / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if isinstance(scenario, GrangerScenario):
                target, predictor = gen_granger_pair(scenario)
                w.writerow(["index", "target", "predictor"])
                w.writerows([i, repr(float(a)), repr(float(b))]
                            for i, (a, b) in enumerate(zip(target, predictor)))
            else:
                window = gen_rdd_window(scenario, borrowed_id=name)
                w.writerow(["t", "value"])
                w.writerows([int(t), repr(float(v))] for t, v in zip(WINDOW_T, window.values))
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="borrowimpact", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, analysis=False):
        p.add_argument("--config", required=True, help="INI file with a [pipeline] section")
        p.add_argument("--jobs", type=int, help="worker threads")
        p.add_argument("--out", help="output directory")
        if analysis:
            p.add_argument("--alpha", type=float)
            p.add_argument("--max-lag", type=int, dest="max_lag")
            p.add_argument("--granger-mode", choices=["windowed", "full"], dest="granger_mode")

    common(sub.add_parser("link", help="resolve songs to knowledge-base entities"))
    p = sub.add_parser("analyze", help="run RDD and Granger on every borrowing")
    common(p, analysis=True)
    p.set_defaults(func=cmd_analyze)
    sub.choices["link"].set_defaults(func=cmd_link)

    p = sub.add_parser("report", help="summary and plot data from a reports file")
    p.add_argument("--out", required=True)
    p.add_argument("--reports")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate synthetic data")
    p.add_argument("what", choices=["golden", "scenarios"])
    p.add_argument("file", nargs="?", help="scenario INI file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BorrowImpactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
