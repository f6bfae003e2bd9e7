"""Causal impact of musical borrowings on search interest in the original song."""

__version__ = "0.1.0"

from .catalog import (BorrowingEdge, BorrowingGraph, BorrowingKind, EntityCandidate,
                      FixtureSource, MatchDecision, SongRecord, WikidataSource, load_graph,
                      resolve_song, string_similarity)
from .granger import GrangerCausality, GrangerResult, granger_test
from .rdd import RddFit, RegressionDiscontinuity, fit_rdd
from .series import (EventWindow, MonthKey, MonthlySeries, extract_window, has_zero_baseline,
                     is_all_zero, normalize_peak)
from .stats import OlsFit, f_sf, ols_fit, t_sf_two_sided
from .synth import GrangerScenario, RddScenario, gen_granger_pair, gen_rdd_window
from .trends import TrendsCache, TrendsRecord, parse_trends_csv

__all__ = [
    "BorrowingEdge", "BorrowingGraph", "BorrowingKind", "EntityCandidate", "EventWindow",
    "FixtureSource", "GrangerCausality", "GrangerResult", "GrangerScenario", "MatchDecision",
    "MonthKey", "MonthlySeries", "OlsFit", "RddFit", "RddScenario", "RegressionDiscontinuity",
    "SongRecord", "TrendsCache", "TrendsRecord", "WikidataSource", "extract_window", "f_sf",
    "fit_rdd", "gen_granger_pair", "gen_rdd_window", "granger_test", "has_zero_baseline",
    "is_all_zero", "load_graph", "normalize_peak", "ols_fit", "parse_trends_csv",
    "resolve_song", "string_similarity", "t_sf_two_sided",
]
