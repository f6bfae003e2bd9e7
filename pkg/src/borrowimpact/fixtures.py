"""The bundled five-pair demo dataset.

Everything is generated from fixed seeds, so ``build_golden_dataset``
reproduces the files shipped in ``borrowimpact/data/golden`` exactly.

Pairs, in edge-file order:

1. ``shots <- somebody``: the original is flat, then tracks the borrowee
   with a one-month lag after the release (a renewed-interest shape).
2. ``spin <- rightround``: a planted step with jump / intercept = 2.
3. ``closetome <- sohuman``: no effect at all.
4. ``quiet <- quietremix``: the original has no search interest.
5. ``ittakestwo <- peaches``: the original has no acceptable entity match.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .series import MonthKey, MonthlySeries, normalize_peak
from .synth import RddScenario, rdd_curve, standard_normals
from .trends import TrendsCache, TrendsRecord

FIRST_MONTH = MonthKey(2004, 1)
N_MONTHS = 192  # 2004-01 .. 2019-12
FETCHED_AT = datetime(2019, 6, 1, tzinfo=timezone.utc)
STEP_SCENARIO = RddScenario((20.0, 0.0, 40.0, 0.0), noise_sigma=0.3, seed=2009)

SONGS = [
    # song_id, title, artist, kb_id, mid
    ("shots", "Shots", "LMFAO", "Q900101", "/m/0fx0shots"),
    ("somebody", "Somebody", "Natalie La Rose", "Q900102", "/m/0fx0somebody"),
    ("spin", "You Spin Me Round (Like a Record)", "Dead or Alive", "Q900201", "/m/0fx0spin"),
    ("rightround", "Right Round", "Flo Rida", "Q900202", "/m/0fx0rightround"),
    ("closetome", "Close to Me", "The Cure", "Q900301", "/m/0fx0closetome"),
    ("sohuman", "So Human", "Lady Sovereign", "Q900302", "/m/0fx0sohuman"),
    ("quiet", "Quiet Hours", "The Lanterns", "Q900401", "/m/0fx0quiet"),
    ("quietremix", "Quiet Hours (Night Remix)", "DJ Fennel", "Q900402", "/m/0fx0quietremix"),
    ("ittakestwo", "It Takes Two", "Rob Base and DJ E-Z Rock", None, None),
    ("peaches", "Peaches N Cream", "Snoop Dogg", "Q900502", "/m/0fx0peaches"),
    ("clube", "Clube da Esquina vol. 2", "Milton Nascimento", "Q20053386", "/m/0zjw3z_"),
]

EDGES = [
    ("shots", "somebody", "sample", "2014-12"),
    ("spin", "rightround", "sample", "2009-02"),
    ("closetome", "sohuman", "sample", "2009-06"),
    ("quiet", "quietremix", "remix", "2016-05"),
    ("ittakestwo", "peaches", "sample", "2015-05"),
]

CONFIG = """\
[pipeline]
edges = edges.csv
songs = songs.csv
fixture = entities.json
cache_dir = cache
alpha = 0.05
max_lag = 10
granger_mode = windowed
jobs = 1
normalize = true
"""


def golden_dir() -> Path:
    return Path(str(resources.files("borrowimpact") / "data" / "golden"))


def _entities() -> dict:
    search: dict[str, list[str]] = {}
    entities: dict[str, dict] = {}
    for song_id, title, artist, kb_id, mid in SONGS:
        if kb_id is None:
            continue
        entities[kb_id] = {"label": title, "artist_label": artist, "class_ids": ["Q7366"],
                           "freebase_mid": mid}
        search.setdefault(title, []).append(kb_id)
        search.setdefault(f"{title} {artist}", []).append(kb_id)

    # distractors: a performer entity, a same-title song by someone else,
    # and a work without a Freebase id
    entities["Q900900"] = {"label": "LMFAO", "artist_label": None, "class_ids": ["Q215380"],
                           "freebase_mid": "/m/0fx0lmfao"}
    entities["Q900901"] = {"label": "Shots", "artist_label": "Imagine Dragons",
                           "class_ids": ["Q7366"], "freebase_mid": "/m/0fx0shotsid"}
    entities["Q900902"] = {"label": "It Takes Two", "artist_label": "Katy Perry",
                           "class_ids": ["Q7366"], "freebase_mid": "/m/0fx0ittakes2kp"}
    entities["Q900903"] = {"label": "It Takes Two", "artist_label": "Rob Base & DJ E-Z Rock",
                           "class_ids": ["Q7366"], "freebase_mid": None}
    entities["Q900904"] = {"label": "Milton Nascimento", "artist_label": None,
                           "class_ids": ["Q5"], "freebase_mid": "/m/0fx0milton"}
    search["LMFAO"] = ["Q900900"]
    search["Shots"] = ["Q900901", *search["Shots"]]
    search["It Takes Two"] = ["Q900902", "Q900903"]
    search["It Takes Two Rob Base and DJ E-Z Rock"] = ["Q900903", "Q900902"]
    search["Milton Nascimento"] = ["Q900904", "Q20053386"]
    return {"search_results": dict(sorted(search.items())),
            "entities": dict(sorted(entities.items()))}


def _noise(seed: int, stream: int = 0) -> np.ndarray:
    return standard_normals(seed, N_MONTHS, stream)


def _index(month: str) -> int:
    return MonthKey.parse(month) - FIRST_MONTH


def _series() -> dict[str, np.ndarray]:
    t = np.arange(N_MONTHS)
    out = {}

    # 1. original hit in 2009, long tail, then revived by the borrowee
    r = _index("2014-12")
    borrowee = np.where(t > r, np.maximum(50 + 8 * _noise(11), 5.0), 0.0)
    hit = 80 * np.exp(-0.5 * ((t - _index("2009-09")) / 6.0) ** 2)
    borrowed = 8 + hit + 1.5 * _noise(12)
    borrowed[1:] += 0.6 * borrowee[:-1]
    out["somebody"], out["shots"] = borrowee, borrowed

    # 2. planted step: 20 before, 60 after
    r = _index("2009-02")
    rel = (t - r).astype(float)
    out["spin"] = rdd_curve(STEP_SCENARIO.beta, rel) + STEP_SCENARIO.noise_sigma * _noise(STEP_SCENARIO.seed)
    out["rightround"] = np.where(t > r, 70 + 15 * _noise(22), 0.0)

    # 3. unaffected original
    r = _index("2009-06")
    out["closetome"] = 30 + 3 * _noise(33)
    out["sohuman"] = np.where(t > r, 40 + 10 * _noise(32), 0.0)

    # 4. no interest at all in the original
    r = _index("2016-05")
    out["quiet"] = np.zeros(N_MONTHS)
    out["quietremix"] = np.where(t > r, 20 + 5 * _noise(42), 0.0)

    # 5. only the borrowee has a usable entity
    r = _index("2015-05")
    out["peaches"] = np.where(t > r, 35 + 8 * _noise(52), 0.0)
    out["clube"] = 10 + 2 * _noise(62)
    return out


def trends_records() -> list[TrendsRecord]:
    """Peak-normalised integer series, as a Trends export would deliver them."""
    mids = {song_id: mid for song_id, _, _, _, mid in SONGS if mid}
    records = []
    for song_id, values in _series().items():
        values = np.clip(values, 0.0, None)
        s = normalize_peak(MonthlySeries(mids[song_id], FIRST_MONTH, values))
        ints = [int(v) for v in np.clip(np.rint(s.values), 0, 100)]
        records.append(TrendsRecord(mids[song_id], MonthlySeries(mids[song_id], FIRST_MONTH, ints),
                                    FETCHED_AT))
    return records


def build_golden_dataset(out_dir: str | Path) -> Path:
    """Write config, edge, song, entity and cache files under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(CONFIG, encoding="utf-8")
    edge_lines = ["# borrowed_id,borrowee_id,kind,release"]
    edge_lines += [",".join(e) for e in EDGES]
    (out_dir / "edges.csv").write_text("\n".join(edge_lines) + "\n", encoding="utf-8")
    song_lines = ["song_id\ttitle\tartist"]
    song_lines += [f"{s}\t{title}\t{artist}" for s, title, artist, _, _ in SONGS]
    (out_dir / "songs.csv").write_text("\n".join(song_lines) + "\n", encoding="utf-8")
    (out_dir / "entities.json").write_text(
        json.dumps(_entities(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    cache = TrendsCache(out_dir / "cache")
    for record in trends_records():
        cache.put(record)
    return out_dir / "config.ini"
