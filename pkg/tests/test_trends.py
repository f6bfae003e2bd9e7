import json
import os
from datetime import datetime, timezone
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from borrowimpact.errors import CacheCorrupt, GapError, OrderError, ParseError, RangeError
from borrowimpact.series import MonthKey, MonthlySeries
from borrowimpact.trends import (TrendsCache, TrendsRecord, TrendsStore, cache_filename,
                                 is_valid_mid, parse_trends_csv, serialize_trends_csv)

DATA = Path(__file__).parent / "data"
MID = "/m/0zjw3z_"
WHEN = datetime(2019, 6, 1, tzinfo=timezone.utc)


def export(*rows, preamble="Category: All categories\n\n"):
    body = "\n".join(f"{m},{v}" for m, v in rows)
    return f"{preamble}Month,Song: (Worldwide)\n{body}\n".encode()


def record(values, start=MonthKey(2004, 1), mid=MID, when=WHEN):
    return TrendsRecord(mid, MonthlySeries(mid, start, values), when)


def test_simple_export():
    r = parse_trends_csv(export(("2004-01", 0), ("2004-02", 50), ("2004-03", 100)), MID, WHEN)
    assert r.series.start == MonthKey(2004, 1)
    assert r.series.values == (0, 50, 100)
    assert r.mid == MID and r.fetched_at == WHEN


def test_below_one_cells_from_real_export():
    r = parse_trends_csv((DATA / "multiTimeline_shots.csv").read_bytes(), "/m/0fx0shots")
    assert r.series.values[:6] == (0, 0, 0, 1, 0, 3)
    assert max(r.series.values) == 100


def test_gap_is_named():
    with pytest.raises(GapError, match="2004-02") as info:
        parse_trends_csv(export(("2004-01", 5), ("2004-03", 7)), MID)
    assert info.value.line == 5


def test_long_gap_names_the_span():
    with pytest.raises(GapError, match="2004-02..2004-05"):
        parse_trends_csv(export(("2004-01", 5), ("2004-06", 7)), MID)


@pytest.mark.parametrize("rows", [
    (("2004-02", 1), ("2004-01", 2)),
    (("2004-02", 1), ("2004-02", 2)),
])
def test_non_monotone_months(rows):
    with pytest.raises(OrderError):
        parse_trends_csv(export(*rows), MID)


@pytest.mark.parametrize("value", ["101", "-1"])
def test_out_of_range(value):
    with pytest.raises(RangeError):
        parse_trends_csv(export(("2004-01", 1), ("2004-02", value)), MID)


@pytest.mark.parametrize("data", [
    b"no header here\n2004-01,5\n",
    export(),
    export(("2004-01", "abc")),
    export(("2004-01", "2.5")),
    export(("Jan 2004", 3)),
])
def test_malformed(data):
    with pytest.raises(ParseError):
        parse_trends_csv(data, MID)


def test_bom_and_blank_lines_tolerated():
    data = b"\xef\xbb\xbf" + export(("2010-11", 4), ("2010-12", 9)) + b"\n\n"
    assert parse_trends_csv(data, MID).series.values == (4, 9)


def test_mid_grammar():
    assert is_valid_mid("/m/0zjw3z_") and is_valid_mid("/g/11b6z2")
    for bad in ("m/0abc", "/x/0abc", "/m/", "/m/ABC", "Q20053386"):
        assert not is_valid_mid(bad)
    with pytest.raises(ValueError):
        record([1, 2], mid="Q20053386")


def test_record_rejects_fractional_values():
    with pytest.raises(ValueError):
        record([1.5])
    with pytest.raises(ValueError):
        record([101])


values = st.lists(st.integers(0, 100), min_size=1, max_size=60)
starts = st.builds(MonthKey, st.integers(2004, 2020), st.integers(1, 12))


@settings(max_examples=150, deadline=None)
@given(values, starts)
def test_serialize_parse_fixed_point(vals, start):
    once = parse_trends_csv(serialize_trends_csv(record(vals, start)), MID, WHEN)
    assert once == record(vals, start)
    assert serialize_trends_csv(once) == serialize_trends_csv(record(vals, start))


# -- cache ----------------------------------------------------------------------

def test_cache_round_trip(tmp_path):
    cache = TrendsCache(tmp_path)
    r = record([0, 3, 100, 7])
    path = cache.put(r)
    assert path.name == "%2Fm%2F0zjw3z_.json" == cache_filename(MID)
    assert cache.get(MID) == r
    doc = json.loads(path.read_text())
    assert doc == {"mid": MID, "start": "2004-01", "values": [0, 3, 100, 7],
                   "fetched_at": "2019-06-01T00:00:00+00:00"}


def test_unknown_mid(tmp_path):
    assert TrendsCache(tmp_path).get("/m/0nothing") is None
    assert TrendsCache(tmp_path / "not-created-yet").get(MID) is None


def test_latest_put_wins_and_previous_is_archived(tmp_path):
    cache = TrendsCache(tmp_path)
    first, second, third = record([1]), record([2]), record([3])
    for r in (first, second, third):
        cache.put(r)
    assert cache.get(MID) == third
    archived = cache.archived(MID)
    assert [json.loads(p.read_text())["values"] for p in archived] == [[1], [2]]


@pytest.mark.parametrize("content", [b"{not json", b'{"mid": "/m/0zjw3z_"}', b"\xff\xfe",
                                     b'{"mid": "/m/0other", "start": "2004-01", "values": [1],'
                                     b' "fetched_at": "2019-06-01T00:00:00+00:00"}'])
def test_corrupt_entry_is_evicted(tmp_path, content, caplog):
    cache = TrendsCache(tmp_path)
    cache.path_for(MID).write_bytes(content)
    with pytest.raises(CacheCorrupt):
        cache.get(MID)
    assert not cache.path_for(MID).exists()
    assert (tmp_path / "corrupt" / cache_filename(MID)).read_bytes() == content
    assert "evicted" in caplog.text
    assert cache.get(MID) is None


def test_crashed_put_leaves_previous_entry(tmp_path, monkeypatch):
    cache = TrendsCache(tmp_path)
    old = record([10, 20])
    cache.put(old)

    def boom(fd):
        raise OSError("disk full")

    monkeypatch.setattr(os, "fsync", boom)
    with pytest.raises(OSError):
        cache.put(record([30, 40]))
    assert cache.get(MID) == old
    assert sorted(p.name for p in tmp_path.iterdir() if p.is_file()) == [cache_filename(MID)]


def test_store_reads_through_to_csv(tmp_path):
    csv_dir = tmp_path / "exports"
    csv_dir.mkdir()
    (csv_dir / "%2Fm%2F0zjw3z_.csv").write_bytes(export(("2009-01", 4), ("2009-02", 8)))
    cache = TrendsCache(tmp_path / "cache")
    store = TrendsStore(cache, csv_dir)
    r = store.get(MID)
    assert r.series.values == (4, 8)
    assert cache.get(MID) == r
    assert store.get("/m/0absent") is None


def test_store_uses_fetcher_last(tmp_path):
    calls = []

    def fetch(mid):
        calls.append(mid)
        return record([5], mid=mid)

    store = TrendsStore(TrendsCache(tmp_path), fetcher=fetch)
    assert store.get(MID).series.values == (5,)
    assert store.get(MID).series.values == (5,)
    assert calls == [MID]


def test_store_recovers_from_corrupt_cache(tmp_path):
    cache = TrendsCache(tmp_path)
    cache.path_for(MID).write_text("garbage")
    store = TrendsStore(cache, fetcher=lambda mid: record([9], mid=mid))
    assert store.get(MID).series.values == (9,)
