"""Google-Trends-style monthly series: CSV exports and an on-disk cache.

Series are keyed by Freebase MID (``/m/...`` or ``/g/...``). The cache keeps
one JSON file per MID, named by the percent-encoded MID; replaced entries
are moved to ``archive/`` and unreadable ones to ``corrupt/``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
import tempfile
import urllib.parse
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .errors import CacheCorrupt, GapError, OrderError, ParseError, RangeError
from .series import MonthKey, MonthlySeries

logger = logging.getLogger(__name__)

MID_RE = re.compile(r"^/[mg]/[0-9a-z_]+$")
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def is_valid_mid(mid: str) -> bool:
    return bool(MID_RE.match(mid))


@dataclass(frozen=True)
class TrendsRecord:
    mid: str
    series: MonthlySeries
    fetched_at: datetime = _EPOCH

    def __post_init__(self):
        if not is_valid_mid(self.mid):
            raise ValueError(f"not a Freebase MID: {self.mid!r}")
        for v in self.series.values:
            if v != int(v) or not 0 <= v <= 100:
                raise ValueError(f"trends values must be integers in [0, 100], got {v}")


def _parse_value(cell: str, lineno: int) -> int:
    cell = cell.strip()
    if cell == "<1":
        return 0
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", lineno) from None
    if not 0 <= value <= 100:
        raise RangeError(f"value {cell} outside [0, 100]", lineno)
    if value != int(value):
        raise ParseError(f"value {cell} is not an integer", lineno)
    return int(value)


def parse_trends_csv(data: bytes | str, mid: str, fetched_at: datetime | None = None) -> TrendsRecord:
    """Parse a monthly interest-over-time export.

    Everything above the ``Month,...`` header row is ignored. Cells reading
    ``<1`` become 0.

    Raises
    ------
    GapError, OrderError, RangeError, ParseError
    """
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data.lstrip("﻿")
    rows = list(csv.reader(io.StringIO(text)))
    header = next((i for i, r in enumerate(rows) if r and r[0].strip().lower() == "month"), None)
    if header is None:
        raise ParseError("no 'Month' header row found")

    start: MonthKey | None = None
    prev: MonthKey | None = None
    values: list[int] = []
    for i, row in enumerate(rows[header + 1:], start=header + 2):
        if not row or not "".join(row).strip():
            continue
        if len(row) < 2:
            raise ParseError(f"expected 'month,value', got {row!r}", i)
        try:
            month = MonthKey.parse(row[0])
        except ValueError as exc:
            raise ParseError(str(exc), i) from None
        if prev is not None:
            step = month - prev
            if step <= 0:
                raise OrderError(f"month {month} does not follow {prev}", i)
            if step > 1:
                missing = f"{prev.successor()}" if step == 2 else f"{prev.successor()}..{month.shift(-1)}"
                raise GapError(f"missing month(s) {missing}", i)
        else:
            start = month
        values.append(_parse_value(row[1], i))
        prev = month
    if start is None:
        raise ParseError("no data rows")
    return TrendsRecord(mid, MonthlySeries(mid, start, values), fetched_at or datetime.now(timezone.utc))


def serialize_trends_csv(record: TrendsRecord) -> bytes:
    """Canonical export form; parsing it back yields the same series."""
    out = io.StringIO()
    out.write("Category: All categories\n\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Month", f"{record.mid}: (Worldwide)"])
    for month, v in zip(record.series.months, record.series.values):
        writer.writerow([str(month), int(v)])
    return out.getvalue().encode("utf-8")


def cache_filename(mid: str) -> str:
    return urllib.parse.quote(mid, safe="") + ".json"


def _envelope(record: TrendsRecord) -> dict:
    return {
        "mid": record.mid,
        "start": str(record.series.start),
        "values": [int(v) for v in record.series.values],
        "fetched_at": record.fetched_at.isoformat(),
    }


def _from_envelope(doc: dict) -> TrendsRecord:
    mid = doc["mid"]
    series = MonthlySeries(mid, MonthKey.parse(doc["start"]), doc["values"])
    return TrendsRecord(mid, series, datetime.fromisoformat(doc["fetched_at"]))


class TrendsCache:
    """Directory of cached series, one file per MID.

    Writes go through a temporary file and an atomic rename, so a reader
    sees either the old entry or the new one, never a partial file.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, mid: str) -> Path:
        return self.root / cache_filename(mid)

    def get(self, mid: str) -> TrendsRecord | None:
        path = self.path_for(mid)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            return None
        try:
            record = _from_envelope(json.loads(raw.decode("utf-8")))
            if record.mid != mid:
                raise ValueError(f"entry holds {record.mid!r}")
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            self._evict(path)
            logger.warning("evicted corrupt cache entry %s: %s", path.name, exc)
            raise CacheCorrupt(f"cache entry for {mid} is corrupt: {exc}") from exc
        return record

    def put(self, record: TrendsRecord) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(record.mid)
        payload = json.dumps(_envelope(record), sort_keys=True).encode("utf-8")
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            if path.exists():
                self._archive(path)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path

    def archived(self, mid: str) -> list[Path]:
        stem = cache_filename(mid)[:-len(".json")]
        return sorted((self.root / "archive").glob(f"{stem}.*.json"),
                      key=lambda p: int(p.name[len(stem) + 1:-len(".json")]))

    def _archive(self, path: Path) -> None:
        archive = self.root / "archive"
        archive.mkdir(exist_ok=True)
        stem = path.name[:-len(".json")]
        n = len(list(archive.glob(f"{stem}.*.json")))
        os.replace(path, archive / f"{stem}.{n}.json")

    def _evict(self, path: Path) -> None:
        corrupt = self.root / "corrupt"
        corrupt.mkdir(exist_ok=True)
        try:
            os.replace(path, corrupt / path.name)
        except FileNotFoundError:
            pass


Fetcher = Callable[[str], TrendsRecord]


class TrendsStore:
    """Read-through lookup: cache first, then CSV exports, then a fetcher.

    No live fetcher ships with the package; pass one explicitly to enable it.
    """

    def __init__(self, cache: TrendsCache, csv_dir: str | Path | None = None,
                 fetcher: Fetcher | None = None):
        self.cache = cache
        self.csv_dir = Path(csv_dir) if csv_dir else None
        self.fetcher = fetcher

    def get(self, mid: str) -> TrendsRecord | None:
        try:
            record = self.cache.get(mid)
        except CacheCorrupt:
            record = None
        if record is not None:
            return record
        if self.csv_dir is not None:
            path = self.csv_dir / (urllib.parse.quote(mid, safe="") + ".csv")
            if path.exists():
                mtime = datetime.fromtimestamp(path.stat().st_mtime, timezone.utc)
                record = parse_trends_csv(path.read_bytes(), mid, fetched_at=mtime)
        if record is None and self.fetcher is not None:
            record = self.fetcher(mid)
        if record is not None:
            self.cache.put(record)
        return record
