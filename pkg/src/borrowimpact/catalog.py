"""Borrowing graph ingestion and song-to-entity linking.

Linking follows a search / filter / score procedure: three text searches
per song (title, artist, both), the top ten hits of each, class filtering
on instance-of, a required Freebase MID, and a Ratcliff-Obershelp
similarity threshold applied separately to title and artist.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import threading
import time
import unicodedata
import urllib.error
import urllib.parse
import urllib.request
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Protocol, Sequence

from .errors import ParseError, SelfLoopEdge, SourceUnavailable
from .series import MonthKey

logger = logging.getLogger(__name__)

MUSICAL_WORK = "Q2188189"
SONG = "Q7366"
COMPOSITION = "Q204370"
DEFAULT_ALLOWED_CLASSES = frozenset({
    MUSICAL_WORK, SONG, COMPOSITION,
    "Q134556",     # single
    "Q207628",     # musical composition
    "Q105543609",  # musical work/composition
})
SIMILARITY_THRESHOLD = 0.55
TOP_K = 10
BATCH_SIZE = 50


class BorrowingKind(str, enum.Enum):
    SAMPLE = "sample"
    COVER = "cover"
    REMIX = "remix"


@dataclass(frozen=True)
class SongRecord:
    song_id: str
    title: str
    artist: str
    release: MonthKey | None = None

    def __post_init__(self):
        if not normalize_name(self.title) or not normalize_name(self.artist):
            raise ValueError(f"song {self.song_id!r} needs a non-empty title and artist")


@dataclass(frozen=True)
class BorrowingEdge:
    """Directed edge from the original (borrowed) song to the new one."""

    borrowed_id: str
    borrowee_id: str
    kind: BorrowingKind
    release: MonthKey

    def __post_init__(self):
        if self.borrowed_id == self.borrowee_id:
            raise SelfLoopEdge(f"song {self.borrowed_id!r} cannot borrow from itself")
        object.__setattr__(self, "kind", BorrowingKind(self.kind))

    def to_dict(self) -> dict:
        return {"borrowed_id": self.borrowed_id, "borrowee_id": self.borrowee_id,
                "kind": self.kind.value, "release": str(self.release)}


class BorrowingGraph:
    """Immutable-after-construction directed multigraph of borrowings."""

    def __init__(self, edges: Iterable[BorrowingEdge] = ()):
        self._edges: list[BorrowingEdge] = []
        self._seen: set[BorrowingEdge] = set()
        self._out: dict[str, list[BorrowingEdge]] = defaultdict(list)
        self._in: dict[str, list[BorrowingEdge]] = defaultdict(list)
        self.duplicates = 0
        for e in edges:
            self._add(e)

    def _add(self, edge: BorrowingEdge) -> bool:
        if edge in self._seen:
            self.duplicates += 1
            return False
        self._seen.add(edge)
        self._edges.append(edge)
        self._out[edge.borrowed_id].append(edge)
        self._in[edge.borrowee_id].append(edge)
        return True

    @property
    def edges(self) -> tuple[BorrowingEdge, ...]:
        return tuple(self._edges)

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._out) | frozenset(self._in)

    def __contains__(self, song_id: str) -> bool:
        return song_id in self._out or song_id in self._in

    def __len__(self) -> int:
        return len(self._edges)

    def borrowers_of(self, song_id: str) -> list[BorrowingEdge]:
        return list(self._out.get(song_id, ()))

    def sources_of(self, song_id: str) -> list[BorrowingEdge]:
        return list(self._in.get(song_id, ()))


def _data_rows(lines: Iterable[str], delimiter: str | None) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` skipping blanks and ``#`` comments."""
    numbered = [(i, line.rstrip("\r\n")) for i, line in enumerate(lines, start=1)]
    numbered = [(i, s) for i, s in numbered if s.strip() and not s.lstrip().startswith("#")]
    if delimiter is None:
        delimiter = "\t" if any("\t" in s for _, s in numbered[:5]) else ","
    for (i, _), fields in zip(numbered, csv.reader([s for _, s in numbered], delimiter=delimiter)):
        yield i, [f.strip() for f in fields]


def _lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return source


def load_graph(edges_source, delimiter: str | None = None) -> BorrowingGraph:
    """Build the borrowing graph from an edge file or an iterable of lines.

    Each record is ``borrowed_id, borrowee_id, kind, release`` with the
    release as ``YYYY-MM`` (a day part is truncated). An optional header
    row starting with ``borrowed_id`` is skipped.
    """
    graph = BorrowingGraph()
    for lineno, fields in _data_rows(_lines(edges_source), delimiter):
        if fields and fields[0] == "borrowed_id":
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", lineno)
        borrowed, borrowee, kind, release = fields
        if not borrowed or not borrowee:
            raise ParseError("empty song id", lineno)
        try:
            kind = BorrowingKind(kind.lower())
        except ValueError:
            raise ParseError(f"unknown borrowing kind {kind!r}", lineno) from None
        try:
            month = MonthKey.parse(release)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if borrowed == borrowee:
            raise SelfLoopEdge(f"line {lineno}: song {borrowed!r} cannot borrow from itself")
        graph._add(BorrowingEdge(borrowed, borrowee, kind, month))
    if graph.duplicates:
        logger.info("dropped %d duplicate edge record(s)", graph.duplicates)
    return graph


def load_songs(songs_source, delimiter: str | None = None) -> dict[str, SongRecord]:
    """Read ``song_id, title, artist[, release]`` records."""
    songs: dict[str, SongRecord] = {}
    for lineno, fields in _data_rows(_lines(songs_source), delimiter):
        if fields and fields[0] == "song_id":
            continue
        if len(fields) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(fields)}", lineno)
        try:
            release = MonthKey.parse(fields[3]) if len(fields) == 4 and fields[3] else None
            songs[fields[0]] = SongRecord(fields[0], fields[1], fields[2], release)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return songs


# -- string similarity --------------------------------------------------------

def normalize_name(text: str) -> str:
    """Compatibility-decompose, case-fold and collapse whitespace."""
    return " ".join(unicodedata.normalize("NFKD", text).casefold().split())


def _longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int) -> tuple[int, int, int]:
    # Longest common block; ties go to the smallest i, then the smallest j.
    best_i, best_j, best_k = alo, blo, 0
    prev: dict[int, int] = {}
    for i in range(alo, ahi):
        cur: dict[int, int] = {}
        ai = a[i]
        for j in range(blo, bhi):
            if b[j] == ai:
                k = prev.get(j - 1, 0) + 1
                cur[j] = k
                if k > best_k:
                    best_i, best_j, best_k = i - k + 1, j - k + 1, k
        prev = cur
    return best_i, best_j, best_k


def _matching_characters(a: str, b: str) -> int:
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        i, j, k = _longest_match(a, b, alo, ahi, blo, bhi)
        if k:
            total += k
            if alo < i and blo < j:
                stack.append((alo, i, blo, j))
            if i + k < ahi and j + k < bhi:
                stack.append((i + k, ahi, j + k, bhi))
    return total


def ratcliff_obershelp(a: str, b: str) -> float:
    """Gestalt pattern-matching ratio ``2M / (|a| + |b|)`` on raw strings."""
    if not a and not b:
        return 1.0
    return 2.0 * _matching_characters(a, b) / (len(a) + len(b))


def string_similarity(a: str, b: str) -> float:
    """Normalised Ratcliff-Obershelp similarity in [0, 1].

    The pair is put in a canonical order first, because the block search
    breaks ties by position and would otherwise make the ratio depend on
    argument order.
    """
    a, b = normalize_name(a), normalize_name(b)
    if b < a:
        a, b = b, a
    return ratcliff_obershelp(a, b)


# -- entity sources -----------------------------------------------------------

@dataclass(frozen=True)
class EntityCandidate:
    kb_id: str
    label: str
    artist_label: str | None = None
    class_ids: frozenset[str] = field(default_factory=frozenset)
    freebase_mid: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "class_ids", frozenset(self.class_ids))


@dataclass(frozen=True)
class MatchDecision:
    song_id: str
    kb_id: str
    label: str
    title_similarity: float
    artist_similarity: float
    accepted: bool
    freebase_mid: str | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


class EntitySource(Protocol):
    def search(self, query: str, limit: int = TOP_K) -> list[str]: ...

    def get_entities(self, kb_ids: Sequence[str]) -> dict[str, EntityCandidate]: ...


def _candidate_from_json(kb_id: str, raw: Mapping) -> EntityCandidate:
    return EntityCandidate(
        kb_id=kb_id,
        label=raw.get("label") or "",
        artist_label=raw.get("artist_label"),
        class_ids=frozenset(raw.get("class_ids") or ()),
        freebase_mid=raw.get("freebase_mid"),
    )


class FixtureSource:
    """Offline entity source backed by a JSON dump.

    The file has two top-level maps: ``search_results`` (query -> ordered
    list of ids) and ``entities`` (id -> label, artist_label, class_ids,
    freebase_mid). Unknown queries return no hits.
    """

    def __init__(self, data: Mapping | str | Path):
        if not isinstance(data, Mapping):
            try:
                data = json.loads(Path(data).read_text(encoding="utf-8"))
            except OSError as exc:
                raise SourceUnavailable(f"cannot read fixture {data}: {exc}") from exc
        self.search_results = {k: list(v) for k, v in data.get("search_results", {}).items()}
        self.entities = {k: _candidate_from_json(k, v) for k, v in data.get("entities", {}).items()}
        self.fetch_batches: list[int] = []

    def search(self, query: str, limit: int = TOP_K) -> list[str]:
        return self.search_results.get(query, [])[:limit]

    def get_entities(self, kb_ids: Sequence[str]) -> dict[str, EntityCandidate]:
        self.fetch_batches.append(len(kb_ids))
        return {k: self.entities[k] for k in kb_ids if k in self.entities}


Transport = Callable[[str, Mapping[str, str]], Mapping]


def _urllib_transport(timeout: float) -> Transport:
    def get(url: str, params: Mapping[str, str]) -> Mapping:
        req = urllib.request.Request(f"{url}?{urllib.parse.urlencode(params)}",
                                     headers={"User-Agent": "borrowimpact/0.1"})
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.load(resp)
    return get


class WikidataSource:
    """Entity source speaking the MediaWiki action API of a Wikibase.

    Uses ``wbsearchentities`` for text search and ``wbgetentities`` for
    batched property fetches. Requests are rate-limited across threads.
    """

    INSTANCE_OF = "P31"
    PERFORMER = "P175"
    FREEBASE_ID = "P646"

    def __init__(self, endpoint: str = "https://www.wikidata.org/w/api.php", *,
                 requests_per_second: float = 5.0, language: str = "en",
                 timeout: float = 30.0, transport: Transport | None = None):
        self.endpoint = endpoint
        self.language = language
        self._interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self._transport = transport or _urllib_transport(timeout)
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def _call(self, params: dict) -> Mapping:
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self._interval
        if wait > 0:
            time.sleep(wait)
        try:
            payload = self._transport(self.endpoint, {**params, "format": "json"})
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise SourceUnavailable(f"{self.endpoint}: {exc}") from exc
        if "error" in payload:
            raise SourceUnavailable(f"{self.endpoint}: {payload['error']}")
        return payload

    def search(self, query: str, limit: int = TOP_K) -> list[str]:
        payload = self._call({"action": "wbsearchentities", "search": query, "type": "item",
                              "language": self.language, "limit": str(limit)})
        return [hit["id"] for hit in payload.get("search", [])][:limit]

    def _fetch(self, ids: Sequence[str], props: str) -> Mapping:
        out: dict = {}
        for i in range(0, len(ids), BATCH_SIZE):
            chunk = ids[i:i + BATCH_SIZE]
            payload = self._call({"action": "wbgetentities", "ids": "|".join(chunk),
                                  "props": props, "languages": self.language})
            out.update(payload.get("entities", {}))
        return out

    @staticmethod
    def _claim_values(entity: Mapping, prop: str) -> list:
        values = []
        for claim in entity.get("claims", {}).get(prop, []):
            value = claim.get("mainsnak", {}).get("datavalue", {}).get("value")
            if value is not None:
                values.append(value["id"] if isinstance(value, dict) else value)
        return values

    def _label(self, entity: Mapping) -> str:
        return entity.get("labels", {}).get(self.language, {}).get("value", "")

    def get_entities(self, kb_ids: Sequence[str]) -> dict[str, EntityCandidate]:
        raw = self._fetch(list(kb_ids), "labels|claims")
        performers = {}
        for kb_id, ent in raw.items():
            ids = self._claim_values(ent, self.PERFORMER)
            if ids:
                performers[kb_id] = ids[0]
        names = self._fetch(sorted(set(performers.values())), "labels") if performers else {}
        out = {}
        for kb_id, ent in raw.items():
            if "missing" in ent:
                continue
            mids = self._claim_values(ent, self.FREEBASE_ID)
            artist = names.get(performers.get(kb_id, ""), {})
            out[kb_id] = EntityCandidate(
                kb_id=kb_id,
                label=self._label(ent),
                artist_label=self._label(artist) or None,
                class_ids=frozenset(self._claim_values(ent, self.INSTANCE_OF)),
                freebase_mid=mids[0] if mids else None,
            )
        return out


# -- linking ------------------------------------------------------------------

def search_queries(song: SongRecord) -> list[str]:
    return [song.title, song.artist, f"{song.title} {song.artist}"]


def _decision_order(d: MatchDecision):
    return (not d.accepted, -min(d.title_similarity, d.artist_similarity), d.kb_id)


def resolve_song(song: SongRecord, source: EntitySource, *,
                 allowed_classes: Iterable[str] = DEFAULT_ALLOWED_CLASSES,
                 threshold: float = SIMILARITY_THRESHOLD, top_k: int = TOP_K,
                 batch_size: int = BATCH_SIZE) -> list[MatchDecision]:
    """Score every candidate entity for ``song``.

    Decisions come back best first: accepted ones ordered by the smaller of
    the two similarities (descending) and then by id, followed by the
    rejected ones in the same order.
    """
    allowed = frozenset(allowed_classes)
    ids: list[str] = []
    for query in search_queries(song):
        for kb_id in source.search(query, top_k)[:top_k]:
            if kb_id not in ids:
                ids.append(kb_id)
    if not ids:
        return []

    candidates: dict[str, EntityCandidate] = {}
    for i in range(0, len(ids), batch_size):
        candidates.update(source.get_entities(ids[i:i + batch_size]))

    decisions = []
    for kb_id in ids:
        cand = candidates.get(kb_id)
        if cand is None:
            continue
        title_sim = string_similarity(song.title, cand.label)
        artist_sim = string_similarity(song.artist, cand.artist_label) if cand.artist_label else 0.0
        if not cand.class_ids & allowed:
            reason = "class"
        elif not cand.freebase_mid:
            reason = "no_mid"
        elif not (title_sim > threshold and artist_sim > threshold):
            reason = "similarity"
        else:
            reason = ""
        decisions.append(MatchDecision(song.song_id, kb_id, cand.label, title_sim, artist_sim,
                                       accepted=not reason, freebase_mid=cand.freebase_mid,
                                       reason=reason))
    return sorted(decisions, key=_decision_order)


def best_match(decisions: Sequence[MatchDecision]) -> MatchDecision | None:
    for d in decisions:
        if d.accepted:
            return d
    return None
