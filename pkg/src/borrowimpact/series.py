"""Monthly search-interest series and event-centred windows.

A window holds the twelve months strictly before and the twelve months
strictly after a release. The release month itself is never part of a
window, so the running variable takes the values -12..-1 and 1..12.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySeries, WindowOutOfRange

HALF_WIDTH = 12
WINDOW_T = np.array([*range(-HALF_WIDTH, 0), *range(1, HALF_WIDTH + 1)], dtype=float)

_MONTH_RE = re.compile(r"^\s*(-?\d{1,4})-(\d{1,2})(?:-\d{1,2})?\s*$")


@total_ordering
@dataclass(frozen=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        """Parse ``YYYY-MM``; a trailing day (``YYYY-MM-DD``) is truncated."""
        m = _MONTH_RE.match(text)
        if m is None:
            raise ValueError(f"not a YYYY-MM month: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthKey":
        year, month0 = divmod(ordinal, 12)
        return cls(year, month0 + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    def shift(self, months: int) -> "MonthKey":
        return MonthKey.from_ordinal(self.ordinal + months)

    def successor(self) -> "MonthKey":
        return self.shift(1)

    def __sub__(self, other: "MonthKey") -> int:
        """Signed number of months from ``other`` to ``self``."""
        if not isinstance(other, MonthKey):
            return NotImplemented
        return self.ordinal - other.ordinal

    def __lt__(self, other: "MonthKey") -> bool:
        if not isinstance(other, MonthKey):
            return NotImplemented
        return self.ordinal < other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def _as_values(values: Iterable[float]) -> tuple[float, ...]:
    # Non-negativity is enforced where real data enters (trends ingestion);
    # planted synthetic windows may dip below zero.
    out = tuple(float(v) for v in values)
    for v in out:
        if not math.isfinite(v):
            raise ValueError(f"series values must be finite, got {v}")
    return out


@dataclass(frozen=True)
class MonthlySeries:
    """Contiguous monthly values for one entity, starting at ``start``."""

    entity_id: str
    start: MonthKey
    values: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> MonthKey:
        """Last month covered (inclusive)."""
        return self.start.shift(len(self.values) - 1)

    @property
    def months(self) -> list[MonthKey]:
        return [self.start.shift(i) for i in range(len(self.values))]

    def to_numpy(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def covers(self, month: MonthKey) -> bool:
        return 0 <= month - self.start < len(self.values)

    def value_at(self, month: MonthKey) -> float:
        if not self.covers(month):
            raise KeyError(str(month))
        return self.values[month - self.start]

    def slice(self, first: MonthKey, last: MonthKey) -> "MonthlySeries":
        lo, hi = first - self.start, last - self.start
        if lo < 0 or hi >= len(self.values) or hi < lo:
            raise KeyError(f"{first}..{last} not covered by {self.start}..{self.end}")
        return MonthlySeries(self.entity_id, first, self.values[lo:hi + 1])

    def scaled(self, factor: float) -> "MonthlySeries":
        return MonthlySeries(self.entity_id, self.start, [v * factor for v in self.values])


@dataclass(frozen=True)
class EventWindow:
    """Twelve pre-release and twelve post-release observations.

    ``pre[i]`` is month ``release - (12 - i)`` and ``post[j]`` is month
    ``release + (j + 1)``.
    """

    borrowed_id: str
    borrowee_id: str
    release: MonthKey
    pre: tuple[float, ...]
    post: tuple[float, ...]

    def __post_init__(self):
        pre, post = _as_values(self.pre), _as_values(self.post)
        if len(pre) != HALF_WIDTH or len(post) != HALF_WIDTH:
            raise ValueError(
                f"a window needs {HALF_WIDTH} pre and {HALF_WIDTH} post points, "
                f"got {len(pre)} and {len(post)}"
            )
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    @classmethod
    def from_values(cls, values: Sequence[float], *, borrowed_id="", borrowee_id="",
                    release: MonthKey | None = None) -> "EventWindow":
        """Build a window from 24 values ordered by t = -12..-1, 1..12."""
        values = list(values)
        if len(values) != 2 * HALF_WIDTH:
            raise ValueError(f"expected {2 * HALF_WIDTH} values, got {len(values)}")
        return cls(borrowed_id, borrowee_id, release or MonthKey(2000, 1),
                   values[:HALF_WIDTH], values[HALF_WIDTH:])

    @property
    def t(self) -> np.ndarray:
        return WINDOW_T.copy()

    @property
    def values(self) -> np.ndarray:
        return np.array(self.pre + self.post, dtype=float)

    @property
    def months(self) -> list[MonthKey]:
        return [self.release.shift(int(t)) for t in WINDOW_T]

    def scaled(self, factor: float) -> "EventWindow":
        return EventWindow(self.borrowed_id, self.borrowee_id, self.release,
                           [v * factor for v in self.pre], [v * factor for v in self.post])


def normalize_peak(series: MonthlySeries) -> MonthlySeries:
    """Rescale so that the maximum value is exactly 100.

    An all-zero series is returned unchanged.

    >>> normalize_peak(MonthlySeries("x", MonthKey(2004, 1), [5, 10, 20])).values
    (25.0, 50.0, 100.0)
    """
    if len(series) == 0:
        raise EmptySeries(f"series {series.entity_id!r} is empty")
    peak = max(series.values)
    if peak <= 0 or peak == 100.0:
        return series
    factor = 100.0 / peak
    values = [v * factor for v in series.values]
    # pin the peak itself; v * (100 / v) can land one ulp off
    values = [100.0 if v == peak else scaled for v, scaled in zip(series.values, values)]
    return MonthlySeries(series.entity_id, series.start, values)


def extract_window(series: MonthlySeries, release: MonthKey, borrowee_id: str = "") -> EventWindow:
    first, last = release.shift(-HALF_WIDTH), release.shift(HALF_WIDTH)
    missing = [m for m in (first.shift(i) for i in range(2 * HALF_WIDTH + 1))
               if m != release and not series.covers(m)]
    if missing:
        raise WindowOutOfRange(
            f"series {series.entity_id!r} ({series.start}..{series.end if len(series) else '-'}) "
            f"does not cover {first}..{last}; missing {', '.join(map(str, _spans(missing)))}",
            missing,
        )
    pre = [series.value_at(release.shift(-HALF_WIDTH + i)) for i in range(HALF_WIDTH)]
    post = [series.value_at(release.shift(j + 1)) for j in range(HALF_WIDTH)]
    return EventWindow(series.entity_id, borrowee_id, release, pre, post)


def _spans(months: list[MonthKey]) -> list[str]:
    spans, run = [], [months[0]]
    for m in months[1:]:
        if m - run[-1] == 1:
            run.append(m)
        else:
            spans.append(run)
            run = [m]
    spans.append(run)
    return [str(r[0]) if len(r) == 1 else f"{r[0]}..{r[-1]}" for r in spans]


def is_all_zero(window: EventWindow) -> bool:
    return not any(window.pre) and not any(window.post)


def has_zero_baseline(window: EventWindow) -> bool:
    """True when nothing was searched before the release but something was after."""
    return not any(window.pre) and any(window.post)


def align_series(a: MonthlySeries, b: MonthlySeries) -> tuple[MonthlySeries, MonthlySeries, int]:
    """Trim both series to their common month range.

    Returns the trimmed pair and the number of months dropped in total.
    """
    first, last = max(a.start, b.start), min(a.end, b.end)
    if last < first:
        raise WindowOutOfRange(f"{a.entity_id!r} and {b.entity_id!r} share no months")
    ta, tb = a.slice(first, last), b.slice(first, last)
    lost = (len(a) - len(ta)) + (len(b) - len(tb))
    return ta, tb, lost
