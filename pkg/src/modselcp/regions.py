"""Prediction regions: unions of closed intervals, label sets, everything, nothing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .pwl import tol_eq

INTERVALS = "intervals"
LABELS = "labels"
ENTIRE = "entire"
EMPTY = "empty"


def merge_intervals(intervals: Iterable[tuple[float, float]], tol: float | None = None) -> list[tuple[float, float]]:
    """Sort and merge closed intervals; gaps of at most ``tol`` are closed."""
    items = sorted((float(lo), float(hi)) for lo, hi in intervals if lo <= hi)
    if not items:
        return []
    if tol is None:
        scale = max(abs(v) for iv in items for v in iv if math.isfinite(v)) if any(
            math.isfinite(v) for iv in items for v in iv
        ) else 0.0
        tol = tol_eq(scale)
    out = [list(items[0])]
    for lo, hi in items[1:]:
        if lo - out[-1][1] <= tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


@dataclass(frozen=True)
class PredictionRegion:
    """A prediction set.

    ``kind`` is one of ``"intervals"``, ``"labels"``, ``"entire"``, ``"empty"``.
    ``n_labels`` is only meaningful for label spaces (it gives EntireSpace a
    finite size there).
    """

    kind: str
    intervals: tuple[tuple[float, float], ...] = ()
    labels: tuple[int, ...] = ()
    n_labels: int | None = None

    @classmethod
    def from_intervals(cls, intervals, tol: float | None = None) -> "PredictionRegion":
        merged = merge_intervals(intervals, tol)
        if not merged:
            return cls.empty()
        if merged[0][0] == -math.inf and merged[-1][1] == math.inf and len(merged) == 1:
            return cls.entire()
        return cls(INTERVALS, tuple(merged))

    @classmethod
    def from_labels(cls, labels, n_labels: int | None = None) -> "PredictionRegion":
        labs = tuple(sorted({int(v) for v in labels}))
        if n_labels is not None and labs and (labs[0] < 0 or labs[-1] >= n_labels):
            raise ValueError(f"labels must lie in [0, {n_labels})")
        if not labs:
            return cls(EMPTY, n_labels=n_labels)
        if n_labels is not None and len(labs) == n_labels:
            return cls(ENTIRE, n_labels=n_labels)
        return cls(LABELS, labels=labs, n_labels=n_labels)

    @classmethod
    def entire(cls, n_labels: int | None = None) -> "PredictionRegion":
        return cls(ENTIRE, n_labels=n_labels)

    @classmethod
    def empty(cls, n_labels: int | None = None) -> "PredictionRegion":
        return cls(EMPTY, n_labels=n_labels)

    @property
    def is_entire(self) -> bool:
        return self.kind == ENTIRE

    @property
    def is_empty(self) -> bool:
        return self.kind == EMPTY

    @property
    def discrete(self) -> bool:
        return self.kind == LABELS or self.n_labels is not None

    def measure(self) -> float:
        """Lebesgue measure (continuous) or cardinality (labels)."""
        if self.kind == EMPTY:
            return 0.0
        if self.kind == ENTIRE:
            return float(self.n_labels) if self.n_labels is not None else math.inf
        if self.kind == LABELS:
            return float(len(self.labels))
        return math.fsum(hi - lo for lo, hi in self.intervals)

    def as_label_set(self) -> frozenset[int]:
        if self.kind == LABELS:
            return frozenset(self.labels)
        if self.kind == EMPTY:
            return frozenset()
        if self.kind == ENTIRE and self.n_labels is not None:
            return frozenset(range(self.n_labels))
        raise ValueError(f"{self.kind} region is not a label set")

    def as_intervals(self) -> list[tuple[float, float]]:
        if self.kind == INTERVALS:
            return list(self.intervals)
        if self.kind == EMPTY:
            return []
        if self.kind == ENTIRE and self.n_labels is None:
            return [(-math.inf, math.inf)]
        raise ValueError(f"{self.kind} region is not an interval union")

    def contains(self, y) -> bool:
        if self.kind == ENTIRE:
            return True
        if self.kind == EMPTY:
            return False
        if self.kind == LABELS:
            return int(y) in self.labels
        return any(lo <= y <= hi for lo, hi in self.intervals)

    def contains_many(self, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        if self.kind == ENTIRE:
            return np.ones(ys.shape, dtype=bool)
        if self.kind == EMPTY:
            return np.zeros(ys.shape, dtype=bool)
        if self.kind == LABELS:
            return np.isin(ys.astype(int), self.labels)
        out = np.zeros(ys.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (ys >= lo) & (ys <= hi)
        return out

    def union(self, other: "PredictionRegion") -> "PredictionRegion":
        if self.discrete or other.discrete:
            k = self.n_labels if self.n_labels is not None else other.n_labels
            return PredictionRegion.from_labels(self.as_label_set() | other.as_label_set(), k)
        return PredictionRegion.from_intervals(self.as_intervals() + other.as_intervals())

    def clip(self, lo: float, hi: float) -> "PredictionRegion":
        """Intersection with the closed interval [lo, hi]."""
        pieces = [(max(a, lo), min(b, hi)) for a, b in self.as_intervals()]
        return PredictionRegion.from_intervals([p for p in pieces if p[0] <= p[1]])

    def issubset(self, other: "PredictionRegion", tol: float = 0.0) -> bool:
        """Set inclusion; interval endpoints may overshoot by ``tol``."""
        if self.kind == EMPTY or other.kind == ENTIRE:
            return True
        if self.discrete or other.discrete:
            return self.as_label_set() <= other.as_label_set()
        theirs = other.as_intervals()
        for lo, hi in self.as_intervals():
            if not any(a - tol <= lo and hi <= b + tol for a, b in theirs):
                return False
        return True

    def __str__(self) -> str:
        return format_region(self)


def union_all(regions: Iterable[PredictionRegion], n_labels: int | None = None) -> PredictionRegion:
    regions = list(regions)
    if not regions:
        return PredictionRegion.empty(n_labels)
    if any(r.discrete for r in regions) or n_labels is not None:
        labs = set()
        for r in regions:
            labs |= r.as_label_set()
        return PredictionRegion.from_labels(labs, n_labels)
    pieces = []
    for r in regions:
        pieces.extend(r.as_intervals())
    return PredictionRegion.from_intervals(pieces)


def region_diff_measure(a: PredictionRegion, b: PredictionRegion) -> float:
    """Measure (or cardinality) of the symmetric difference of two regions."""
    if a.discrete != b.discrete and not (a.is_empty or b.is_empty):
        raise ValueError("cannot compare an interval union with a label set")
    if a.discrete or b.discrete:
        return float(len(a.as_label_set() ^ b.as_label_set()))
    ia, ib = a.as_intervals(), b.as_intervals()
    edges = sorted({v for iv in ia + ib for v in iv} | {-math.inf, math.inf})
    total = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == -math.inf and hi == math.inf:
            mid = 0.0
        elif lo == -math.inf:
            mid = hi - 1.0
        elif hi == math.inf:
            mid = lo + 1.0
        else:
            mid = 0.5 * (lo + hi)
        in_a = any(x <= mid <= y for x, y in ia)
        in_b = any(x <= mid <= y for x, y in ib)
        if in_a != in_b:
            total.append(hi - lo)
    return math.fsum(total)


def _fmt(v: float) -> str:
    if v == math.inf:
        return "INF"
    if v == -math.inf:
        return "-INF"
    return repr(float(v))


def format_region(region: PredictionRegion) -> str:
    """Serialize as ``[lo,hi];[lo,hi]``, ``{0,2}``, ``ENTIRE`` or ``EMPTY``."""
    if region.kind == ENTIRE:
        return "ENTIRE"
    if region.kind == EMPTY:
        return "EMPTY"
    if region.kind == LABELS:
        return "{" + ",".join(str(v) for v in region.labels) + "}"
    return ";".join(f"[{_fmt(lo)},{_fmt(hi)}]" for lo, hi in region.intervals)


def _parse_num(tok: str) -> float:
    tok = tok.strip()
    if tok.upper() in ("INF", "+INF"):
        return math.inf
    if tok.upper() == "-INF":
        return -math.inf
    return float(tok)


def parse_region(text: str, n_labels: int | None = None) -> PredictionRegion:
    """Inverse of ``format_region``."""
    text = text.strip()
    if text == "ENTIRE":
        return PredictionRegion.entire(n_labels)
    if text == "EMPTY":
        return PredictionRegion.empty(n_labels)
    if text.startswith("{"):
        body = text.strip("{}").strip()
        labs = [int(t) for t in body.split(",")] if body else []
        return PredictionRegion.from_labels(labs, n_labels)
    pieces = []
    for part in text.split(";"):
        lo, hi = part.strip().strip("[]").split(",")
        pieces.append((_parse_num(lo), _parse_num(hi)))
    # the serialized intervals are already merged; keep them verbatim
    return PredictionRegion(INTERVALS, tuple(pieces))
