"""1-D temporal interval geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from ._pykernels import _giou, _iou


@dataclass(frozen=True)
class Span:
    """Closed interval ``[start, end]`` in seconds."""

    start: float
    end: float

    def __post_init__(self):
        s, e = float(self.start), float(self.end)
        if not (math.isfinite(s) and math.isfinite(e)):
            raise ValueError(f"span endpoints must be finite, got [{s}, {e}]")
        if s < 0 or e < s:
            raise ValueError(f"invalid span [{s}, {e}]: need 0 <= start <= end")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def center(self) -> float:
        return (self.start + self.end) / 2

    def contains(self, t: float) -> bool:
        return self.start <= t <= self.end

    def clip(self, lo: float, hi: float) -> "Span":
        s = min(max(self.start, lo), hi)
        e = min(max(self.end, lo), hi)
        return Span(s, e)

    def to_list(self) -> list[float]:
        return [self.start, self.end]


@dataclass(frozen=True)
class CenterWidthSpan:
    center: float
    width: float

    def __post_init__(self):
        if not self.width >= 0:
            raise ValueError(f"width must be >= 0, got {self.width}")


def iou(a: Span, b: Span) -> float:
    """Intersection over union.

    Zero-length spans: two identical points give 1, any other pair with an
    empty union gives 0.
    """
    return _iou(a.start, a.end, b.start, b.end)


def giou(a: Span, b: Span) -> float:
    """Generalized IoU: ``iou - (hull - union) / hull``."""
    return _giou(a.start, a.end, b.start, b.end)


def centerness(location: float, gt: Span) -> float:
    l = location - gt.start
    r = gt.end - location
    if l < 0 or r < 0:
        return 0.0
    hi = max(l, r)
    if hi == 0:
        return 0.0
    return math.sqrt(min(l, r) / hi)


def to_center_width(s: Span) -> CenterWidthSpan:
    return CenterWidthSpan((s.start + s.end) / 2, s.end - s.start)


def to_span(cw: CenterWidthSpan) -> Span:
    half = cw.width / 2
    return Span(max(cw.center - half, 0.0), cw.center + half)


def _endpoints(spans: Sequence[Span]) -> tuple[np.ndarray, np.ndarray]:
    s = np.fromiter((x.start for x in spans), dtype=np.float64, count=len(spans))
    e = np.fromiter((x.end for x in spans), dtype=np.float64, count=len(spans))
    return s, e


def iou_matrix(a: Sequence[Span], b: Sequence[Span]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(a), len(b))``."""
    return kernels.iou_matrix(*_endpoints(a), *_endpoints(b))


def giou_matrix(a: Sequence[Span], b: Sequence[Span]) -> np.ndarray:
    return kernels.giou_matrix(*_endpoints(a), *_endpoints(b))
