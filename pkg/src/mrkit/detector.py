"""Post-processing and assignment logic of the two-head (ATSS + DETR) detector."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .spans import Span, giou, giou_matrix, iou, iou_matrix

P_CLAMP = 1e-12
TIE_TOL = 1e-9


class Source(str, enum.Enum):
    ATSS = "ATSS"
    DETR = "DETR"


@dataclass(frozen=True)
class Anchor:
    span: Span
    level: int
    center: float

    @property
    def start(self) -> float:
        return self.span.start

    @property
    def end(self) -> float:
        return self.span.end


@dataclass(frozen=True)
class Detection:
    """A scored span from one of the detection heads.

    ``score`` is the ranking confidence; when omitted it defaults to the
    classification probability ``p``.
    """

    span: Span
    p: float
    pred_iou: float = 1.0
    source: Source = Source.DETR
    score: float | None = None

    def __post_init__(self):
        for name in ("p", "pred_iou"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {x}")
        object.__setattr__(self, "source", Source(self.source))

    @property
    def confidence(self) -> float:
        return self.p if self.score is None else self.score


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]
    unmatched: tuple[int, ...] = ()
    total_cost: float = 0.0


@dataclass(frozen=True)
class MatchWeights:
    l1: float = 10.0
    giou: float = 1.0
    ce: float = 5.0
    iou: float = 1.0

    def __post_init__(self):
        for k in ("l1", "giou", "ce", "iou"):
            v = getattr(self, k)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"match weight {k} must be finite and >= 0, got {v}")

    def scaled(self, c: float) -> "MatchWeights":
        return MatchWeights(self.l1 * c, self.giou * c, self.ce * c, self.iou * c)


# ---------------------------------------------------------------- anchors

def generate_anchors(
    num_clips: int, clip_len: float, levels: Sequence[tuple[float, float]]
) -> list[Anchor]:
    """Anchors for every level ``(stride_seconds, width_multiplier)``.

    Centers sit at ``(k + 0.5) * stride`` for every k with the center inside
    the video; width is ``stride * multiplier`` clipped to ``[0, duration]``.
    """
    if not levels:
        raise ValueError("at least one anchor level is required")
    if num_clips < 1:
        raise ValueError("num_clips must be >= 1")
    duration = num_clips * clip_len
    anchors: list[Anchor] = []
    for level, (stride, mult) in enumerate(levels):
        if stride <= 0 or mult <= 0:
            raise ValueError(f"level {level}: stride and multiplier must be positive")
        half = stride * mult / 2
        k = 0
        while (k + 0.5) * stride < duration:
            c = (k + 0.5) * stride
            span = Span(max(c - half, 0.0), min(c + half, duration))
            anchors.append(Anchor(span, level, c))
            k += 1
    return anchors


def default_levels(clip_len: float, strides=(1, 2, 4), multiplier: float = 4.0):
    """Anchor levels with strides given in clips."""
    return [(s * clip_len, multiplier) for s in strides]


# ---------------------------------------------------------------- ATSS

def atss_assign(
    anchors: Sequence[Anchor], gts: Sequence[Span], top_k: int = 9, eps: float = 1e-12
) -> list[list[int]]:
    """Adaptive positive-anchor selection, one list of anchor indices per gt.

    Candidates are the ``top_k`` anchors per level closest in center to the
    gt (ties to lower index). The IoU threshold is mean + population std of
    the candidates' IoUs; positives also need their center strictly inside
    the gt. An anchor claimed by several gts goes to the highest IoU, ties
    to the earlier gt. ``eps`` absorbs rounding in the threshold.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not anchors or not gts:
        return [[] for _ in gts]
    centers = np.array([a.center for a in anchors])
    levels = np.array([a.level for a in anchors])
    ious = iou_matrix([a.span for a in anchors], gts)  # (A, G)
    owner = np.full(len(anchors), -1)
    best = np.full(len(anchors), -np.inf)
    for g, gt in enumerate(gts):
        gc = gt.center
        dist = np.abs(centers - gc)
        cand = []
        for lvl in np.unique(levels):
            idx = np.flatnonzero(levels == lvl)
            order = np.argsort(dist[idx], kind="stable")
            cand.extend(idx[order[:top_k]].tolist())
        cand = np.array(sorted(cand))
        vals = ious[cand, g]
        thr = vals.mean() + vals.std()
        for a, v in zip(cand, vals):
            if v >= thr - eps and gt.start < centers[a] < gt.end and v > best[a]:
                best[a] = v
                owner[a] = g
    out: list[list[int]] = [[] for _ in gts]
    for a, g in enumerate(owner):
        if g >= 0:
            out[g].append(a)
    return out


# ---------------------------------------------------------------- matching

def _l1_cw(a: Span, b: Span, duration: float) -> float:
    return (abs(a.center - b.center) + abs(a.length - b.length)) / duration


def match_cost(det: Detection, gt: Span, weights: MatchWeights = MatchWeights(), duration: float = 1.0) -> float:
    """DETR matching cost with an extra predicted-IoU term.

    L1 is taken on (center, width) divided by ``duration``; ``p`` is clamped
    to ``1e-12`` before the log.
    """
    p = max(det.p, P_CLAMP)
    return (
        weights.l1 * _l1_cw(det.span, gt, duration)
        + weights.giou * (1.0 - giou(det.span, gt))
        + weights.ce * (-math.log(p))
        + weights.iou * (1.0 - det.pred_iou)
    )


def cost_matrix(
    dets: Sequence[Detection], gts: Sequence[Span], weights: MatchWeights = MatchWeights(), duration: float = 1.0
) -> np.ndarray:
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)))
    ds = [d.span for d in dets]
    dc = np.array([s.center for s in ds])[:, None]
    dw = np.array([s.length for s in ds])[:, None]
    gc = np.array([s.center for s in gts])[None, :]
    gw = np.array([s.length for s in gts])[None, :]
    l1 = (np.abs(dc - gc) + np.abs(dw - gw)) / duration
    g = giou_matrix(ds, gts)
    p = np.maximum(np.array([d.p for d in dets]), P_CLAMP)[:, None]
    q = np.array([d.pred_iou for d in dets])[:, None]
    return weights.l1 * l1 + weights.giou * (1.0 - g) + weights.ce * (-np.log(p)) + weights.iou * (1.0 - q)


def _optimal_cost(c: np.ndarray) -> float:
    if c.size == 0:
        return 0.0
    r, k = kernels.linear_sum_assignment(c)
    return float(c[r, k].sum())


def assign_lexicographic(cost, tol: float = TIE_TOL) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost assignment of ``min(n, m)`` pairs, lexicographic among optima.

    Rows are fixed in ascending order; each row takes the smallest column
    that keeps the total within ``tol * max(1, |opt|)`` of the optimum, or is
    left unmatched when that is still optimal.
    """
    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    if n == 0 or m == 0:
        return [], 0.0
    opt = _optimal_cost(c)
    slack = tol * max(1.0, abs(opt))
    need = min(n, m)
    pairs: list[tuple[int, int]] = []
    prefix = 0.0
    free_cols = list(range(m))
    for i in range(n):
        rest_rows = list(range(i + 1, n))
        remaining = need - len(pairs)
        if remaining == 0:
            break
        chosen = None
        for j in free_cols:
            cols = [x for x in free_cols if x != j]
            if remaining - 1 > min(len(rest_rows), len(cols)):
                continue
            sub = _optimal_cost(c[np.ix_(rest_rows, cols)]) if remaining > 1 else 0.0
            if prefix + c[i, j] + sub <= opt + slack:
                chosen = j
                break
        if chosen is not None:
            pairs.append((i, chosen))
            prefix += c[i, chosen]
            free_cols.remove(chosen)
    total = float(sum(c[i, j] for i, j in pairs))
    return pairs, total


def hungarian_match(
    dets: Sequence[Detection], gts: Sequence[Span], weights: MatchWeights = MatchWeights(), duration: float = 1.0
) -> MatchResult:
    c = cost_matrix(dets, gts, weights, duration)
    pairs, total = assign_lexicographic(c)
    matched = {i for i, _ in pairs}
    return MatchResult(tuple(pairs), tuple(i for i in range(len(dets)) if i not in matched), total)


# ---------------------------------------------------------------- scoring / fusion

def combined_confidence(p: float, pred_iou: float, alpha: float = 0.5) -> float:
    """``p**alpha * pred_iou**(1 - alpha)`` with ``0**0 == 1``."""
    if alpha == 1.0:
        return float(p)
    if alpha == 0.0:
        return float(pred_iou)
    return float(p) ** alpha * float(pred_iou) ** (1.0 - alpha)


def weighted_fuse(
    dets: Sequence[Detection], iou_cluster_threshold: float = 0.7, num_sources: int = 2
) -> list[Detection]:
    """Weighted span fusion across heads.

    Detections are visited by descending confidence (stable). Each joins the
    existing cluster whose fused span overlaps it most with IoU >= threshold
    (ties to the older cluster) or starts a new cluster. Fused spans are the
    confidence-weighted mean of member endpoints; fused confidence is the mean
    member confidence times ``min(T, M) / T``.
    """
    if not 0.0 < iou_cluster_threshold < 1.0:
        raise ValueError("iou_cluster_threshold must lie in (0, 1)")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    clusters: list[list[Detection]] = []
    fused: list[Span] = []
    for i in order:
        d = dets[i]
        best_k, best_v = -1, -1.0
        for k, span in enumerate(fused):
            v = iou(span, d.span)
            if v >= iou_cluster_threshold and v > best_v:
                best_k, best_v = k, v
        if best_k < 0:
            clusters.append([d])
            fused.append(d.span)
        else:
            clusters[best_k].append(d)
            fused[best_k] = _weighted_span(clusters[best_k])
    out = [_fuse_cluster(members, span, num_sources) for members, span in zip(clusters, fused)]
    return sorted(out, key=lambda d: -d.confidence)


def _weighted_span(members: Sequence[Detection]) -> Span:
    w = np.array([m.confidence for m in members])
    s = np.array([m.span.start for m in members])
    e = np.array([m.span.end for m in members])
    total = w.sum()
    if total <= 0:
        return Span(s.mean(), e.mean())
    start, end = float(w @ s / total), float(w @ e / total)
    # keep inside the members' hull despite rounding
    start = min(max(start, s.min()), s.max())
    end = min(max(end, e.min()), e.max())
    return Span(start, max(end, start))


def _fuse_cluster(members: Sequence[Detection], span: Span, num_sources: int) -> Detection:
    w = np.array([m.confidence for m in members])
    m = len(members)
    score = float(w.mean()) * min(num_sources, m) / num_sources
    denom = w.sum()
    if denom > 0:
        p = float(w @ np.array([x.p for x in members]) / denom)
        q = float(w @ np.array([x.pred_iou for x in members]) / denom)
    else:
        p = float(np.mean([x.p for x in members]))
        q = float(np.mean([x.pred_iou for x in members]))
    return Detection(span, min(max(p, 0.0), 1.0), min(max(q, 0.0), 1.0), members[0].source, score)
