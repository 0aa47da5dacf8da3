"""Moment-retrieval and highlight-detection evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .spans import Span, iou, iou_matrix

AVG_IOU_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2).tolist())
VERY_GOOD = 4


@dataclass(frozen=True)
class GroundTruth:
    qid: str
    windows: tuple[Span, ...]
    grades: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Prediction:
    """Ranked windows (highest score first) and optional per-clip saliency."""

    qid: str
    windows: tuple[tuple[Span, float], ...] = ()
    saliency: tuple[float, ...] | None = None

    def ranked(self) -> list[tuple[Span, float]]:
        return sorted(self.windows, key=lambda w: -w[1])

    def top1(self) -> Span | None:
        r = self.ranked()
        return r[0][0] if r else None


@dataclass(frozen=True)
class HDResult:
    value: float
    evaluated: int
    skipped: int


def _pair(gt: Mapping[str, GroundTruth] | Sequence[GroundTruth], pred):
    gt_map = gt if isinstance(gt, Mapping) else {g.qid: g for g in gt}
    pred_map = pred if isinstance(pred, Mapping) else {p.qid: p for p in pred}
    qids = sorted(gt_map)
    return [(gt_map[q], pred_map.get(q)) for q in qids]


def recall_at_1(gt, pred, iou_threshold: float = 0.5) -> float:
    """Fraction of queries whose top-1 window reaches ``iou_threshold`` with any gt window."""
    pairs = _pair(gt, pred)
    if not pairs:
        return 0.0
    hits = 0
    for g, p in pairs:
        top = p.top1() if p is not None else None
        if top is not None and any(iou(top, w) >= iou_threshold for w in g.windows):
            hits += 1
    return hits / len(pairs)


def mean_iou(gt, pred) -> float:
    pairs = _pair(gt, pred)
    if not pairs:
        return 0.0
    vals = []
    for g, p in pairs:
        top = p.top1() if p is not None else None
        vals.append(max((iou(top, w) for w in g.windows), default=0.0) if top is not None else 0.0)
    return float(np.mean(vals))


def ap_from_hits(hits, num_gt: int) -> float:
    """Exact area under the (uninterpolated) precision-recall step curve."""
    if num_gt == 0:
        return 0.0
    hits = np.asarray(hits, dtype=np.float64)
    if hits.size == 0:
        return 0.0
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, hits.size + 1)
    return float((precision * hits).sum() / num_gt)


def query_average_precision(windows: Sequence[Span], ranked: Sequence[Span], iou_threshold: float) -> float:
    if not windows:
        return 0.0
    if not ranked:
        return 0.0
    hits = kernels.greedy_hits(iou_matrix(ranked, windows), iou_threshold)
    return ap_from_hits(hits, len(windows))


def average_precision(gt, pred, iou_threshold: float = 0.5) -> float:
    """Mean over queries (with at least one gt window) of AP at one IoU threshold."""
    return _mean_ap(gt, pred, (iou_threshold,))


def map_avg(gt, pred, thresholds: Sequence[float] = AVG_IOU_THRESHOLDS) -> float:
    """AP averaged over IoU thresholds per query, then over queries."""
    return _mean_ap(gt, pred, thresholds)


def _mean_ap(gt, pred, thresholds) -> float:
    per_query = []
    for g, p in _pair(gt, pred):
        if not g.windows:
            continue
        ranked = [s for s, _ in p.ranked()] if p is not None else []
        if ranked:
            m = iou_matrix(ranked, list(g.windows))
            aps = [ap_from_hits(kernels.greedy_hits(m, t), len(g.windows)) for t in thresholds]
        else:
            aps = [0.0] * len(thresholds)
        per_query.append(float(np.mean(aps)))
    return float(np.mean(per_query)) if per_query else 0.0


def _rank_clips(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    return np.argsort(-s, kind="stable")


def _hd_pairs(gt, pred, threshold: int):
    for g, p in _pair(gt, pred):
        if g.grades is None:
            continue
        grades = np.asarray(g.grades)
        positive = grades >= threshold
        scores = p.saliency if (p is not None and p.saliency is not None) else None
        if scores is not None and len(scores) != len(grades):
            raise ValueError(f"query {g.qid}: {len(scores)} saliency scores for {len(grades)} clips")
        yield g, positive, scores


def hd_map(gt, pred, positive_grade_threshold: int = VERY_GOOD) -> HDResult:
    """Per-video AP of the clip ranking, clips graded >= threshold positive."""
    vals, skipped = [], 0
    for _, positive, scores in _hd_pairs(gt, pred, positive_grade_threshold):
        if not positive.any():
            skipped += 1
            continue
        if scores is None:
            vals.append(0.0)
            continue
        order = _rank_clips(scores)
        vals.append(ap_from_hits(positive[order], int(positive.sum())))
    return HDResult(float(np.mean(vals)) if vals else 0.0, len(vals), skipped)


def hit_at_1(gt, pred, positive_grade_threshold: int = VERY_GOOD) -> HDResult:
    """Fraction of videos whose top-scored clip (ties to earlier) is positive."""
    vals, skipped = [], 0
    for _, positive, scores in _hd_pairs(gt, pred, positive_grade_threshold):
        if not positive.any():
            skipped += 1
            continue
        if scores is None or len(scores) == 0:
            vals.append(0.0)
            continue
        vals.append(float(positive[_rank_clips(scores)[0]]))
    return HDResult(float(np.mean(vals)) if vals else 0.0, len(vals), skipped)


def evaluate(
    gt,
    pred,
    r1_thresholds: Sequence[float] = (0.5, 0.7),
    map_thresholds: Sequence[float] = (0.5, 0.75),
    avg_thresholds: Sequence[float] = AVG_IOU_THRESHOLDS,
    positive_grade_threshold: int = VERY_GOOD,
) -> dict:
    """The full metric report as an ordered dict of floats/ints."""
    report: dict = {}
    for t in r1_thresholds:
        report[f"MR-R1@{t:g}"] = recall_at_1(gt, pred, t)
    for t in map_thresholds:
        report[f"MR-mAP@{t:g}"] = average_precision(gt, pred, t)
    report["MR-mAP@Avg"] = map_avg(gt, pred, avg_thresholds)
    report["MR-mIoU"] = mean_iou(gt, pred)
    hd = hd_map(gt, pred, positive_grade_threshold)
    hit = hit_at_1(gt, pred, positive_grade_threshold)
    report["HD-mAP"] = hd.value
    report["HD-HIT@1"] = hit.value
    report["HD-videos"] = hd.evaluated
    report["HD-skipped"] = hd.skipped
    report["num_queries"] = len(_pair(gt, pred))
    return report
