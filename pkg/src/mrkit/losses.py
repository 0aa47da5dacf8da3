"""Value-only training objectives (no gradients).

Every log is taken of ``max(x, 1e-12)`` so all losses stay finite.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import Anchor, Detection, MatchResult
from .numerics import sigmoid
from .spans import Span, centerness, giou, iou

EPS = 1e-12
MAX_GRADE = 4


@dataclass(frozen=True)
class LossWeights:
    l1: float = 10.0
    giou: float = 1.0
    ce: float = 5.0
    centerness: float = 1.0
    iou: float = 1.0
    detr: float = 1.0
    atss: float = 1.0
    hl: float = 1.0
    aux: float = 1.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss weight {k} must be finite and >= 0, got {v}")

    def scaled(self, c: float) -> "LossWeights":
        return LossWeights(**{k: v * c for k, v in self.__dict__.items()})


@dataclass(frozen=True)
class SaliencySupervision:
    """Per-clip grades (0-4). ``negative`` marks a mismatched text-video pair."""

    grades: tuple[int, ...]
    negative: bool = False

    def __post_init__(self):
        g = tuple(int(x) for x in self.grades)
        if any(x < 0 or x > MAX_GRADE for x in g):
            raise ValueError(f"grades must lie in 0..{MAX_GRADE}")
        object.__setattr__(self, "grades", g)


def _log(x):
    return np.log(np.maximum(x, EPS))


def bce(prob, target) -> np.ndarray:
    """Elementwise binary cross-entropy of probabilities against targets."""
    p = np.asarray(prob, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    return -(t * _log(p) + (1.0 - t) * _log(1.0 - p))


def _scores(scores, sup: SaliencySupervision) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.shape[0] != len(sup.grades):
        raise ValueError(f"{s.shape[0]} scores for {len(sup.grades)} grades")
    return s


# ---------------------------------------------------------------- highlight detection

def margin_ranking_loss(scores, sup: SaliencySupervision, margin: float = 0.2) -> float:
    """Mean hinge ``max(0, margin + s_low - s_high)`` over all cross-grade pairs."""
    s = _scores(scores, sup)
    g = np.asarray(sup.grades)
    hi, lo = np.nonzero(g[:, None] > g[None, :])
    if hi.size == 0:
        warnings.warn("margin ranking loss: no cross-grade pair, returning 0", RuntimeWarning)
        return 0.0
    return float(np.maximum(0.0, margin + s[lo] - s[hi]).mean())


def _logsumexp(x: np.ndarray) -> float:
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def rank_contrastive_loss(scores, sup: SaliencySupervision, temperature: float = 0.5) -> float:
    """Average over grade levels g >= 1 of ``-log(sum_pos e^{s/t} / sum_all e^{s/t})``.

    Positives at level g are the clips graded >= g; levels without positives
    are skipped.
    """
    s = _scores(scores, sup) / temperature
    g = np.asarray(sup.grades)
    if sup.negative or s.size == 0:
        return 0.0
    total_lse = _logsumexp(s)
    terms = []
    for level in range(1, MAX_GRADE + 1):
        pos = g >= level
        if pos.any():
            terms.append(total_lse - _logsumexp(s[pos]))
    return float(np.mean(terms)) if terms else 0.0


def saliency_bce(scores, sup: SaliencySupervision) -> tuple[float, float]:
    """``(pos_loss, neg_loss)``; one of them is 0 depending on ``sup.negative``."""
    s = _scores(scores, sup)
    if s.size == 0:
        return 0.0, 0.0
    prob = sigmoid(s)
    if sup.negative:
        return 0.0, float(bce(prob, 0.0).mean())
    target = (np.asarray(sup.grades) >= 1).astype(np.float64)
    return float(bce(prob, target).mean()), 0.0


def highlight_loss(scores, sup: SaliencySupervision, margin: float = 0.2, temperature: float = 0.5) -> float:
    pos, neg = saliency_bce(scores, sup)
    if sup.negative:
        return neg
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        marg = margin_ranking_loss(scores, sup, margin)
    return marg + rank_contrastive_loss(scores, sup, temperature) + pos + neg


# ---------------------------------------------------------------- moment retrieval

def _l1_cw(a: Span, b: Span, duration: float) -> float:
    return (abs(a.center - b.center) + abs(a.length - b.length)) / duration


def detr_loss_terms(
    dets: Sequence[Detection],
    gts: Sequence[Span],
    match: MatchResult,
    duration: float,
    iou_targets: Sequence[float] | None = None,
) -> dict[str, float]:
    """Unweighted DETR-head terms.

    ``l1``, ``giou`` and ``iou`` average over matched pairs; ``ce`` averages
    over every detection with label 1 for matched and 0 for unmatched ones.
    ``iou_targets`` (one per pair) default to the realised pair IoUs.
    """
    pairs = list(match.pairs)
    if iou_targets is not None and len(iou_targets) != len(pairs):
        raise ValueError(f"{len(iou_targets)} IoU targets for {len(pairs)} pairs")
    out = {"l1": 0.0, "giou": 0.0, "ce": 0.0, "iou": 0.0}
    if pairs:
        out["l1"] = float(np.mean([_l1_cw(dets[i].span, gts[j], duration) for i, j in pairs]))
        out["giou"] = float(np.mean([1.0 - giou(dets[i].span, gts[j]) for i, j in pairs]))
        targets = (
            [iou(dets[i].span, gts[j]) for i, j in pairs] if iou_targets is None else list(iou_targets)
        )
        preds = [dets[i].pred_iou for i, _ in pairs]
        out["iou"] = float(bce(preds, targets).mean())
    if dets:
        labels = np.zeros(len(dets))
        for i, _ in pairs:
            labels[i] = 1.0
        out["ce"] = float(bce([d.p for d in dets], labels).mean())
    return out


def detr_loss(
    dets: Sequence[Detection],
    gts: Sequence[Span],
    match: MatchResult,
    duration: float,
    weights: LossWeights = LossWeights(),
    iou_targets: Sequence[float] | None = None,
) -> float:
    t = detr_loss_terms(dets, gts, match, duration, iou_targets)
    return weights.l1 * t["l1"] + weights.giou * t["giou"] + weights.ce * t["ce"] + weights.iou * t["iou"]


@dataclass(frozen=True)
class AtssPrediction:
    """Regression/classification output of the ATSS head for one anchor."""

    span: Span
    p: float
    centerness: float


def atss_loss_terms(
    anchors: Sequence[Anchor],
    assignment: Sequence[Sequence[int]],
    preds: Sequence[AtssPrediction],
    gts: Sequence[Span],
    duration: float,
) -> dict[str, float]:
    if len(preds) != len(anchors):
        raise ValueError(f"{len(preds)} predictions for {len(anchors)} anchors")
    positives = [(a, g) for g, idx in enumerate(assignment) for a in idx]
    out = {"l1": 0.0, "giou": 0.0, "ce": 0.0, "centerness": 0.0}
    if positives:
        out["l1"] = float(np.mean([_l1_cw(preds[a].span, gts[g], duration) for a, g in positives]))
        out["giou"] = float(np.mean([1.0 - giou(preds[a].span, gts[g]) for a, g in positives]))
        c_t = [centerness(anchors[a].center, gts[g]) for a, g in positives]
        c_p = [preds[a].centerness for a, _ in positives]
        out["centerness"] = float(bce(c_p, c_t).mean())
    if preds:
        labels = np.zeros(len(preds))
        for a, _ in positives:
            labels[a] = 1.0
        out["ce"] = float(bce([p.p for p in preds], labels).mean())
    return out


def atss_loss(
    anchors: Sequence[Anchor],
    assignment: Sequence[Sequence[int]],
    preds: Sequence[AtssPrediction],
    gts: Sequence[Span],
    duration: float,
    weights: LossWeights = LossWeights(),
) -> float:
    t = atss_loss_terms(anchors, assignment, preds, gts, duration)
    return (
        weights.l1 * t["l1"]
        + weights.giou * t["giou"]
        + weights.ce * t["ce"]
        + weights.centerness * t["centerness"]
    )


# ---------------------------------------------------------------- auxiliary

def alignment_loss(moment_feature, sentence) -> float:
    """``1 - cos`` between the pooled moment feature and the sentence vector."""
    a = np.asarray(moment_feature, dtype=np.float64).ravel()
    b = np.asarray(sentence, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("alignment loss needs non-zero vectors")
    return float(1.0 - (a @ b) / (na * nb))


def moment_feature(features, labels) -> np.ndarray:
    """Mean of the feature rows whose clip label is 1."""
    f = np.asarray(features, dtype=np.float64)
    mask = np.asarray(labels, dtype=bool)
    if not mask.any():
        raise ValueError("no clip inside the moment")
    return f[mask].mean(axis=0)


def aux_loss_terms(clip_logits, clip_labels, moment_feat=None, sentence=None) -> dict[str, float]:
    logits = np.asarray(clip_logits, dtype=np.float64).ravel()
    labels = np.asarray(clip_labels, dtype=np.float64).ravel()
    if logits.shape != labels.shape:
        raise ValueError(f"{logits.size} logits for {labels.size} labels")
    out = {"bce": float(bce(sigmoid(logits), labels).mean()) if logits.size else 0.0, "align": 0.0}
    if moment_feat is not None and sentence is not None:
        out["align"] = alignment_loss(moment_feat, sentence)
    return out


def aux_loss(clip_logits, clip_labels, moment_feat=None, sentence=None) -> float:
    t = aux_loss_terms(clip_logits, clip_labels, moment_feat, sentence)
    return t["bce"] + t["align"]


# ---------------------------------------------------------------- total

@dataclass(frozen=True)
class LossParts:
    atss: float = 0.0
    detr: float = 0.0
    hl: float = 0.0
    aux: float = 0.0


def total_objective(parts: LossParts, w: LossWeights = LossWeights()) -> float:
    return w.atss * parts.atss + w.detr * parts.detr + w.hl * parts.hl + w.aux * parts.aux
