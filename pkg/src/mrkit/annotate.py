"""Automatic moment/highlight annotation from clip and caption embeddings.

Clips whose caption similarity clears a threshold derived from the original
positive window form the new windows; those clips are then graded 1-4 by
where their similarity falls relative to the positive clips' mean and spread.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import as_matrix, l2_normalize_rows
from .spans import Span


class DegenerateRecordError(ValueError):
    """A record that cannot be annotated (zero embedding, empty window...)."""

    def __init__(self, record_id, message: str):
        super().__init__(f"record {record_id!r}: {message}")
        self.record_id = record_id


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    clip_embeddings: np.ndarray
    caption_embedding: np.ndarray
    clip_len: float
    orig_window: Span | None = None
    text_embeddings: np.ndarray | None = None
    query: str | None = None

    @property
    def num_clips(self) -> int:
        return int(np.shape(self.clip_embeddings)[0])

    @property
    def duration(self) -> float:
        return self.num_clips * self.clip_len

    @property
    def text_tokens(self) -> np.ndarray:
        if self.text_embeddings is not None:
            return as_matrix(self.text_embeddings)
        return as_matrix(self.caption_embedding)


@dataclass(frozen=True)
class AnnotationRecord:
    qid: str
    duration: float
    relevant_windows: tuple[Span, ...]
    saliency_grades: tuple[int, ...]
    query: str | None = None

    def positive_mask(self, clip_len: float) -> np.ndarray:
        return clip_mask(len(self.saliency_grades), clip_len, self.relevant_windows)


def clip_midpoints(num_clips: int, clip_len: float) -> np.ndarray:
    return (np.arange(num_clips) + 0.5) * clip_len


def clip_mask(num_clips: int, clip_len: float, windows: Iterable[Span]) -> np.ndarray:
    """True for clips whose midpoint lies inside any window."""
    mid = clip_midpoints(num_clips, clip_len)
    mask = np.zeros(num_clips, dtype=bool)
    for w in windows:
        mask |= (mid >= w.start) & (mid <= w.end)
    return mask


def clip_similarities(rec: EmbeddingRecord) -> np.ndarray:
    """Cosine similarity of each clip embedding with the caption embedding."""
    try:
        clips = l2_normalize_rows(rec.clip_embeddings)
    except ValueError as e:
        raise DegenerateRecordError(rec.id, f"clip embedding: {e}") from None
    try:
        cap = l2_normalize_rows(rec.caption_embedding)
    except ValueError:
        raise DegenerateRecordError(rec.id, "caption embedding has zero norm") from None
    if cap.shape[1] != clips.shape[1]:
        raise DegenerateRecordError(
            rec.id, f"caption dim {cap.shape[1]} != clip dim {clips.shape[1]}"
        )
    return np.clip(clips @ cap[0], -1.0, 1.0)


def min_score(similarities, original_window: Span, clip_len: float) -> float:
    """``mean - 3 * std`` (population) over clips inside the original window."""
    s = np.asarray(similarities, dtype=np.float64)
    mask = clip_mask(s.shape[0], clip_len, [original_window])
    if not mask.any():
        raise ValueError(
            f"window [{original_window.start}, {original_window.end}] contains no clip midpoint"
        )
    pos = s[mask]
    return float(pos.mean() - 3.0 * pos.std())


def build_positive_intervals(
    similarities, s_min: float, clip_len: float, min_run: int = 1
) -> list[Span]:
    """Maximal runs of consecutive clips with similarity >= ``s_min``."""
    s = np.asarray(similarities, dtype=np.float64)
    out: list[Span] = []
    run_start = None
    for i, ok in enumerate(np.append(s >= s_min, False)):
        if ok and run_start is None:
            run_start = i
        elif not ok and run_start is not None:
            if i - run_start >= min_run:
                out.append(Span(run_start * clip_len, i * clip_len))
            run_start = None
    return out


def grade_clips(
    similarities, intervals: Sequence[Span], clip_len: float
) -> list[int]:
    """Grades 1-4 for clips inside ``intervals`` and 0 elsewhere.

    Boundaries are mu - 1.5 sigma, mu and mu + 1.5 sigma over the positive
    clips, upper-inclusive. Zero spread puts every positive clip in grade 3.
    """
    s = np.asarray(similarities, dtype=np.float64)
    mask = clip_mask(s.shape[0], clip_len, intervals)
    grades = np.zeros(s.shape[0], dtype=int)
    if not mask.any():
        return grades.tolist()
    pos = s[mask]
    mu, sigma = pos.mean(), pos.std()
    if sigma == 0:
        grades[mask] = 3
        return grades.tolist()
    lo, hi = mu - 1.5 * sigma, mu + 1.5 * sigma
    g = np.where(pos > hi, 4, np.where(pos > mu, 3, np.where(pos > lo, 2, 1)))
    grades[mask] = g
    return grades.tolist()


def annotate(rec: EmbeddingRecord, min_run: int = 1) -> AnnotationRecord:
    if rec.num_clips < 1:
        raise DegenerateRecordError(rec.id, "no clips")
    if rec.orig_window is None:
        raise DegenerateRecordError(rec.id, "missing original positive window")
    sims = clip_similarities(rec)
    try:
        s_min = min_score(sims, rec.orig_window, rec.clip_len)
    except ValueError as e:
        raise DegenerateRecordError(rec.id, str(e)) from None
    windows = build_positive_intervals(sims, s_min, rec.clip_len, min_run)
    grades = grade_clips(sims, windows, rec.clip_len)
    return AnnotationRecord(rec.id, rec.duration, tuple(windows), tuple(grades), rec.query)


def annotate_many(
    records: Sequence[EmbeddingRecord], min_run: int = 1, threads: int = 1
) -> list[AnnotationRecord]:
    """Annotate records, optionally in a thread pool; output keeps input order."""
    if threads <= 1:
        return [annotate(r, min_run) for r in records]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: annotate(r, min_run), records))
