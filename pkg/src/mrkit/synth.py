"""Deterministic synthetic fixtures: embeddings, planted ground truth, weights."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotate import AnnotationRecord, EmbeddingRecord
from .io import write_annotations, write_embeddings, write_weights
from .pipeline import ArchConfig, random_tensors
from .rng import Xoshiro256
from .spans import Span

FIXTURE_FILES = ("embeddings.jsonl", "gt.jsonl", "weights.json", "weights.bin")
WEIGHT_SEED_OFFSET = 0x5EED


@dataclass(frozen=True)
class SynthSizes:
    num_videos: int = 8
    min_clips: int = 12
    max_clips: int = 24
    dim: int = 16
    hidden_dim: int = 16
    text_tokens: int = 4
    clip_len: float = 2.0
    encoder_layers: int = 1


def _r(x: float) -> float:
    return round(x, 6)


def _grade(r: float) -> int:
    if r > 1.35:
        return 4
    if r > 1.1:
        return 3
    if r > 0.85:
        return 2
    return 1


def synth_records(seed: int, sizes: SynthSizes = SynthSizes()):
    """Return ``(embedding records, planted ground-truth annotations)``."""
    rng = Xoshiro256(seed)
    d = sizes.dim
    recs, gts = [], []
    for k in range(sizes.num_videos):
        n_clips = rng.integers(sizes.min_clips, sizes.max_clips + 1)
        caption = [rng.normal() for _ in range(d)]
        # one or two non-overlapping planted windows, in clip units
        n_win = 1 + rng.integers(0, 2)
        max_len = max(2, n_clips // 3)
        windows: list[tuple[int, int]] = []
        lo = 0
        for w in range(n_win):
            room = n_clips - lo - (n_win - w - 1) * (max_len + 1)
            if room < 2:
                break
            length = rng.integers(2, min(max_len, room) + 1)
            start = lo + rng.integers(0, room - length + 1)
            windows.append((start, start + length))
            lo = start + length + 1
        relevance = [0.0] * n_clips
        for a, b in windows:
            for i in range(a, b):
                relevance[i] = rng.uniform(0.6, 1.6)
        clips = []
        for i in range(n_clips):
            noise = 0.5 if relevance[i] > 0 else 1.0
            clips.append([_r(relevance[i] * caption[j] + noise * rng.normal()) for j in range(d)])
        text = [[_r(caption[j] + 0.3 * rng.normal()) for j in range(d)] for _ in range(sizes.text_tokens)]
        grades = [_grade(r) if r > 0 else 0 for r in relevance]
        top = max(range(n_clips), key=lambda i: relevance[i])
        grades[top] = 4
        cl = sizes.clip_len
        spans = tuple(Span(a * cl, b * cl) for a, b in windows)
        rid = f"synth-{seed}-{k:03d}"
        query = f"synthetic query {k}"
        recs.append(EmbeddingRecord(
            rid,
            np.array(clips),
            np.array([[_r(x) for x in caption]]),
            cl,
            spans[0],
            np.array(text),
            query,
        ))
        gts.append(AnnotationRecord(rid, n_clips * cl, spans, tuple(grades), query))
    return recs, gts


def synth_arch(sizes: SynthSizes = SynthSizes()) -> ArchConfig:
    return ArchConfig(sizes.dim, sizes.hidden_dim, 2, 2, sizes.encoder_layers, 2 * sizes.hidden_dim)


def write_fixtures(out_dir, seed: int, sizes: SynthSizes = SynthSizes()) -> dict[str, str]:
    """Write the fixture directory and return ``{file name: sha256}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs, gts = synth_records(seed, sizes)
    write_embeddings(out / "embeddings.jsonl", recs)
    write_annotations(out / "gt.jsonl", gts)
    arch = synth_arch(sizes)
    write_weights(out / "weights.json", random_tensors(arch, seed + WEIGHT_SEED_OFFSET), arch.to_dict())
    return {name: sha256_file(out / name) for name in FIXTURE_FILES}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
