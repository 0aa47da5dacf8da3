"""Inference: embeddings + weights -> ranked windows and clip saliency.

Detection heads at this scale are linear: anchor features are the mean of
the globally amplified clip features under the anchor. The ATSS-style head
scores anchors as-is; the DETR-style head regresses a (center, log-width)
offset from each anchor. Both are fused by weighted span fusion.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotate import EmbeddingRecord, clip_mask
from .config import Config
from .detector import Detection, Source, combined_confidence, generate_anchors, weighted_fuse
from .metrics import Prediction
from .numerics import sigmoid
from .rng import Xoshiro256
from .saliency import (
    AttentionWeights,
    EncoderLayerWeights,
    GateAxis,
    PoolingLayer,
    PoolingWeights,
    ProjectionSet,
    SaliencyModel,
    forward,
)
from .spans import Span

ENCODER_PARTS = ("w_q", "w_k", "w_v", "w_o", "w1", "b1", "w2", "b2", "ln1_g", "ln1_b", "ln2_g", "ln2_b")
REG_CLAMP = 4.0


class WeightsError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    dim: int
    hidden_dim: int
    pooling_layers: int = 2
    cross_layers: int = 2
    encoder_layers: int = 3
    ffn_dim: int | None = None

    @property
    def ffn(self) -> int:
        return self.ffn_dim or 2 * self.hidden_dim

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "hidden_dim": self.hidden_dim,
            "pooling_layers": self.pooling_layers,
            "cross_layers": self.cross_layers,
            "encoder_layers": self.encoder_layers,
            "ffn_dim": self.ffn,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        try:
            kwargs = {k: int(d[k]) for k in ("dim", "hidden_dim")}
            for k in ("pooling_layers", "cross_layers", "encoder_layers", "ffn_dim"):
                if d.get(k) is not None:
                    kwargs[k] = int(d[k])
            arch = cls(**kwargs)
        except (KeyError, TypeError, ValueError) as e:
            raise WeightsError(f"bad weights config: {e}") from None
        if arch.dim < 1 or arch.hidden_dim < 1 or arch.pooling_layers < 1 or arch.cross_layers < 1:
            raise WeightsError("weights config dims and layer counts must be >= 1")
        return arch


def expected_tensors(arch: ArchConfig) -> list[tuple[str, str, tuple[int, ...]]]:
    """Canonical ``(name, role, shape)`` list; also the blob order."""
    d, h, f = arch.dim, arch.hidden_dim, arch.ffn
    out: list[tuple[str, str, tuple[int, ...]]] = []
    for i in range(arch.pooling_layers):
        out += [
            (f"pooling.{i}.query", "pooling", (d,)),
            (f"pooling.{i}.w_k", "pooling", (d, d)),
            (f"pooling.{i}.w_v", "pooling", (d, d)),
        ]
    out.append(("local.alpha_beta", "local", (2,)))
    for i in range(arch.cross_layers):
        d_in = d if i == 0 else h
        out += [
            (f"cross.{i}.w_q", "w_q", (d_in, h)),
            (f"cross.{i}.w_k", "w_k", (d, h)),
            (f"cross.{i}.w_v", "w_v", (d, h)),
        ]
    enc_shapes = {
        "w_q": (h, h), "w_k": (h, h), "w_v": (h, h), "w_o": (h, h),
        "w1": (h, f), "b1": (f,), "w2": (f, h), "b2": (h,),
        "ln1_g": (h,), "ln1_b": (h,), "ln2_g": (h,), "ln2_b": (h,),
    }
    for i in range(arch.encoder_layers):
        out += [(f"encoder.{i}.{p}", "encoder-layer", enc_shapes[p]) for p in ENCODER_PARTS]
    out += [
        ("saliency_head.w", "saliency-head", (h, 1)),
        ("saliency_head.b", "saliency-head", (1,)),
        ("det.cls.w", "detector-head", (h, 1)),
        ("det.cls.b", "detector-head", (1,)),
        ("det.iou.w", "detector-head", (h, 1)),
        ("det.iou.b", "detector-head", (1,)),
        ("det.reg.w", "detector-head", (h, 2)),
        ("det.reg.b", "detector-head", (2,)),
    ]
    return out


def random_tensors(arch: ArchConfig, seed: int, scale: float | None = None) -> list[tuple[str, str, np.ndarray]]:
    """Deterministic synthetic weights (layer-norm gains 1, biases 0, alpha 4)."""
    rng = Xoshiro256(seed)
    out = []
    for name, role, shape in expected_tensors(arch):
        part = name.rsplit(".", 1)[-1]
        if name == "local.alpha_beta":
            arr = np.array([4.0, 0.0])
        elif part in ("ln1_g", "ln2_g"):
            arr = np.ones(shape)
        elif part in ("ln1_b", "ln2_b", "b1", "b2", "b"):
            arr = np.zeros(shape)
        else:
            fan_in = shape[0]
            s = scale if scale is not None else 1.0 / math.sqrt(fan_in)
            n = int(np.prod(shape))
            # float32-representable so file round trips are exact
            arr = np.array([rng.normal() * s for _ in range(n)], dtype=np.float32).astype(np.float64).reshape(shape)
        out.append((name, role, arr))
    return out


@dataclass(frozen=True)
class InferenceModel:
    arch: ArchConfig
    saliency: SaliencyModel
    cls_w: np.ndarray
    cls_b: float
    iou_w: np.ndarray
    iou_b: float
    reg_w: np.ndarray
    reg_b: np.ndarray


def build_model(config: dict, tensors: dict, gate_axis: GateAxis = GateAxis.VIDEO) -> InferenceModel:
    arch = ArchConfig.from_dict(config)
    t: dict[str, np.ndarray] = {}
    for name, role, shape in expected_tensors(arch):
        if name not in tensors:
            raise WeightsError(f"missing tensor '{name}'")
        got_role, arr = tensors[name]
        if got_role != role:
            raise WeightsError(f"tensor '{name}' has role '{got_role}', expected '{role}'")
        if tuple(arr.shape) != shape:
            raise WeightsError(f"tensor '{name}' has shape {tuple(arr.shape)}, expected {shape}")
        t[name] = arr
    extra = set(tensors) - set(t)
    if extra:
        raise WeightsError(f"unexpected tensors: {sorted(extra)}")
    pooling = PoolingWeights(tuple(
        PoolingLayer(t[f"pooling.{i}.query"], t[f"pooling.{i}.w_k"], t[f"pooling.{i}.w_v"])
        for i in range(arch.pooling_layers)
    ))
    alpha, beta = t["local.alpha_beta"].tolist()
    cross = tuple(
        ProjectionSet(t[f"cross.{i}.w_q"], t[f"cross.{i}.w_k"], t[f"cross.{i}.w_v"])
        for i in range(arch.cross_layers)
    )
    enc = tuple(
        EncoderLayerWeights(**{p: t[f"encoder.{i}.{p}"] for p in ENCODER_PARTS})
        for i in range(arch.encoder_layers)
    )
    sal = SaliencyModel(
        pooling, AttentionWeights(alpha, beta), cross, enc,
        t["saliency_head.w"], float(t["saliency_head.b"][0]), GateAxis(gate_axis),
    )
    return InferenceModel(
        arch, sal,
        t["det.cls.w"], float(t["det.cls.b"][0]),
        t["det.iou.w"], float(t["det.iou.b"][0]),
        t["det.reg.w"], t["det.reg.b"],
    )


def _pool_under(features: np.ndarray, span: Span, clip_len: float) -> np.ndarray:
    mask = clip_mask(features.shape[0], clip_len, [span])
    if not mask.any():
        idx = min(int(span.center // clip_len), features.shape[0] - 1)
        return features[idx]
    return features[mask].mean(axis=0)


def infer_record(rec: EmbeddingRecord, model: InferenceModel, config: Config) -> Prediction:
    clips = np.asarray(rec.clip_embeddings, dtype=np.float64)
    if clips.shape[1] != model.arch.dim:
        raise WeightsError(
            f"record {rec.id!r}: embedding dim {clips.shape[1]} but weights expect {model.arch.dim}"
        )
    text = rec.text_tokens
    if text.shape[1] != model.arch.dim:
        raise WeightsError(
            f"record {rec.id!r}: text embedding dim {text.shape[1]} but weights expect {model.arch.dim}"
        )
    out = forward(clips, text, model.saliency)
    feats = out.amplified_global
    duration = rec.duration
    anchors = generate_anchors(rec.num_clips, rec.clip_len, config.levels(rec.clip_len))
    pooled = np.stack([_pool_under(feats, a.span, rec.clip_len) for a in anchors])
    p = sigmoid(pooled @ model.cls_w[:, 0] + model.cls_b)
    q = sigmoid(pooled @ model.iou_w[:, 0] + model.iou_b)
    reg = np.clip(pooled @ model.reg_w + model.reg_b, -REG_CLAMP, REG_CLAMP)
    dets: list[Detection] = []
    for k, a in enumerate(anchors):
        conf = combined_confidence(float(p[k]), float(q[k]), config.conf_alpha)
        dets.append(Detection(a.span, float(p[k]), float(q[k]), Source.ATSS, conf))
        width = a.span.length * math.exp(float(reg[k, 1]))
        center = a.center + float(reg[k, 0]) * a.span.length
        s = min(max(center - width / 2, 0.0), duration)
        e = min(max(center + width / 2, 0.0), duration)
        dets.append(Detection(Span(s, e), float(p[k]), float(q[k]), Source.DETR, conf))
    fused = weighted_fuse(dets, config.wbf_threshold)
    windows = tuple((d.span, d.confidence) for d in fused[: config.max_windows])
    return Prediction(rec.id, windows, tuple(out.s_global.tolist()))


def infer_many(
    records: Sequence[EmbeddingRecord], model: InferenceModel, config: Config, threads: int = 1
) -> list[Prediction]:
    if threads <= 1:
        return [infer_record(r, model, config) for r in records]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: infer_record(r, model, config), records))
