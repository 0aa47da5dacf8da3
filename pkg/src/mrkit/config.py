"""Run configuration shared by the CLI commands."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .detector import MatchWeights
from .losses import LossWeights
from .saliency import GateAxis


@dataclass
class Config:
    hidden_dim: int = 256
    pooling_layers: int = 2
    cross_layers: int = 2
    encoder_layers: int = 3
    gate_axis: str = "video"
    conf_alpha: float = 0.5
    wbf_threshold: float = 0.7
    anchor_strides: list = field(default_factory=lambda: [1, 2, 4])
    anchor_multiplier: float = 4.0
    top_k: int = 9
    max_windows: int = 10
    loss_weights: dict = field(default_factory=lambda: asdict(LossWeights()))
    margin: float = 0.2
    temperature: float = 0.5
    r1_thresholds: list = field(default_factory=lambda: [0.5, 0.7])
    map_thresholds: list = field(default_factory=lambda: [0.5, 0.75])
    grade_threshold: int = 4
    min_run: int = 1

    def __post_init__(self):
        GateAxis(self.gate_axis)
        if not 0.0 <= self.conf_alpha <= 1.0:
            raise ValueError("conf_alpha must lie in [0, 1]")
        if not 0.0 < self.wbf_threshold < 1.0:
            raise ValueError("wbf_threshold must lie in (0, 1)")
        if not self.anchor_strides or any(s <= 0 for s in self.anchor_strides):
            raise ValueError("anchor_strides must be a non-empty list of positive numbers")
        for name in ("hidden_dim", "pooling_layers", "top_k", "max_windows", "min_run"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.grade_threshold <= 4:
            raise ValueError("grade_threshold must lie in 0..4")
        merged = asdict(LossWeights())
        unknown = set(self.loss_weights) - set(merged)
        if unknown:
            raise ValueError(f"unknown loss weights: {sorted(unknown)}")
        merged.update(self.loss_weights)
        LossWeights(**merged)
        self.loss_weights = merged

    @property
    def losses(self) -> LossWeights:
        return LossWeights(**self.loss_weights)

    @property
    def match(self) -> MatchWeights:
        w = self.losses
        return MatchWeights(l1=w.l1, giou=w.giou, ce=w.ce, iou=w.iou)

    def levels(self, clip_len: float) -> list[tuple[float, float]]:
        return [(s * clip_len, self.anchor_multiplier) for s in self.anchor_strides]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "Config":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
