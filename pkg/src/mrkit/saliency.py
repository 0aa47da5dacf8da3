"""Forward pass of the saliency branch.

Covers the sentence pooling encoder, local (cosine) saliency, saliency-guided
cross attention (SGCA), a pre-norm transformer encoder layer, the saliency
amplifier and the local-to-global saliency refinement. Weights are supplied
by the caller, either loaded from a weights file or generated synthetically.
All attention is single-head and unmasked.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import as_matrix, l2_normalize_rows, layer_norm, matmul, sigmoid, softmax_rows


class GateAxis(str, enum.Enum):
    """Which axis the SGCA sigmoid gate is indexed along.

    ``TEXT`` indexes the gate by key (text token) position, ``VIDEO`` by the
    query (video clip) row, giving each clip a single relevance gate.
    """

    TEXT = "text"
    VIDEO = "video"


@dataclass(frozen=True)
class AttentionWeights:
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")


@dataclass(frozen=True)
class ProjectionSet:
    """Query/key/value projections onto a shared hidden size ``h``."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        h = {np.shape(self.w_q)[1], np.shape(self.w_k)[1], np.shape(self.w_v)[1]}
        if len(h) != 1:
            raise ValueError(
                f"projections disagree on hidden dim: q{np.shape(self.w_q)} "
                f"k{np.shape(self.w_k)} v{np.shape(self.w_v)}"
            )

    @property
    def hidden_dim(self) -> int:
        return int(np.shape(self.w_q)[1])


@dataclass(frozen=True)
class PoolingLayer:
    query: np.ndarray  # (d,)
    w_k: np.ndarray  # (d, d)
    w_v: np.ndarray  # (d, d)


@dataclass(frozen=True)
class PoolingWeights:
    layers: tuple[PoolingLayer, ...]

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("pooling encoder needs at least one layer")


@dataclass(frozen=True)
class EncoderLayerWeights:
    """Weights of one pre-norm self-attention + feed-forward block."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray


def attention_pooling(tokens, layer: PoolingLayer, query=None) -> np.ndarray:
    """Pool ``tokens`` (N x d) into one 1 x d vector with a single query."""
    x = as_matrix(tokens, "tokens")
    if x.shape[0] == 0:
        raise ValueError("cannot pool an empty token set")
    d = x.shape[1]
    q = as_matrix(layer.query if query is None else query, "query")
    keys = matmul(x, layer.w_k)
    values = matmul(x, layer.w_v)
    attn = softmax_rows(matmul(q, keys.T) / math.sqrt(d))
    return matmul(attn, values)


def pooling_encoder(text_tokens, w: PoolingWeights) -> np.ndarray:
    """Stacked attention pooling producing the sentence vector (1 x d_t).

    The first layer attends with its own learnable query; each later layer
    attends with the previous pooled vector plus its learnable query.
    """
    x = as_matrix(text_tokens, "text_tokens")
    if x.shape[0] == 0:
        raise ValueError("cannot pool an empty token set")
    pooled = None
    for layer in w.layers:
        q = as_matrix(layer.query)
        if pooled is not None:
            q = pooled + q
        pooled = attention_pooling(x, layer, q)
    return pooled


def local_saliency(sentence, clips, w: AttentionWeights) -> np.ndarray:
    """``alpha * cos(sentence, clip_i) + beta`` for every clip; shape (L,)."""
    s = as_matrix(sentence, "sentence")
    c = as_matrix(clips, "clips")
    if s.shape[0] != 1:
        raise ValueError(f"sentence must be a single row, got {s.shape}")
    if s.shape[1] != c.shape[1]:
        raise ValueError(f"feature dims differ: sentence {s.shape}, clips {c.shape}")
    cos = matmul(l2_normalize_rows(s), l2_normalize_rows(c).T)[0]
    return w.alpha * cos + w.beta


def _gate(s_local, gate_axis: GateAxis, n_clips: int, n_text: int) -> np.ndarray:
    s = np.asarray(s_local, dtype=np.float64).ravel()
    axis = GateAxis(gate_axis)
    expected = n_clips if axis is GateAxis.VIDEO else n_text
    if s.shape[0] != expected:
        raise ValueError(
            f"gate along {axis.value} axis needs {expected} scores, got {s.shape[0]}"
        )
    g = sigmoid(s)
    return g[:, None] if axis is GateAxis.VIDEO else g[None, :]


def sgca_weights(
    clips, text, s_local, proj: ProjectionSet, gate_axis: GateAxis = GateAxis.VIDEO
) -> np.ndarray:
    """The gated attention matrix W (L x N) used by :func:`sgca`."""
    q = matmul(clips, proj.w_q)
    k = matmul(text, proj.w_k)
    attn = softmax_rows(matmul(q, k.T) / math.sqrt(proj.hidden_dim))
    return attn * _gate(s_local, gate_axis, q.shape[0], k.shape[0])


def sgca(
    clips, text, s_local, proj: ProjectionSet, gate_axis: GateAxis = GateAxis.VIDEO
) -> np.ndarray:
    """Saliency-guided cross attention from video clips (queries) to text."""
    w = sgca_weights(clips, text, s_local, proj, gate_axis)
    return matmul(w, matmul(text, proj.w_v))


def cross_attention(clips, text, proj: ProjectionSet) -> np.ndarray:
    """Ungated softmax cross attention, for comparison with :func:`sgca`."""
    q = matmul(clips, proj.w_q)
    k = matmul(text, proj.w_k)
    attn = softmax_rows(matmul(q, k.T) / math.sqrt(proj.hidden_dim))
    return matmul(attn, matmul(text, proj.w_v))


def cross_modal_encoder(
    clips,
    text,
    s_local,
    layers: Sequence[ProjectionSet],
    gate_axis: GateAxis = GateAxis.VIDEO,
) -> np.ndarray:
    """Stack of SGCA layers; each adds the attended text to its projected queries.

    ``x <- x @ w_q + sgca(x, text)``. The first layer maps d_v to h, later
    layers h to h.
    """
    x = as_matrix(clips, "clips")
    for proj in layers:
        x = matmul(x, proj.w_q) + sgca(x, text, s_local, proj, gate_axis)
    return x


def encoder_layer(tokens, w: EncoderLayerWeights, eps: float = 1e-5) -> np.ndarray:
    """Pre-norm block: ``x + Attn(LN(x)) W_o`` then ``x + FFN(LN(x))``."""
    x = as_matrix(tokens, "tokens")
    h = layer_norm(x, w.ln1_g, w.ln1_b, eps)
    q = matmul(h, w.w_q)
    k = matmul(h, w.w_k)
    v = matmul(h, w.w_v)
    attn = softmax_rows(matmul(q, k.T) / math.sqrt(q.shape[1]))
    x = x + matmul(matmul(attn, v), w.w_o)
    h = layer_norm(x, w.ln2_g, w.ln2_b, eps)
    hidden = np.maximum(matmul(h, w.w1) + np.asarray(w.b1).reshape(1, -1), 0.0)
    return x + matmul(hidden, w.w2) + np.asarray(w.b2).reshape(1, -1)


def transformer_encoder(tokens, layers: Sequence[EncoderLayerWeights]) -> np.ndarray:
    x = as_matrix(tokens, "tokens")
    for w in layers:
        x = encoder_layer(x, w)
    return x


def saliency_amplify(features, s) -> np.ndarray:
    """``F + F * sigmoid(s)`` applied row-wise."""
    f = as_matrix(features, "features")
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.shape[0] != f.shape[0]:
        raise ValueError(f"{f.shape[0]} feature rows but {s.shape[0]} saliency scores")
    return f * (1.0 + sigmoid(s))[:, None]


def global_saliency(s_local, amplified_features, head_w, head_b: float = 0.0) -> np.ndarray:
    """Local scores plus a per-clip linear offset of the amplified features."""
    s = np.asarray(s_local, dtype=np.float64).ravel()
    f = as_matrix(amplified_features, "amplified_features")
    w = as_matrix(np.asarray(head_w, dtype=np.float64).reshape(-1, 1), "head_w")
    if f.shape[0] != s.shape[0]:
        raise ValueError(f"{f.shape[0]} feature rows but {s.shape[0]} saliency scores")
    offset = matmul(f, w)[:, 0] + float(head_b)
    return s + offset


@dataclass(frozen=True)
class SaliencyModel:
    """All weights for the saliency branch."""

    pooling: PoolingWeights
    local: AttentionWeights
    cross_layers: tuple[ProjectionSet, ...]
    encoder_layers: tuple[EncoderLayerWeights, ...]
    head_w: np.ndarray
    head_b: float = 0.0
    gate_axis: GateAxis = GateAxis.VIDEO

    @property
    def hidden_dim(self) -> int:
        return self.cross_layers[-1].hidden_dim if self.cross_layers else np.shape(self.head_w)[0]


@dataclass
class SaliencyOutputs:
    sentence: np.ndarray
    s_local: np.ndarray
    cross: np.ndarray
    encoded: np.ndarray
    amplified_local: np.ndarray
    s_global: np.ndarray
    amplified_global: np.ndarray
    extras: dict = field(default_factory=dict)


def forward(clips, text_tokens, model: SaliencyModel, gate_axis: GateAxis | None = None) -> SaliencyOutputs:
    """Run the full chain from embeddings to globally amplified features."""
    axis = model.gate_axis if gate_axis is None else GateAxis(gate_axis)
    clips = as_matrix(clips, "clips")
    text = as_matrix(text_tokens, "text_tokens")
    sentence = pooling_encoder(text, model.pooling)
    s_local = local_saliency(sentence, clips, model.local)
    if axis is GateAxis.TEXT:
        # text-indexed gate scores each text token against the sentence
        gate_scores = local_saliency(sentence, text, model.local)
    else:
        gate_scores = s_local
    cross = cross_modal_encoder(clips, text, gate_scores, model.cross_layers, axis)
    encoded = transformer_encoder(cross, model.encoder_layers)
    amp_local = saliency_amplify(encoded, s_local)
    s_global = global_saliency(s_local, amp_local, model.head_w, model.head_b)
    amp_global = saliency_amplify(encoded, s_global)
    return SaliencyOutputs(sentence, s_local, cross, encoded, amp_local, s_global, amp_global)
