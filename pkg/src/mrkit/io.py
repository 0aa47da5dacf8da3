"""File formats: embeddings (JSONL + optional binary sidecar), annotations,
predictions and weights.

Writers are byte-deterministic: fixed key order, compact separators and
Python's shortest round-trip float repr. Readers validate every record and
raise :class:`FormatError` naming the file, line and field.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .annotate import AnnotationRecord, EmbeddingRecord
from .metrics import GroundTruth, Prediction
from .spans import Span

SIDECAR_MAGIC = b"MRKE"
SIDECAR_VERSION = 1
_SIDECAR_HEADER = struct.Struct("<4sHII")
WEIGHTS_FORMAT = "mrkit-weights"
WEIGHTS_VERSION = 1


class FormatError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None, field: str | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.path, self.line, self.field = path, line, field


def dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False, ensure_ascii=False)


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _read_jsonl(path) -> Iterable[tuple[int, dict]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror}", path) from None
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except ValueError as e:
            raise FormatError(f"invalid JSON: {e}", path, n) from None
        if not isinstance(obj, dict):
            raise FormatError("record must be a JSON object", path, n)
        yield n, obj


def _write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")


# ---------------------------------------------------------------- field checks

class _Ctx:
    def __init__(self, path, line):
        self.path, self.line = path, line

    def fail(self, field, msg):
        raise FormatError(msg, self.path, self.line, field)

    def get(self, obj, key, required=True):
        if key not in obj:
            if required:
                self.fail(key, "missing")
            return None
        return obj[key]

    def number(self, x, field, lo=None):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            self.fail(field, f"expected a number, got {type(x).__name__}")
        x = float(x)
        if not math.isfinite(x):
            self.fail(field, "non-finite value")
        if lo is not None and x < lo:
            self.fail(field, f"must be >= {lo}")
        return x

    def string(self, x, field):
        if not isinstance(x, str):
            self.fail(field, f"expected a string, got {type(x).__name__}")
        return x

    def vector(self, x, field):
        if not isinstance(x, list) or not x:
            self.fail(field, "expected a non-empty list of numbers")
        return [self.number(v, f"{field}[{i}]") for i, v in enumerate(x)]

    def matrix(self, x, field):
        if not isinstance(x, list) or not x:
            self.fail(field, "expected a non-empty list of rows")
        rows = [self.vector(r, f"{field}[{i}]") for i, r in enumerate(x)]
        d = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != d:
                self.fail(f"{field}[{i}]", f"row length {len(r)} differs from {d}")
        return np.array(rows, dtype=np.float64)

    def span(self, x, field, with_score=False):
        n = 3 if with_score else 2
        if not isinstance(x, list) or len(x) != n:
            self.fail(field, f"expected [{'start, end, score' if with_score else 'start, end'}]")
        vals = [self.number(v, f"{field}[{i}]") for i, v in enumerate(x)]
        try:
            s = Span(vals[0], vals[1])
        except ValueError as e:
            self.fail(field, str(e))
        return (s, vals[2]) if with_score else s


def _finite_matrix(a: np.ndarray, path, field) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0].tolist()
        raise FormatError(f"non-finite value at {bad}", path, None, field)
    return a


# ---------------------------------------------------------------- sidecar

def write_sidecar(path, matrix) -> None:
    """Little-endian float32 payload behind an ``MRKE`` header."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("sidecar payload must be 2-D")
    _finite_matrix(m, path, "payload")
    rows, cols = m.shape
    with open(path, "wb") as f:
        f.write(_SIDECAR_HEADER.pack(SIDECAR_MAGIC, SIDECAR_VERSION, rows, cols))
        f.write(m.astype("<f4").tobytes())


def read_sidecar(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read sidecar: {e.strerror}", path) from None
    if len(data) < _SIDECAR_HEADER.size:
        raise FormatError(
            f"truncated header: expected {_SIDECAR_HEADER.size} bytes, got {len(data)}", path
        )
    magic, version, rows, cols = _SIDECAR_HEADER.unpack_from(data)
    if magic != SIDECAR_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path)
    if version != SIDECAR_VERSION:
        raise FormatError(f"unsupported version {version}", path)
    expected = rows * cols * 4
    actual = len(data) - _SIDECAR_HEADER.size
    if actual != expected:
        raise FormatError(f"payload is {actual} bytes, expected {expected} ({rows}x{cols} float32)", path)
    m = np.frombuffer(data, dtype="<f4", offset=_SIDECAR_HEADER.size).reshape(rows, cols)
    return _finite_matrix(m.astype(np.float64), path, "payload")


# ---------------------------------------------------------------- embeddings

def embedding_to_json(rec: EmbeddingRecord, sidecar: str | None = None) -> dict:
    obj: dict = {"id": rec.id, "clip_len": float(rec.clip_len)}
    if rec.orig_window is not None:
        obj["orig_window"] = rec.orig_window.to_list()
    if rec.query is not None:
        obj["query"] = rec.query
    obj["caption_embedding"] = np.asarray(rec.caption_embedding, dtype=np.float64).ravel().tolist()
    if rec.text_embeddings is not None:
        obj["text_embeddings"] = np.asarray(rec.text_embeddings, dtype=np.float64).tolist()
    if sidecar is None:
        obj["clip_embeddings"] = np.asarray(rec.clip_embeddings, dtype=np.float64).tolist()
    else:
        obj["clip_embeddings_file"] = sidecar
    return obj


def write_embeddings(path, records: Sequence[EmbeddingRecord], sidecar: bool = False) -> None:
    """Write records; with ``sidecar=True`` clip matrices go to ``<stem>.<i>.bin``."""
    path = Path(path)
    lines = []
    for i, rec in enumerate(records):
        name = None
        if sidecar:
            name = f"{path.stem}.{i}.bin"
            write_sidecar(path.parent / name, rec.clip_embeddings)
        lines.append(dumps(embedding_to_json(rec, name)))
    _write_lines(path, lines)


def parse_embedding(obj: dict, path=None, line=None) -> EmbeddingRecord:
    c = _Ctx(path, line)
    rid = c.string(c.get(obj, "id"), "id")
    clip_len = c.number(c.get(obj, "clip_len"), "clip_len")
    if clip_len <= 0:
        c.fail("clip_len", "must be > 0")
    cap = np.array(c.vector(c.get(obj, "caption_embedding"), "caption_embedding")).reshape(1, -1)
    if "clip_embeddings" in obj:
        clips = c.matrix(obj["clip_embeddings"], "clip_embeddings")
    elif "clip_embeddings_file" in obj:
        name = c.string(obj["clip_embeddings_file"], "clip_embeddings_file")
        base = Path(path).parent if path is not None else Path(".")
        try:
            clips = read_sidecar(base / name)
        except FormatError as e:
            c.fail("clip_embeddings_file", str(e))
    else:
        c.fail("clip_embeddings", "missing (and no clip_embeddings_file)")
    if clips.shape[1] != cap.shape[1]:
        c.fail("caption_embedding", f"dim {cap.shape[1]} differs from clip dim {clips.shape[1]}")
    text = None
    if "text_embeddings" in obj:
        text = c.matrix(obj["text_embeddings"], "text_embeddings")
    window = None
    if obj.get("orig_window") is not None:
        window = c.span(obj["orig_window"], "orig_window")
        if window.end > clips.shape[0] * clip_len + 1e-9:
            c.fail("orig_window", "extends past the end of the video")
    query = obj.get("query")
    if query is not None:
        c.string(query, "query")
    return EmbeddingRecord(rid, clips, cap, clip_len, window, text, query)


def read_embeddings(path) -> list[EmbeddingRecord]:
    return [parse_embedding(obj, path, n) for n, obj in _read_jsonl(path)]


# ---------------------------------------------------------------- annotations

def annotation_to_json(rec: AnnotationRecord) -> dict:
    obj: dict = {"qid": rec.qid}
    if rec.query is not None:
        obj["query"] = rec.query
    obj["duration"] = float(rec.duration)
    obj["relevant_windows"] = [w.to_list() for w in rec.relevant_windows]
    obj["saliency_grades"] = [int(g) for g in rec.saliency_grades]
    return obj


def write_annotations(path, records: Iterable[AnnotationRecord]) -> None:
    _write_lines(path, (dumps(annotation_to_json(r)) for r in records))


def parse_annotation(obj: dict, path=None, line=None) -> AnnotationRecord:
    c = _Ctx(path, line)
    qid = obj.get("qid")
    if isinstance(qid, int) and not isinstance(qid, bool):
        qid = str(qid)
    qid = c.string(qid, "qid") if qid is not None else c.fail("qid", "missing")
    duration = c.number(c.get(obj, "duration"), "duration", lo=0)
    raw = c.get(obj, "relevant_windows")
    if not isinstance(raw, list):
        c.fail("relevant_windows", "expected a list")
    windows = [c.span(w, f"relevant_windows[{i}]") for i, w in enumerate(raw)]
    for i in range(1, len(windows)):
        if windows[i].start < windows[i - 1].start:
            c.fail(f"relevant_windows[{i}]", "windows must be sorted by start")
    grades_raw = obj.get("saliency_grades", [])
    if not isinstance(grades_raw, list):
        c.fail("saliency_grades", "expected a list")
    grades = []
    for i, g in enumerate(grades_raw):
        if isinstance(g, bool) or not isinstance(g, int) or not 0 <= g <= 4:
            c.fail(f"saliency_grades[{i}]", "expected an integer grade in 0..4")
        grades.append(g)
    query = obj.get("query")
    return AnnotationRecord(qid, duration, tuple(windows), tuple(grades), query)


def read_annotations(path) -> list[AnnotationRecord]:
    return [parse_annotation(obj, path, n) for n, obj in _read_jsonl(path)]


def annotation_to_ground_truth(rec: AnnotationRecord) -> GroundTruth:
    return GroundTruth(rec.qid, rec.relevant_windows, rec.saliency_grades or None)


# ---------------------------------------------------------------- predictions

def prediction_to_json(pred: Prediction) -> dict:
    obj: dict = {"qid": pred.qid}
    obj["pred_relevant_windows"] = [[s.start, s.end, float(score)] for s, score in pred.ranked()]
    if pred.saliency is not None:
        obj["pred_saliency_scores"] = [float(x) for x in pred.saliency]
    return obj


def write_predictions(path, preds: Iterable[Prediction]) -> None:
    _write_lines(path, (dumps(prediction_to_json(p)) for p in preds))


def parse_prediction(obj: dict, path=None, line=None) -> Prediction:
    c = _Ctx(path, line)
    qid = obj.get("qid")
    if isinstance(qid, int) and not isinstance(qid, bool):
        qid = str(qid)
    qid = c.string(qid, "qid") if qid is not None else c.fail("qid", "missing")
    raw = c.get(obj, "pred_relevant_windows")
    if not isinstance(raw, list):
        c.fail("pred_relevant_windows", "expected a list")
    windows = [c.span(w, f"pred_relevant_windows[{i}]", with_score=True) for i, w in enumerate(raw)]
    for i in range(1, len(windows)):
        if windows[i][1] > windows[i - 1][1]:
            c.fail(f"pred_relevant_windows[{i}]", "windows must be sorted by descending score")
    sal = None
    if obj.get("pred_saliency_scores") is not None:
        raw_s = obj["pred_saliency_scores"]
        if not isinstance(raw_s, list):
            c.fail("pred_saliency_scores", "expected a list")
        sal = tuple(c.number(v, f"pred_saliency_scores[{i}]") for i, v in enumerate(raw_s))
    return Prediction(qid, tuple(windows), sal)


def read_predictions(path) -> list[Prediction]:
    return [parse_prediction(obj, path, n) for n, obj in _read_jsonl(path)]


# ---------------------------------------------------------------- weights

def write_weights(path, tensors: Sequence[tuple[str, str, Any]], config: dict) -> None:
    """Write ``<path>`` (JSON manifest) and ``<path stem>.bin`` (float32 blob).

    ``tensors`` is an ordered sequence of ``(name, role, array)``.
    """
    path = Path(path)
    blob_name = path.with_suffix(".bin").name
    entries, chunks = [], []
    for name, role, arr in tensors:
        a = np.asarray(arr, dtype=np.float64)
        _finite_matrix(a.reshape(1, -1) if a.ndim < 2 else a.reshape(a.shape[0], -1), path, name)
        entries.append({"name": name, "role": role, "shape": list(a.shape)})
        chunks.append(a.astype("<f4").tobytes())
    manifest = {
        "format": WEIGHTS_FORMAT,
        "version": WEIGHTS_VERSION,
        "config": config,
        "blob": blob_name,
        "tensors": entries,
    }
    path.write_text(json.dumps(manifest, indent=1, allow_nan=False) + "\n", encoding="utf-8")
    (path.parent / blob_name).write_bytes(b"".join(chunks))


def read_weights(path) -> tuple[dict, dict[str, tuple[str, np.ndarray]]]:
    """Return ``(config, {name: (role, float64 array)})``."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"), parse_constant=_reject_constant)
    except OSError as e:
        raise FormatError(f"cannot read weights manifest: {e.strerror}", path) from None
    except ValueError as e:
        raise FormatError(f"invalid JSON: {e}", path) from None
    c = _Ctx(path, None)
    if not isinstance(manifest, dict) or manifest.get("format") != WEIGHTS_FORMAT:
        c.fail("format", f"expected '{WEIGHTS_FORMAT}'")
    if manifest.get("version") != WEIGHTS_VERSION:
        c.fail("version", f"unsupported version {manifest.get('version')!r}")
    config = c.get(manifest, "config")
    if not isinstance(config, dict):
        c.fail("config", "expected an object")
    entries = c.get(manifest, "tensors")
    if not isinstance(entries, list):
        c.fail("tensors", "expected a list")
    blob_path = path.parent / c.string(c.get(manifest, "blob"), "blob")
    try:
        blob = blob_path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read weights blob: {e.strerror}", blob_path) from None
    total = 0
    shapes = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            c.fail(f"tensors[{i}]", "expected an object")
        shape = e.get("shape")
        if not isinstance(shape, list) or any(
            isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in shape
        ):
            c.fail(f"tensors[{i}].shape", "expected a list of non-negative integers")
        c.string(e.get("name"), f"tensors[{i}].name")
        c.string(e.get("role"), f"tensors[{i}].role")
        shapes.append(shape)
        total += int(np.prod(shape, dtype=np.int64)) if shape else 1
    if len(blob) != total * 4:
        raise FormatError(f"blob is {len(blob)} bytes, manifest declares {total * 4}", blob_path)
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise FormatError("non-finite weight value", blob_path)
    out: dict[str, tuple[str, np.ndarray]] = {}
    offset = 0
    for e, shape in zip(entries, shapes):
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        out[e["name"]] = (e["role"], flat[offset : offset + n].reshape(shape))
        offset += n
    return config, out
