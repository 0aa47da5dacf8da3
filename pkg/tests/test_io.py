import json
import math
from pathlib import Path

import numpy as np
import pytest

from mrkit.annotate import AnnotationRecord, EmbeddingRecord, annotate
from mrkit.io import (
    FormatError,
    dumps,
    read_annotations,
    read_embeddings,
    read_predictions,
    read_sidecar,
    read_weights,
    write_annotations,
    write_embeddings,
    write_predictions,
    write_sidecar,
    write_weights,
)
from mrkit.metrics import Prediction
from mrkit.spans import Span

DATA = Path(__file__).parent / "data"


def sample_records(rng, n=3):
    out = []
    for k in range(n):
        clips = rng.normal(size=(5 + k, 4))
        out.append(EmbeddingRecord(f"v{k}", clips, rng.normal(size=4), 2.0, Span(0, 4),
                                   rng.normal(size=(3, 4)) if k % 2 else None, f"query {k}"))
    return out


def assert_same_record(a, b, exact=True):
    assert a.id == b.id and a.clip_len == b.clip_len and a.orig_window == b.orig_window and a.query == b.query
    if exact:
        np.testing.assert_array_equal(a.clip_embeddings, b.clip_embeddings)
    else:
        np.testing.assert_allclose(a.clip_embeddings, b.clip_embeddings, rtol=1e-6)
    np.testing.assert_array_equal(np.ravel(a.caption_embedding), np.ravel(b.caption_embedding))


def test_dumps_shortest_repr():
    assert dumps({"a": 0.1, "b": [1.0, 2]}) == '{"a":0.1,"b":[1.0,2]}'
    with pytest.raises(ValueError):
        dumps({"a": float("nan")})


# ---------------------------------------------------------------- embeddings

def test_embedding_round_trip(tmp_path, rng):
    recs = sample_records(rng)
    p = tmp_path / "emb.jsonl"
    write_embeddings(p, recs)
    for a, b in zip(recs, read_embeddings(p)):
        assert_same_record(a, b)


def test_embedding_sidecar_round_trip(tmp_path, rng):
    recs = sample_records(rng)
    p = tmp_path / "emb.jsonl"
    write_embeddings(p, recs, sidecar=True)
    assert (tmp_path / "emb.0.bin").exists()
    for a, b in zip(recs, read_embeddings(p)):
        assert_same_record(a, b, exact=False)
        np.testing.assert_array_equal(b.clip_embeddings, a.clip_embeddings.astype(np.float32))


def test_byte_determinism(tmp_path, rng):
    recs = sample_records(rng)
    write_embeddings(tmp_path / "a.jsonl", recs)
    write_embeddings(tmp_path / "b.jsonl", read_embeddings(tmp_path / "a.jsonl"))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_golden_files(tmp_path):
    recs = read_embeddings(DATA / "golden_embeddings.jsonl")
    write_annotations(tmp_path / "out.jsonl", [annotate(r) for r in recs])
    assert (tmp_path / "out.jsonl").read_bytes() == (DATA / "golden_annotations.jsonl").read_bytes()
    write_embeddings(tmp_path / "emb.jsonl", recs)
    assert (tmp_path / "emb.jsonl").read_bytes() == (DATA / "golden_embeddings.jsonl").read_bytes()


@pytest.mark.parametrize("line,field", [
    ('{"id":"x","clip_len":2,"caption_embedding":[1,0]}', "clip_embeddings"),
    ('{"id":"x","clip_len":0,"caption_embedding":[1,0],"clip_embeddings":[[1,0]]}', "clip_len"),
    ('{"id":"x","clip_len":2,"caption_embedding":[1,0,0],"clip_embeddings":[[1,0]]}', "caption_embedding"),
    ('{"id":"x","clip_len":2,"caption_embedding":[1,0],"clip_embeddings":[[1,0],[1]]}', "clip_embeddings[1]"),
    ('{"id":"x","clip_len":2,"caption_embedding":[1,"a"],"clip_embeddings":[[1,0]]}', "caption_embedding[1]"),
    ('{"id":"x","clip_len":2,"caption_embedding":[1,0],"clip_embeddings":[[1,0]],"orig_window":[0,9]}', "orig_window"),
    ('{"id":"x","clip_len":2,"caption_embedding":[1,0],"clip_embeddings":[[1,0]],"orig_window":[2,1]}', "orig_window"),
])
def test_embedding_validation(tmp_path, line, field):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id":"ok","clip_len":2,"caption_embedding":[1,0],"clip_embeddings":[[1,0]]}\n' + line + "\n")
    with pytest.raises(FormatError) as e:
        read_embeddings(p)
    assert e.value.line == 2 and e.value.field == field


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity"])
def test_non_finite_rejected(tmp_path, token):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id":"x","clip_len":2,"caption_embedding":[1,%s],"clip_embeddings":[[1,0]]}\n' % token)
    with pytest.raises(FormatError) as e:
        read_embeddings(p)
    assert e.value.line == 1


def test_invalid_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text("{not json\n")
    with pytest.raises(FormatError):
        read_embeddings(p)
    with pytest.raises(FormatError):
        read_embeddings(tmp_path / "missing.jsonl")
    p.write_text("[1,2]\n")
    with pytest.raises(FormatError):
        read_annotations(p)


# ---------------------------------------------------------------- sidecar

def test_sidecar_round_trip(tmp_path):
    m = np.arange(12, dtype=np.float64).reshape(3, 4) / 8
    write_sidecar(tmp_path / "m.bin", m)
    np.testing.assert_array_equal(read_sidecar(tmp_path / "m.bin"), m)
    assert (tmp_path / "m.bin").read_bytes()[:4] == b"MRKE"


def test_sidecar_truncated(tmp_path):
    write_sidecar(tmp_path / "m.bin", np.ones((3, 4)))
    data = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-5])
    with pytest.raises(FormatError, match="expected 48"):
        read_sidecar(tmp_path / "t.bin")
    (tmp_path / "h.bin").write_bytes(data[:6])
    with pytest.raises(FormatError, match="truncated header"):
        read_sidecar(tmp_path / "h.bin")
    (tmp_path / "x.bin").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="magic"):
        read_sidecar(tmp_path / "x.bin")


def test_sidecar_rejects_non_finite(tmp_path):
    with pytest.raises(FormatError):
        write_sidecar(tmp_path / "m.bin", [[1.0, math.inf]])


# ---------------------------------------------------------------- annotations / predictions

def test_annotation_round_trip(tmp_path):
    recs = [AnnotationRecord("a", 20.0, (Span(0, 4), Span(6, 8)), (1, 2, 0, 4), "q"),
            AnnotationRecord("b", 10.0, (), (0, 0, 0))]
    write_annotations(tmp_path / "a.jsonl", recs)
    assert read_annotations(tmp_path / "a.jsonl") == recs


def test_annotation_validation(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"qid":"a","duration":10,"relevant_windows":[[4,6],[0,2]]}\n')
    with pytest.raises(FormatError, match="sorted"):
        read_annotations(p)
    p.write_text('{"qid":"a","duration":10,"relevant_windows":[],"saliency_grades":[5]}\n')
    with pytest.raises(FormatError) as e:
        read_annotations(p)
    assert e.value.field == "saliency_grades[0]"
    p.write_text('{"qid":7,"duration":10,"relevant_windows":[]}\n')
    assert read_annotations(p)[0].qid == "7"


def test_prediction_round_trip(tmp_path):
    preds = [Prediction("a", ((Span(0, 4), 0.9), (Span(1, 3), 0.25)), (0.1, -0.5)),
             Prediction("b", ())]
    write_predictions(tmp_path / "p.jsonl", preds)
    assert read_predictions(tmp_path / "p.jsonl") == preds
    line = (tmp_path / "p.jsonl").read_text().splitlines()[0]
    assert json.loads(line)["pred_relevant_windows"][0] == [0.0, 4.0, 0.9]


def test_prediction_order_checked(tmp_path):
    p = tmp_path / "p.jsonl"
    p.write_text('{"qid":"a","pred_relevant_windows":[[0,1,0.1],[0,2,0.5]]}\n')
    with pytest.raises(FormatError, match="descending"):
        read_predictions(p)


# ---------------------------------------------------------------- weights

def test_weights_round_trip(tmp_path):
    tensors = [("a.w", "matrix", np.arange(6).reshape(2, 3) / 4), ("a.b", "bias", np.array([0.5, -1.0])),
               ("s", "scalar", np.array(2.0))]
    write_weights(tmp_path / "w.json", tensors, {"dim": 3})
    config, got = read_weights(tmp_path / "w.json")
    assert config == {"dim": 3}
    assert list(got) == ["a.w", "a.b", "s"]
    for name, role, arr in tensors:
        assert got[name][0] == role
        np.testing.assert_array_equal(got[name][1], arr)


def test_weights_blob_size_checked(tmp_path):
    write_weights(tmp_path / "w.json", [("a", "matrix", np.ones((2, 2)))], {})
    (tmp_path / "w.bin").write_bytes(b"\0" * 12)
    with pytest.raises(FormatError):
        read_weights(tmp_path / "w.json")
    (tmp_path / "w.bin").unlink()
    with pytest.raises(FormatError):
        read_weights(tmp_path / "w.json")


def test_weights_manifest_checked(tmp_path):
    p = tmp_path / "w.json"
    p.write_text('{"format":"other"}')
    with pytest.raises(FormatError):
        read_weights(p)
