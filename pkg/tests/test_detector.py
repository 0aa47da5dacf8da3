import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrkit.detector import (
    Anchor,
    Detection,
    MatchWeights,
    Source,
    assign_lexicographic,
    atss_assign,
    combined_confidence,
    cost_matrix,
    default_levels,
    generate_anchors,
    hungarian_match,
    match_cost,
    weighted_fuse,
)
from mrkit.spans import Span

from oracles import atss_oracle, brute_force_assignment


# ---------------------------------------------------------------- anchors

def test_single_anchor_covers_video():
    a = generate_anchors(5, 2.0, [(10.0, 1.0)])
    assert len(a) == 1 and a[0].span == Span(0, 10)


def test_anchor_grid_example():
    a = generate_anchors(4, 2.0, [(2.0, 2.0)])
    assert [x.span.to_list() for x in a] == [[0, 3], [1, 5], [3, 7], [5, 8]]
    assert [x.center for x in a] == [1, 3, 5, 7]


def test_anchor_levels_additive():
    one = generate_anchors(10, 2.0, [(2.0, 4.0)])
    two = generate_anchors(10, 2.0, [(4.0, 4.0)])
    both = generate_anchors(10, 2.0, [(2.0, 4.0), (4.0, 4.0)])
    assert len(both) == len(one) + len(two)
    assert {x.level for x in both} == {0, 1}


def test_anchor_errors():
    with pytest.raises(ValueError):
        generate_anchors(4, 2.0, [])
    assert len(generate_anchors(8, 2.0, default_levels(2.0))) == 8 + 4 + 2


# ---------------------------------------------------------------- ATSS

def test_atss_exact_anchor_positive():
    anchors = [Anchor(Span(2, 6), 0, 4.0), Anchor(Span(10, 14), 0, 12.0)]
    assert atss_assign(anchors, [Span(2, 6)], top_k=2) == [[0]]


def test_atss_center_constraint():
    anchors = [Anchor(Span(0, 4), 0, 2.0), Anchor(Span(8, 12), 0, 10.0)]
    assert atss_assign(anchors, [Span(3, 7)], top_k=2) == [[]]


def test_atss_empty_inputs():
    assert atss_assign([], [Span(0, 1)]) == [[]]
    assert atss_assign([Anchor(Span(0, 1), 0, 0.5)], []) == []


def random_atss_instance(rng):
    while True:
        inst = _atss_instance(rng)
        if inst[0]:
            return inst


def _atss_instance(rng):
    num_clips = int(rng.integers(2, 16))
    clip_len = float(rng.choice([1.0, 2.0]))
    n_levels = int(rng.integers(1, 3))
    levels = [(clip_len * float(rng.choice([1, 2, 4])), float(rng.choice([1, 2, 4]))) for _ in range(n_levels)]
    anchors = generate_anchors(num_clips, clip_len, levels)[:30]
    duration = num_clips * clip_len
    gts = []
    for _ in range(int(rng.integers(1, 4))):
        if rng.random() < 0.2 and anchors:
            gts.append(anchors[int(rng.integers(len(anchors)))].span)
        else:
            a, b = sorted(rng.uniform(0, duration, 2))
            gts.append(Span(a, b))
    return anchors, gts, int(rng.integers(1, 6))


def test_atss_matches_oracle(rng):
    for _ in range(200):
        anchors, gts, k = random_atss_instance(rng)
        got = [set(x) for x in atss_assign(anchors, gts, k)]
        want = atss_oracle([a.span.to_list() for a in anchors], [a.level for a in anchors],
                           [g.to_list() for g in gts], k,
                           centers=[a.center for a in anchors])
        assert got == want


def test_atss_positive_centers_strictly_inside(rng):
    for _ in range(200):
        anchors, gts, k = random_atss_instance(rng)
        for g, idx in enumerate(atss_assign(anchors, gts, k)):
            for a in idx:
                assert gts[g].start < anchors[a].center < gts[g].end


# ---------------------------------------------------------------- cost / matching

def test_match_cost_examples():
    gt = Span(4, 6)
    assert match_cost(Detection(gt, 1.0, 1.0), gt) == 0.0
    w = MatchWeights(l1=2.0, giou=3.0, ce=5.0, iou=1.0)
    det = Detection(Span(0, 2), 1.0, 1.0)
    l1 = (abs(1 - 5) + abs(2 - 2)) / 10
    assert match_cost(det, gt, w, duration=10) == pytest.approx(2.0 * l1 + 3.0 * (4 / 3), abs=1e-12)
    assert match_cost(Detection(gt, 0.0, 1.0), gt) == pytest.approx(5.0 * -math.log(1e-12))


def test_match_cost_scaling(rng):
    w = MatchWeights(3, 2, 1, 0.5)
    for _ in range(20):
        dets = [Detection(Span(*sorted(rng.uniform(0, 30, 2))), rng.uniform(), rng.uniform()) for _ in range(5)]
        gts = [Span(*sorted(rng.uniform(0, 30, 2))) for _ in range(3)]
        a = hungarian_match(dets, gts, w, 30.0)
        b = hungarian_match(dets, gts, w.scaled(2.0), 30.0)
        assert a.pairs == b.pairs
        assert b.total_cost == pytest.approx(2 * a.total_cost)
        assert match_cost(dets[0], gts[0], w.scaled(2.0), 30) == pytest.approx(2 * match_cost(dets[0], gts[0], w, 30))


def test_cost_matrix_matches_scalar(backend, rng):
    dets = [Detection(Span(*sorted(rng.uniform(0, 30, 2))), rng.uniform(), rng.uniform()) for _ in range(4)]
    gts = [Span(*sorted(rng.uniform(0, 30, 2))) for _ in range(3)]
    c = cost_matrix(dets, gts, MatchWeights(), 30.0)
    for i, d in enumerate(dets):
        for j, g in enumerate(gts):
            assert c[i, j] == pytest.approx(match_cost(d, g, MatchWeights(), 30.0), abs=1e-12)


def test_assignment_examples():
    assert assign_lexicographic([[1, 2], [2, 1]]) == ([(0, 0), (1, 1)], 2.0)
    det = Detection(Span(0, 1), 0.9)
    r = hungarian_match([det], [Span(0, 1)])
    assert r.pairs == ((0, 0),) and r.unmatched == ()
    assert hungarian_match([], [Span(0, 1)]).pairs == ()
    assert hungarian_match([det, det], [Span(0, 1)]).unmatched == (1,)


def test_assignment_tie_break_is_lexicographic():
    # every permutation costs the same
    pairs, _ = assign_lexicographic(np.ones((3, 3)))
    assert pairs == [(0, 0), (1, 1), (2, 2)]
    # more rows than columns: row 0 is left out only if that is cheaper
    pairs, total = assign_lexicographic([[5, 5], [1, 1], [1, 1]])
    assert pairs == [(1, 0), (2, 1)] and total == 2


def test_assignment_against_brute_force(backend, rng):
    for trial in range(200):
        n, m = rng.integers(1, 8, size=2)
        if trial % 2:
            c = rng.integers(0, 3, size=(n, m)).astype(float)
        else:
            c = rng.uniform(0, 10, size=(n, m))
        pairs, total = assign_lexicographic(c)
        want_pairs, want_total = brute_force_assignment(c)
        assert total == pytest.approx(want_total, abs=1e-9)
        assert pairs == want_pairs


# ---------------------------------------------------------------- confidence

def test_combined_confidence_examples():
    assert combined_confidence(1.0, 1.0, 0.3) == 1.0
    assert combined_confidence(0.37, 0.81, 1.0) == 0.37
    assert combined_confidence(0.37, 0.81, 0.0) == 0.81
    assert combined_confidence(0.0, 0.5, 0.0) == 0.5
    assert combined_confidence(0.9, 0.5, 0.5) == pytest.approx(math.sqrt(0.45), abs=1e-12)


def test_combined_confidence_monotone():
    grid = np.linspace(0, 1, 21)
    for alpha in np.linspace(0, 1, 11):
        for q in grid:
            vals = [combined_confidence(p, q, alpha) for p in grid]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
        for p in grid:
            vals = [combined_confidence(p, q, alpha) for q in grid]
            assert all(b >= a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------- fusion

def test_fuse_identical_spans():
    s = Span(3, 9)
    out = weighted_fuse([Detection(s, 0.4), Detection(s, 0.6, source=Source.ATSS)], 0.7)
    assert len(out) == 1 and out[0].span == s
    assert out[0].confidence == pytest.approx(0.5)


def test_fuse_single_detection_halved():
    out = weighted_fuse([Detection(Span(1, 2), 0.8)], 0.7)
    assert out[0].span == Span(1, 2) and out[0].confidence == pytest.approx(0.4)


def test_fuse_weighted_mean():
    out = weighted_fuse([Detection(Span(0, 4), 0.75), Detection(Span(0, 2), 0.25)], 0.4)
    assert len(out) == 1
    assert out[0].span == Span(0, 3.5)
    assert out[0].confidence == pytest.approx(0.5)


def test_fuse_separate_clusters_sorted():
    out = weighted_fuse([Detection(Span(0, 2), 0.3), Detection(Span(10, 12), 0.9)], 0.5)
    assert [d.span for d in out] == [Span(10, 12), Span(0, 2)]


def test_fuse_threshold_validated():
    with pytest.raises(ValueError):
        weighted_fuse([], 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0.1, 20), st.floats(0.01, 1)), min_size=1, max_size=12),
       st.floats(0.1, 0.9))
def test_fuse_properties(raw, thr):
    dets = [Detection(Span(s, s + w), p) for s, w, p in raw]
    out = weighted_fuse(dets, thr)
    assert sum(1 for _ in out) <= len(dets)
    best = max(d.confidence for d in dets)
    lo = min(d.span.start for d in dets)
    hi = max(d.span.end for d in dets)
    for d in out:
        assert d.confidence <= best + 1e-12
        assert lo <= d.span.start <= d.span.end <= hi
    assert [d.confidence for d in out] == sorted((d.confidence for d in out), reverse=True)
