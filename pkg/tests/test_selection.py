import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sabce.errors import DataError
from sabce.numerics import make_rng
from sabce.selection import (apply_elbow, elbow_cutoff, jaccard_stability, pairwise_overlap,
                             rank_features, read_ranking_csv, select_features, top_k,
                             write_ranking_csv)


def brute_elbow(y):
    """Point-to-line distance written out per point."""
    n = len(y)
    x0, y0, x1, y1 = 0.0, y[0], n - 1.0, y[-1]
    best, best_i = -1.0, 0
    for i in range(n):
        num = abs((y1 - y0) * i - (x1 - x0) * y[i] + x1 * y0 - y1 * x0)
        dist = num / np.sqrt((y1 - y0) ** 2 + (x1 - x0) ** 2)
        if dist > best:
            best, best_i = dist, i
    return best_i


def test_rank_example():
    r = rank_features([0.1, -5.0, 2.0])
    assert r.order.tolist() == [1, 2, 0]
    assert r.magnitudes.tolist() == [5.0, 2.0, 0.1]


def test_rank_ties_keep_index_order():
    assert rank_features([1.0, -2.0, 2.0, 1.0]).order.tolist() == [1, 2, 0, 3]


def test_elbow_example():
    idx, col = elbow_cutoff([9, 8, 1, 0.9, 0.8])
    assert (idx, col) == (2, False)
    sel = select_features([9, 8, 1, 0.9, 0.8])
    assert sel.selected == {0, 1}


def test_collinear_selects_everything():
    idx, col = elbow_cutoff([4.0, 3.0, 2.0, 1.0])
    assert (idx, col) == (0, True)
    assert select_features([4.0, 3.0, 2.0, 1.0]).n_selected == 4
    assert select_features(np.ones(10)).n_selected == 10


def test_short_curve():
    with pytest.raises(ValueError, match="elbow undefined"):
        elbow_cutoff([2.0, 1.0])
    assert select_features([2.0, 1.0]).n_selected == 2


def test_step_curve():
    sel = select_features([1.0] * 5 + [1e-5] * 95)
    assert sel.selected == set(range(5))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_normalized_axes_keep_the_elbow(seed):
    # distance to a fixed chord is proportional to the vertical offset, so
    # rescaling either axis cannot move the argmax
    y = np.sort(make_rng(seed).exponential(1.0, 60))[::-1]
    assert elbow_cutoff(y)[0] == elbow_cutoff(y, normalize=True)[0]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 300))
def test_elbow_matches_brute_force(seed, n):
    r = make_rng(seed)
    y = np.sort(r.exponential(1.0, n) * r.choice([1e-3, 1.0, 1e3]))[::-1]
    if r.random() < 0.3:
        y = np.round(y, 1)  # plateaus exercise tie-breaking
    idx, col = elbow_cutoff(y)
    if not col:
        assert idx == brute_elbow(list(y))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_selection_is_scale_and_permutation_invariant(seed, c):
    r = make_rng(seed)
    w = r.standard_normal(40) * r.exponential(1.0, 40)
    base = select_features(w)
    assert select_features(w * c).selected == base.selected
    perm = r.permutation(40)
    moved = select_features(w[perm])
    assert {int(perm[j]) for j in moved.selected} == set(base.selected)


def test_top_k():
    r = rank_features([0.1, -5.0, 2.0])
    assert top_k(r, 2) == [1, 2] and top_k(r, 3) == [1, 2, 0]
    with pytest.raises(DataError):
        top_k(r, 4)


def test_jaccard():
    assert jaccard_stability([{1, 2, 3}, {2, 3, 4}]) == 0.5
    assert jaccard_stability([{1, 2}, {1, 2}, {1, 2}]) == 1.0
    assert jaccard_stability([{1}, {2}]) == 0.0
    with pytest.raises(ValueError):
        jaccard_stability([{1}])
    with pytest.raises(ValueError):
        jaccard_stability([set(), set()])
    assert pairwise_overlap([{1, 2, 3}, {2, 3, 4}]).tolist() == [[3, 2], [2, 3]]


def test_ranking_csv_round_trip(tmp_path):
    r = select_features([9, 8, 1, 0.9, 0.8], ["a", "b", "c", "d", "e"])
    write_ranking_csv(r, tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[1] == "0,0,a,9.0,1"
    back = read_ranking_csv(tmp_path / "r.csv")
    assert back.order.tolist() == r.order.tolist() and back.selected == r.selected
    assert back.feature_names == r.feature_names


def test_apply_elbow_normalized_flag():
    r = apply_elbow(rank_features([9, 8, 1, 0.9, 0.8]), normalize=True)
    assert r.elbow_index == 2 and r.selected == {0, 1}
