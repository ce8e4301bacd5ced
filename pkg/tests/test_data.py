import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from milpmetric.data import (SYNTH_KINDS, Dataset, NormParams, SynthSpec, build_delta_cache,
                             denormalize, duplicate_pairs, is_normalized, load_csv, load_libsvm,
                             normalize, quad_features, sample_split, split, synth_generate,
                             upper_pairs, write_csv)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_from_labels_numeric_labels_sort_numerically():
    d = Dataset.from_labels(np.zeros((4, 1)), ["10", "2", "2.0", "1"])
    assert d.classes == ("1", "2", "10")
    assert d.labels.tolist() == [2, 1, 1, 0]


def test_from_labels_strings_sort_after_numbers():
    d = Dataset.from_labels(np.zeros((3, 1)), ["b", "3", "a"])
    assert d.classes == ("3", "a", "b")
    assert d.label_names() == ["b", "3", "a"]


def test_dataset_is_read_only():
    d = Dataset.from_labels(np.zeros((2, 2)), ["a", "b"])
    with pytest.raises(ValueError):
        d.points[0, 0] = 1.0


def test_subset_records_parent_index():
    d = Dataset.from_labels(np.arange(8.0).reshape(4, 2), ["a", "b", "a", "b"])
    s = d.subset([3, 1])
    assert s.meta["parent_index"] == [3, 1]
    assert s.points.tolist() == [[6, 7], [2, 3]]
    assert s.classes == d.classes


def test_load_csv_roundtrip(tmp_path):
    d = synth_generate(SynthSpec("gaussian-blobs", 5, seed=1, n_classes=3))
    p = tmp_path / "b.csv"
    write_csv(d, p)
    back = load_csv(p)
    assert np.array_equal(back.points, d.points)
    assert back.label_names() == d.label_names()


def test_load_csv_label_by_name(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("y,f1,f2\nA,1,2\nB,3,4\n")
    d = load_csv(p, label_column="y")
    assert d.points.tolist() == [[1, 2], [3, 4]]
    assert d.meta["feature_names"] == ["f1", "f2"]


@pytest.mark.parametrize("text, match", [
    ("a,b,label\n1,x,0\n", r"non-numeric cell 'x' at row 2, column 'b'"),
    ("a,a,label\n1,2,0\n", "duplicate header"),
    ("a,b,label\n1,2\n", "row 2 has 2 cells"),
    ("", "empty file"),
])
def test_load_csv_errors(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError, match=match):
        load_csv(p)


def test_load_csv_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_single_class_warns(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("a,label\n1,x\n2,x\n")
    with pytest.warns(UserWarning, match="fewer than 2 distinct labels"):
        load_csv(p)


def test_cross_class_duplicates_reported(tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text("a,label\n1,x\n1,y\n2,x\n")
    with pytest.warns(UserWarning):
        d = load_csv(p)
    assert duplicate_pairs(d, cross_class_only=True) == [(0, 1)]


def test_libsvm(tmp_path):
    p = tmp_path / "d.libsvm"
    p.write_text("+1 1:0.5 3:2\n-1 2:1.5\n")
    d = load_libsvm(p)
    assert d.points.tolist() == [[0.5, 0, 2], [0, 1.5, 0]]
    assert d.classes == ("-1", "1")
    assert d.labels.tolist() == [1, 0]


@pytest.mark.parametrize("text, match", [("+1 3:1 2:1\n", "ascending"), ("+1 a\n", "line 1")])
def test_libsvm_errors(tmp_path, text, match):
    p = tmp_path / "d.libsvm"
    p.write_text(text)
    with pytest.raises(ValueError, match=match):
        load_libsvm(p)


@given(arrays(float, st.tuples(st.integers(2, 8), st.integers(1, 4)), elements=finite))
def test_normalize_maps_into_unit_box(pts):
    d = Dataset(pts, np.arange(len(pts)) % 2, ("0", "1"))
    n, params = normalize(d)
    assert is_normalized(n)
    assert np.allclose(denormalize(n, params).points, pts, atol=1e-9 * (1 + np.abs(pts).max()))


def test_normalize_constant_column():
    d = Dataset(np.array([[1.0, 5.0], [2.0, 5.0]]), np.array([0, 1]), ("0", "1"))
    n, params = normalize(d)
    assert n.points[:, 1].tolist() == [0.0, 0.0]
    assert NormParams.from_dict(params.to_dict()).to_dict() == params.to_dict()


def test_upper_pairs_and_quad_features():
    assert upper_pairs(2) == [(0, 0), (0, 1), (1, 1)]
    q = quad_features(np.array([2.0, 3.0]))
    # off-diagonal entries are doubled so that q . b_upper = delta^T B delta
    assert q.tolist() == [4.0, 12.0, 9.0]


@given(arrays(float, (5, 3), elements=st.floats(0, 1)),
       arrays(float, 3, elements=st.floats(-1, 1)),
       arrays(float, 6, elements=st.floats(-1, 1)))
def test_delta_cache_distances_match_direct(pts, a, bu):
    d = Dataset(pts, np.array([0, 1, 0, 1, 0]), ("0", "1"))
    c = build_delta_cache(d)
    B = np.zeros((3, 3))
    B[np.triu_indices(3)] = bu
    B = B + np.triu(B, 1).T
    got = c.distances(a, bu)
    for i in range(5):
        for j in range(5):
            dl = pts[i] - pts[j]
            assert got[i, j] == pytest.approx(a @ np.abs(dl) + dl @ B @ dl, abs=1e-12)


@pytest.mark.parametrize("kind", SYNTH_KINDS)
def test_synth_is_seeded(kind):
    a = synth_generate(SynthSpec(kind, 6, seed=3))
    b = synth_generate(SynthSpec(kind, 6, seed=3))
    c = synth_generate(SynthSpec(kind, 6, seed=4))
    assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.points, c.points)


def test_synth_unknown_kind():
    with pytest.raises(ValueError, match="unknown generator"):
        SynthSpec("spirals")


def test_two_lines_geometry():
    d = synth_generate(SynthSpec("two-lines", 20, seed=7))
    assert d.N == 40
    # the lines are horizontal: class 0 below, class 1 above
    assert d.points[d.labels == 0, 1].max() < d.points[d.labels == 1, 1].min()


def test_outlier_injection_flips_labels():
    d = synth_generate(SynthSpec("outlier-injected", 30, seed=0, flips=3))
    clean = synth_generate(SynthSpec("gaussian-blobs", 30, seed=0))
    flipped = d.meta["flipped"]
    assert len(flipped) == 3
    changed = np.flatnonzero(d.labels != clean.labels).tolist()
    assert sorted(flipped) == changed


@given(st.floats(0.1, 0.9), st.integers(0, 100))
def test_split_is_stratified_and_disjoint(frac, seed):
    d = synth_generate(SynthSpec("gaussian-blobs", 7, seed=1, n_classes=3))
    tr, te = split(d, frac, seed)
    parents = tr.meta["parent_index"] + te.meta["parent_index"]
    assert sorted(parents) == list(range(d.N))
    for c in range(3):
        assert np.sum(tr.labels == c) >= 1 and np.sum(te.labels == c) >= 1


def test_split_singleton_class_warns():
    d = Dataset(np.arange(5.0)[:, None], np.array([0, 0, 0, 0, 1]), ("a", "b"))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        tr, te = split(d, 0.5, 0)
    assert any("single point" in str(x.message) for x in w)
    assert 4 in tr.meta["parent_index"]


def test_sample_split_sizes():
    d = synth_generate(SynthSpec("gaussian-blobs", 20, seed=2))
    tr, te = sample_split(d, 10, 15, seed=5)
    assert (tr.N, te.N) == (10, 15)
    assert not set(tr.meta["parent_index"]) & set(te.meta["parent_index"])
    with pytest.raises(ValueError):
        sample_split(d, 30, 30)


def test_diabetes_file_loads():
    from pathlib import Path
    d = load_csv(Path(__file__).resolve().parents[1] / "data" / "diabetes.csv")
    assert (d.N, d.D) == (768, 8)
    assert d.classes == ("tested_negative", "tested_positive")
