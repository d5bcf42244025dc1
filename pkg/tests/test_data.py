import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cm2l.data import (
    CorrespondenceSet,
    DataError,
    ModalityDataset,
    SplitSpec,
    SyntheticConfig,
    generate_synthetic_pair,
    latent_angles,
    load_correspondences,
    load_dataset,
    save_correspondences,
    save_dataset,
    split_train_test,
)


def write(path, text):
    path.write_text(text)
    return path


def test_load_plain_features(tmp_path):
    f = write(tmp_path / "a.csv", "f0,f1\n1,2\n3,4\n5,6\n")
    ds = load_dataset(f, has_labels=False, composition_cols=0)
    assert (ds.n, ds.m) == (3, 2)
    assert ds.labels is None and ds.compositions is None


def test_missing_column_cites_line(tmp_path):
    f = write(tmp_path / "a.csv", "f0,f1\n1,2\n3\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(f, has_labels=False, composition_cols=0)


def test_first_data_row_is_line_2(tmp_path):
    f = write(tmp_path / "a.csv", "f0,f1\n1\n3,4\n")
    with pytest.raises(DataError, match="line 2"):
        load_dataset(f, False, 0)


def test_non_numeric_cell(tmp_path):
    f = write(tmp_path / "a.csv", "f0,f1\n1,2\n3,x\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(f, False, 0)


def test_composition_sum_violation(tmp_path):
    text = "f0,c0,c1,c2,c3,c4\n0.5,0.2,0.2,0.2,0.2,0.2\n0.1,0.2,0.2,0.2,0.1,0.1\n"
    f = write(tmp_path / "a.csv", text)
    with pytest.raises(DataError, match="line 3"):
        load_dataset(f, has_labels=False, composition_cols=5)


def test_layout_inferred_from_header(tmp_path):
    f = write(tmp_path / "a.csv", "f0,f1,c0,c1,label\n1,2,0.25,0.75,A\n3,4,1,0,B\n")
    ds = load_dataset(f)
    assert ds.m == 2
    assert ds.compositions.shape == (2, 2)
    assert ds.labels.tolist() == ["A", "B"]


def test_missing_file():
    with pytest.raises(DataError, match="nope.csv"):
        load_dataset("nope.csv")


@settings(max_examples=30, deadline=None)
@given(
    hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
               elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.booleans(),
)
def test_round_trip_twelve_digits(tmp_path_factory, feats, with_labels):
    d = tmp_path_factory.mktemp("rt")
    n = feats.shape[0]
    rng = np.random.default_rng(n)
    comps = rng.dirichlet(np.ones(5), size=n)
    labels = np.array([f"c{i % 3}" for i in range(n)]) if with_labels else None
    ds = ModalityDataset("m", feats, labels, comps)
    save_dataset(ds, d / "a.csv")
    back = load_dataset(d / "a.csv")
    save_dataset(back, d / "b.csv")
    again = load_dataset(d / "b.csv")
    for a, b in ((ds, back), (back, again)):
        np.testing.assert_allclose(a.features, b.features, rtol=1e-12, atol=0)
        np.testing.assert_allclose(a.compositions, b.compositions, rtol=1e-12, atol=1e-300)
    if with_labels:
        assert back.labels.tolist() == labels.tolist()


def test_correspondence_round_trip(tmp_path):
    c = CorrespondenceSet([(0, 3), (2, 1)])
    save_correspondences(c, tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "idx1,idx2"
    assert load_correspondences(tmp_path / "l.csv").pairs == c.pairs


def test_correspondence_validation():
    with pytest.raises(DataError):
        CorrespondenceSet([(0, 0), (0, 1)]).validate(3, 3)
    with pytest.raises(DataError):
        CorrespondenceSet([(0, 5)]).validate(3, 3)
    with pytest.raises(DataError):
        CorrespondenceSet([]).validate(3, 3)


def test_composition_invariant_on_construction():
    with pytest.raises(DataError):
        ModalityDataset("m", np.ones((1, 2)), compositions=[[0.5, 0.4]])


# ---------------------------------------------------------------------------
# synthetic generator


def test_zero_noise_views_are_functions_of_latent_angles():
    cfg = SyntheticConfig(8, 2, (2, 2), 0.0, 4, seed=7)
    d1, d2, c = generate_synthetic_pair(cfg)
    theta = latent_angles(cfg)
    # same angle -> same features, so sorting by angle orders both views alike
    assert len(np.unique(theta)) == 8
    assert c.pairs == [(i, i) for i in range(8)]
    again1, again2, _ = generate_synthetic_pair(cfg)
    assert np.array_equal(d1.features, again1.features)
    assert np.array_equal(d2.features, again2.features)
    latent = np.c_[np.cos(theta), np.sin(theta)]
    # tanh(latent @ A): arctanh recovers a linear function of the latent point
    a1, *_ = np.linalg.lstsq(latent, np.arctanh(d1.features), rcond=None)
    np.testing.assert_allclose(latent @ a1, np.arctanh(d1.features), atol=1e-10)
    a2, *_ = np.linalg.lstsq(latent, np.arctanh(d2.features), rcond=None)
    np.testing.assert_allclose(latent @ a2, np.arctanh(d2.features), atol=1e-10)


def test_seeded_bitwise_determinism():
    cfg = SyntheticConfig(50, 2, (4, 6), 0.1, 3, seed=3)
    a, b = generate_synthetic_pair(cfg), generate_synthetic_pair(cfg)
    for x, y in zip(a[:2], b[:2]):
        assert x.features.tobytes() == y.features.tobytes()
        assert x.labels.tolist() == y.labels.tolist()


def test_labels_cover_all_quadrants():
    d1, d2, _ = generate_synthetic_pair(SyntheticConfig(400, 2, (10, 15), 0.05, 4, seed=1))
    values, counts = np.unique(d1.labels, return_counts=True)
    assert values.tolist() == ["0", "1", "2", "3"]
    assert counts.min() >= 1
    assert d1.labels.tolist() == d2.labels.tolist()


def test_label_is_angular_sector():
    cfg = SyntheticConfig(100, 2, (3, 3), 0.0, 4, seed=2)
    d1, _, _ = generate_synthetic_pair(cfg)
    theta = latent_angles(cfg)
    expected = np.floor(theta / (np.pi / 2)).astype(int).astype(str)
    assert d1.labels.tolist() == expected.tolist()


@pytest.mark.parametrize("kw", [dict(n_classes=1), dict(latent_dim=4, ambient_dims=(3, 5)),
                                dict(n_per_modality=2, n_classes=3), dict(noise_std=-1)])
def test_synthetic_config_rejects(kw):
    with pytest.raises(DataError):
        SyntheticConfig(**kw)


# ---------------------------------------------------------------------------
# splitting


def ten_pairs(labels=True):
    x = np.arange(20.0).reshape(10, 2)
    lab = np.array(list("ABABABABAB")) if labels else None
    return ModalityDataset("a", x, lab), ModalityDataset("b", -x, lab), CorrespondenceSet([(i, i) for i in range(10)])


def test_split_exact_fractions():
    d1, d2, c = ten_pairs()
    sp = split_train_test(d1, d2, c, SplitSpec(0.8, 1.0, seed=5))
    assert (sp.train1.n, sp.train2.n, sp.test1.n, sp.test2.n) == (8, 8, 2, 2)
    assert len(sp.links) == 8


def test_split_correspondence_subsampling():
    d1, d2, c = ten_pairs()
    sp = split_train_test(d1, d2, c, SplitSpec(0.8, 0.5, seed=5))
    assert sp.train1.n == sp.train2.n == 8
    assert len(sp.links) == 4


def test_split_pairs_are_atomic_and_links_consistent():
    d1, d2, c = ten_pairs()
    sp = split_train_test(d1, d2, c, SplitSpec(0.8, 0.5, seed=9))
    assert sp.train_idx1.tolist() == sp.train_idx2.tolist()
    for a, b in sp.links.pairs:
        assert sp.train_idx1[a] == sp.train_idx2[b]


def test_split_seeded():
    d1, d2, c = ten_pairs()
    a = split_train_test(d1, d2, c, SplitSpec(0.8, 0.5, seed=11))
    b = split_train_test(d1, d2, c, SplitSpec(0.8, 0.5, seed=11))
    assert a.train_idx1.tolist() == b.train_idx1.tolist()
    assert a.links.pairs == b.links.pairs


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.integers(3, 30), st.integers(1, 3), st.floats(0.3, 0.9),
       st.floats(0.05, 1.0), st.integers(0, 2**63))
def test_split_is_partition(n1, n2, p_div, tf, cf, seed):
    n_pairs = max(1, min(n1, n2) // p_div)
    d1 = ModalityDataset("a", np.random.default_rng(0).standard_normal((n1, 2)))
    d2 = ModalityDataset("b", np.random.default_rng(1).standard_normal((n2, 3)))
    c = CorrespondenceSet([(i, n2 - 1 - i) for i in range(n_pairs)])
    try:
        sp = split_train_test(d1, d2, c, SplitSpec(tf, cf, seed))
    except DataError:
        return
    for tr, te, n in ((sp.train_idx1, sp.test_idx1, n1), (sp.train_idx2, sp.test_idx2, n2)):
        assert not set(tr) & set(te)
        assert sorted(set(tr) | set(te)) == list(range(n))
    train_pairs = [(a, b) for a, b in c.pairs if a in set(sp.train_idx1.tolist())]
    assert len(sp.links) == math.ceil(cf * len(train_pairs) - 1e-9)


def test_split_too_small_train():
    x = np.zeros((2, 1))
    d1, d2 = ModalityDataset("a", x), ModalityDataset("b", x)
    with pytest.raises(DataError):
        split_train_test(d1, d2, CorrespondenceSet([(0, 0), (1, 1)]), SplitSpec(0.3, 1.0, 0))
