import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifrf.data import CATEGORICAL as CAT_KIND, Dataset, FeatureSchema, REAL
from ifrf.discretizer import (
    PartitionWarning,
    build_partitions,
    categorical_partitions,
    fit_partitions,
    fuzzify_dataset,
    kmeans_1d,
    membership_vector,
    partition_report,
)
from ifrf.ifs import ifs_entropy, make_element

from oracles import brute_kmeans_1d


def test_kmeans_two_clusters():
    np.testing.assert_allclose(kmeans_1d([1, 2, 9, 10], 2), [1.5, 9.5])


def test_kmeans_single_cluster_is_mean(rng):
    x = rng.normal(size=37)
    np.testing.assert_allclose(kmeans_1d(x, 1), [x.mean()])


def test_kmeans_reduces_to_distinct_count():
    with pytest.warns(PartitionWarning):
        c = kmeans_1d([3, 3, 3], 2)
    np.testing.assert_array_equal(c, [3.0])


def test_kmeans_ignores_missing():
    np.testing.assert_allclose(kmeans_1d([1, np.nan, 2, 9, 10], 2), [1.5, 9.5])
    with pytest.raises(ValueError):
        kmeans_1d([np.nan], 2)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=4, max_size=9, unique=True), st.integers(2, 3))
def test_kmeans_matches_brute_force_on_separated_data(values, C):
    # spread points into clearly separated groups so Lloyd's local optimum is the global one
    xs = sorted(values)
    groups = np.array_split(np.array(xs, dtype=float), C)
    data = np.concatenate([g * 0.01 + 100.0 * i for i, g in enumerate(groups)])
    expected, _ = brute_kmeans_1d(data.tolist(), C)
    np.testing.assert_allclose(kmeans_1d(data, C), sorted(expected), atol=1e-9)


def test_kmeans_result_is_lloyd_fixed_point(rng):
    for _ in range(20):
        x = rng.normal(size=40) * rng.uniform(0.5, 3)
        for C in (2, 3, 4):
            centers = kmeans_1d(x, C)
            assign = np.argmin(np.abs(x[:, None] - centers[None]), axis=1)
            for i, c in enumerate(centers):
                assert c == pytest.approx(x[assign == i].mean(), abs=1e-12)


def test_kmeans_objective_never_increases(rng):
    for C in (2, 3, 5, 7):
        x = np.concatenate([rng.normal(0, 1, 200), rng.normal(4, 0.5, 100), rng.exponential(3, 100)])
        trace = []
        kmeans_1d(x, C, trace=trace)
        assert len(trace) >= 1
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


def test_band_geometry():
    ps = build_partitions([0, 10], 5, 0.9)
    assert ps.band_edges == [(2.0, 8.0)]
    p0, p1 = ps.partitions
    assert p0.plateau_hi == 2.0 and p0.foot_hi == 8.0
    assert p1.foot_lo == 2.0 and p1.plateau_lo == 8.0
    lo, hi = build_partitions([0, 10], 10000, 0.9).band_edges[0]
    assert lo == pytest.approx(0.001) and hi == pytest.approx(9.999)


def test_crisp_step_at_midpoint():
    ps = build_partitions([0, 10], 2, 0.9)
    assert ps.band_edges == [(5.0, 5.0)]
    np.testing.assert_array_equal(ps.membership([4.999, 5.0, 5.001]), [[1, 0], [1, 0], [0, 1]])


def test_membership_examples():
    ps = build_partitions([0, 10], 5, 0.9)
    np.testing.assert_allclose(membership_vector(ps, 5), [0.5, 0.5])
    np.testing.assert_array_equal(membership_vector(ps, -3), [1, 0])
    np.testing.assert_array_equal(membership_vector(ps, 2), [1, 0])
    np.testing.assert_array_equal(membership_vector(ps, 1e9), [0, 1])
    assert np.isnan(membership_vector(ps, np.nan)).all()


def test_scalar_partitions_agree_with_vectorized(rng):
    ps = build_partitions([-1.0, 0.5, 3.0, 3.2], 3, 0.5)
    xs = rng.uniform(-4, 6, 300)
    scalar = np.array([[p.membership(x) for p in ps.partitions] for x in xs])
    np.testing.assert_allclose(scalar, ps.membership(xs), atol=1e-12)


def test_build_partitions_validation():
    with pytest.raises(ValueError):
        build_partitions([0, 1], 1.5, 0.5)
    with pytest.raises(ValueError):
        build_partitions([1, 1], 3, 0.5)
    with pytest.raises(ValueError):
        build_partitions([0, 1], 3, 1.5)


@st.composite
def partition_sets(draw):
    gaps = draw(st.lists(st.floats(1e-3, 50.0), min_size=0, max_size=6))
    start = draw(st.floats(-100, 100))
    centers = np.cumsum([start] + gaps)
    S = draw(st.sampled_from([2, 3, 4, 5, 7, 9, 10000]) | st.floats(2.0, 1e4))
    return build_partitions(centers, S, 0.9)


@settings(max_examples=60, deadline=None)
@given(partition_sets())
def test_monotone_geometry(ps):
    c = np.array(ps.centers)
    width = c[-1] - c[0] + 1.0
    xs = np.sort(np.concatenate([c, np.linspace(c[0] - width, c[-1] + width, 400)]))
    mu = ps.membership(xs)
    for i, ci in enumerate(c):
        right = mu[xs >= ci, i]
        left = mu[xs <= ci, i]
        assert np.all(np.diff(right) <= 1e-12)
        assert np.all(np.diff(left) >= -1e-12)
        assert mu[xs == ci, i].min() == 1.0


def test_strong_partition_on_fitted_features(iris, wine, rng):
    for d in (iris, wine):
        for C, S in [(2, 7), (3, 2), (5, 3), (7, 10000)]:
            for ps in fit_partitions(d, C, S, 0.9):
                c = np.array(ps.centers)
                span = (c[-1] - c[0]) or 1.0
                x = rng.uniform(c[0] - span, c[-1] + span, 10_000)
                np.testing.assert_allclose(ps.membership(x).sum(axis=1), 1.0, atol=1e-9)


def test_categorical_one_hot_elements():
    ps = categorical_partitions(["a", "b", "c"], 0.9)
    assert ps.C == 3
    np.testing.assert_array_equal(membership_vector(ps, 1), [0, 1, 0])
    schema = (FeatureSchema("c", CAT_KIND, ("a", "b", "c")),)
    d = Dataset(schema, [[1.0], [0.0]], [0, 1], ("x", "y"))
    fz = fuzzify_dataset(d, 2, 7, 0.9)
    row = [make_element(fz.u[0, 0, a], fz.v[0, 0, a]) for a in range(3)]
    assert (row[0].u, row[0].v) == (0.0, 0.9)
    assert row[0].pi == pytest.approx(0.1, abs=1e-12)
    assert (row[1].u, row[1].v, row[1].pi) == (1.0, 0.0, 0.0)


def test_full_hesitation_parameter_gives_complement():
    d = Dataset((FeatureSchema("x", REAL),), [[0.0], [10.0]], [0, 1], ("a", "b"))
    fz = fuzzify_dataset(d, 2, 7, 1.0)
    assert fz.u[0, 0, 1] == 0.0 and fz.v[0, 0, 1] == 1.0


def test_fuzzified_cells(iris):
    fz = fuzzify_dataset(iris, 3, 5, 0.7)
    assert fz.u.shape == (150, 4, 3)
    np.testing.assert_allclose(fz.u.sum(axis=2), 1.0, atol=1e-9)
    np.testing.assert_allclose(fz.v, (1 - fz.u) * 0.7, atol=1e-15)
    for i in range(0, 150, 7):
        for j in range(4):
            for a in range(3):
                assert fz.E[i, j, a] == pytest.approx(ifs_entropy(make_element(fz.u[i, j, a], fz.v[i, j, a])), abs=1e-12)


def test_missing_cells_are_flagged():
    rows = np.array([[1.0, 2.0], [np.nan, 3.0], [5.0, np.nan], [6.0, 1.0]])
    d = Dataset((FeatureSchema("a", REAL), FeatureSchema("b", REAL)), rows, [0, 1, 0, 1], ("p", "q"))
    fz = fuzzify_dataset(d, 2, 7, 0.9)
    np.testing.assert_array_equal(fz.missing, np.isnan(rows))
    assert np.isnan(fz.u[1, 0]).all()


class LabelGuard(Dataset):
    """Dataset that raises once armed if anything touches the labels."""

    def __getattribute__(self, name):
        if name in ("labels", "class_names", "class_counts") and object.__getattribute__(self, "__dict__").get("_armed"):
            raise AssertionError(f"discretizer read {name}")
        return super().__getattribute__(name)


def test_fuzzification_never_reads_labels(iris):
    guarded = LabelGuard(iris.schema, iris.rows, iris.labels, iris.class_names)
    object.__setattr__(guarded, "_armed", True)
    with pytest.raises(AssertionError):
        guarded.labels
    fz = fuzzify_dataset(guarded, 3, 7, 0.9, seed=4)
    ref = fuzzify_dataset(iris, 3, 7, 0.9, seed=4)
    np.testing.assert_array_equal(fz.u, ref.u)


def test_fuzzification_is_deterministic(wine):
    a = fuzzify_dataset(wine, 4, 3, 0.6, seed=9)
    b = fuzzify_dataset(wine, 4, 3, 0.6, seed=9)
    for x, y in [(a.u, b.u), (a.v, b.v), (a.E, b.E)]:
        assert x.tobytes() == y.tobytes()
    assert a.partition_sets == b.partition_sets


def test_constant_feature_warns_and_has_one_partition():
    d = Dataset((FeatureSchema("k", REAL),), np.ones((5, 1)), [0, 1, 0, 1, 0], ("a", "b"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sets = fit_partitions(d, 3, 7, 0.9)
    assert sets[0].C == 1
    assert any(issubclass(w.category, PartitionWarning) for w in caught)


def test_partition_report_lists_every_feature(iris):
    sets = fit_partitions(iris, 2, 7, 0.9)
    text = partition_report(sets, [f.name for f in iris.schema])
    assert len(text.strip().splitlines()) == 4
    assert "centers=" in text and "bands=" in text
