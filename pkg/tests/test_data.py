import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifrf.data import (
    CATEGORICAL,
    INTEGER,
    REAL,
    Dataset,
    FeatureSchema,
    inject_label_noise,
    load_csv,
    read_feature_rows,
    save_csv,
    stratified_kfold,
    stratified_kfold_labels,
)


def test_iris_shape(iris):
    assert iris.n_samples == 150
    assert iris.n_features == 4
    assert all(f.kind == REAL for f in iris.schema)
    assert iris.class_names == ("setosa", "versicolor", "virginica")
    assert iris.class_counts().tolist() == [50, 50, 50]


def test_header_only_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("a,b,class\n")
    with pytest.raises(ValueError, match="zero data rows"):
        load_csv(p)


def test_missing_token_in_integer_column(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("x,y,class\n1,a,p\n2,b,q\n?,a,p\n3,,q\n")
    d = load_csv(p)
    assert d.schema[0].kind == INTEGER
    assert np.isnan(d.rows[2, 0]) and np.isnan(d.rows).sum() == 2
    assert d.schema[1] == FeatureSchema("y", CATEGORICAL, ("a", "b"))
    assert d.class_names == ("p", "q")


def test_label_column_by_name_and_index(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("class,x\nA,1.5\nB,2.5\n")
    a = load_csv(p, "class")
    b = load_csv(p, 0)
    assert a.labels.tolist() == b.labels.tolist() == [0, 1]
    assert a.schema[0].name == "x"
    with pytest.raises(ValueError):
        load_csv(p, "nope")


def test_ragged_and_missing_label(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("x,class\n1,a\n2\n")
    with pytest.raises(ValueError, match="ragged"):
        load_csv(p)
    p.write_text("x,class\n1,a\n2,?\n")
    with pytest.raises(ValueError, match="missing label"):
        load_csv(p)


def test_schema_validation():
    with pytest.raises(ValueError):
        FeatureSchema("x", "complex")
    with pytest.raises(ValueError):
        FeatureSchema("x", CATEGORICAL)
    with pytest.raises(ValueError):
        FeatureSchema("x", REAL, ("a",))
    with pytest.raises(ValueError):
        FeatureSchema("x", CATEGORICAL, ("a", "a"))


def test_dataset_rejects_bad_labels():
    with pytest.raises(ValueError):
        Dataset((FeatureSchema("x", REAL),), [[1.0]], [2], ("a", "b"))


def test_csv_round_trip(tmp_path, rng):
    schema = (FeatureSchema("r", REAL), FeatureSchema("i", INTEGER), FeatureSchema("c", CATEGORICAL, ("u", "w", "z")))
    rows = np.column_stack([rng.normal(size=40), rng.integers(-5, 5, 40), rng.integers(0, 3, 40)]).astype(float)
    rows[3, 0] = rows[7, 2] = np.nan
    d = Dataset(schema, rows, rng.integers(0, 2, 40), ("n", "y"))
    save_csv(d, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.rows[:, :2], d.rows[:, :2])
    assert back.schema[:2] == d.schema[:2]

    def decoded(ds):
        cats = ds.schema[2].categories
        return [None if np.isnan(x) else cats[int(x)] for x in ds.rows[:, 2]]

    assert decoded(back) == decoded(d)
    assert [back.class_names[y] for y in back.labels] == [d.class_names[y] for y in d.labels]

    save_csv(back, tmp_path / "e.csv")
    again = load_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(again.rows, back.rows)
    np.testing.assert_array_equal(again.labels, back.labels)
    assert again.schema == back.schema and again.class_names == back.class_names


def test_read_feature_rows_matches_by_name(tmp_path, iris):
    a, b, c, e = (f.name for f in iris.schema)
    p = tmp_path / "q.csv"
    p.write_text(f"{e},extra,{a},{b},{c}\n0.2,zz,5.1,3.5,1.4\n?,1,1,1,bad\n")
    rows = read_feature_rows(p, iris.schema)
    np.testing.assert_array_equal(rows[0], [5.1, 3.5, 1.4, 0.2])
    assert np.isnan(rows[1, 2]) and np.isnan(rows[1, 3])
    with pytest.raises(ValueError, match="schema mismatch"):
        read_feature_rows(p, iris.schema + (FeatureSchema("other", REAL),))


def test_noise_zero_fraction_is_identity(iris):
    assert inject_label_noise(iris, 0.0, 1) is iris


def test_noise_count_and_multiset(iris):
    noisy = inject_label_noise(iris, 0.3, 5)
    changed = np.flatnonzero(noisy.labels != iris.labels)
    assert changed.size <= 45
    assert noisy.class_counts().tolist() == iris.class_counts().tolist()
    full = inject_label_noise(iris, 1.0, 5)
    assert full.class_counts().tolist() == [50, 50, 50]


def test_noise_selects_floor_fraction():
    # one class per row makes every moved label visible
    d = Dataset((FeatureSchema("x", REAL),), np.zeros((150, 1)), np.arange(150), tuple(map(str, range(150))))
    changed = [int((inject_label_noise(d, 0.3, seed).labels != d.labels).sum()) for seed in range(20)]
    assert max(changed) == 45
    assert min(changed) >= 40


def test_noise_rejects_bad_fraction(iris):
    with pytest.raises(ValueError):
        inject_label_noise(iris, 1.5, 0)


def test_kfold_balanced_iris(iris):
    folds = stratified_kfold(iris, 5, 0)
    for f in range(5):
        test = folds.test_index(f)
        assert test.size == 30
        assert np.bincount(iris.labels[test], minlength=3).tolist() == [10, 10, 10]


def test_kfold_leave_one_out():
    folds = stratified_kfold_labels(np.array([0, 0, 1, 1, 1, 2]), 6, 3)
    assert sorted(folds.assignment.tolist()) == list(range(6))


def test_kfold_small_class_spreads():
    labels = np.array([0] * 20 + [1] * 3)
    folds = stratified_kfold_labels(labels, 5, 9)
    small = folds.assignment[labels == 1]
    assert len(set(small.tolist())) == 3


def test_kfold_errors():
    with pytest.raises(ValueError):
        stratified_kfold_labels(np.zeros(3, int), 1, 0)
    with pytest.raises(ValueError):
        stratified_kfold_labels(np.zeros(3, int), 4, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=6, max_size=80), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_kfold_sizes_differ_by_at_most_one(labels, k, seed):
    labels = np.array(labels)
    if k > labels.size:
        return
    folds = stratified_kfold_labels(labels, k, seed)
    sizes = np.bincount(folds.assignment, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for c in np.unique(labels):
        per = np.bincount(folds.assignment[labels == c], minlength=k)
        assert per.max() - per.min() <= 1
    again = stratified_kfold_labels(labels, k, seed)
    np.testing.assert_array_equal(folds.assignment, again.assignment)


def test_train_test_partition(iris):
    folds = stratified_kfold(iris, 5, 11)
    for train, test in folds.splits():
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == 150
