import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sklpdm import (
    DataError,
    LabeledDataset,
    gen_gaussian_classes,
    gen_ring_classes,
    leave_one_group_out,
    load_csv,
    save_csv,
    with_groups,
)

from oracles import knn_oracle


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_two_rows(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\na,1,2\nb,3,4\n")
        data = load_csv(path)
        assert data.class_count == 2
        assert data.features.shape == (2, 2)
        np.testing.assert_array_equal(data.features, [[1.0, 3.0], [2.0, 4.0]])
        np.testing.assert_array_equal(data.labels, [0, 1])
        assert data.label_names == ("a", "b")

    def test_single_sample(self, tmp_path):
        data = load_csv(write(tmp_path, "label,f0\nonly,5\n"))
        assert data.sample_count == 1
        assert data.class_count == 1

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\na,1,x\n")
        with pytest.raises(DataError, match=r"row 1.*column f1"):
            load_csv(path)

    def test_missing_label_column(self, tmp_path):
        with pytest.raises(DataError, match="label"):
            load_csv(write(tmp_path, "f0,f1\n1,2\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_csv(write(tmp_path, ""))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DataError, match="row 2"):
            load_csv(write(tmp_path, "label,f0,f1\na,1,2\nb,3\n"))

    def test_group_column(self, tmp_path):
        data = load_csv(write(tmp_path, "label,f0,group\na,1,p0\na,2,p1\nb,3,p0\n"))
        np.testing.assert_array_equal(data.groups, [0, 1, 0])
        assert data.group_names == ("p0", "p1")

    def test_non_finite_cell(self, tmp_path):
        with pytest.raises(DataError, match=r"row 1.*column f0"):
            load_csv(write(tmp_path, "label,f0\na,nan\n"))


class TestSaveCsv:
    def test_round_trip(self, tmp_path):
        original = load_csv(write(tmp_path, "label,f0,f1\na,1,2\nb,3,4\n"))
        out = tmp_path / "out.csv"
        save_csv(original, out)
        again = load_csv(out)
        np.testing.assert_array_equal(again.features, original.features)
        np.testing.assert_array_equal(again.labels, original.labels)

    def test_group_column_emitted(self, tmp_path):
        data = LabeledDataset(
            features=np.array([[1.0, 2.0]]),
            labels=np.array([0, 1]),
            class_count=2,
            label_names=("a", "b"),
            groups=np.array([0, 1]),
            group_names=("v0", "v1"),
        )
        out = tmp_path / "g.csv"
        save_csv(data, out)
        header = out.read_text().splitlines()[0]
        assert header == "label,f0,group"
        again = load_csv(out)
        np.testing.assert_array_equal(again.groups, data.groups)

    def test_zero_feature_dataset_rejected(self):
        with pytest.raises(DataError):
            LabeledDataset(
                features=np.zeros((0, 2)), labels=np.array([0, 1]), class_count=2
            )

    def test_round_trip_precision(self, tmp_path):
        rng = np.random.default_rng(3)
        data = LabeledDataset(
            features=rng.standard_normal((4, 12)) * 1e3,
            labels=rng.integers(0, 3, 12),
            class_count=3,
        )
        out = tmp_path / "p.csv"
        save_csv(data, out)
        again = load_csv(out)
        assert np.max(np.abs(again.features - data.features)) <= 1e-12

    def test_unwritable_path(self, tmp_path):
        data = LabeledDataset(features=np.ones((1, 1)), labels=[0], class_count=1)
        with pytest.raises(DataError):
            save_csv(data, tmp_path / "missing-dir" / "x.csv")


class TestGaussianGenerator:
    def test_zero_spread_zero_separation_collapses(self):
        data = gen_gaussian_classes(3, 4, 5, spread=0.0, separation=0.0, seed=1)
        assert np.max(np.abs(data.features - data.features[:, [0]])) == 0.0

    def test_seed_determinism(self):
        a = gen_gaussian_classes(4, 10, 6, 1.0, 5.0, seed=42)
        b = gen_gaussian_classes(4, 10, 6, 1.0, 5.0, seed=42)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_mean_separation_honored(self):
        data = gen_gaussian_classes(4, 30, 8, spread=0.0, separation=7.0, seed=5)
        means = [data.features[:, data.labels == k].mean(axis=1) for k in range(4)]
        for a in range(4):
            for b in range(a + 1, 4):
                assert np.linalg.norm(means[a] - means[b]) >= 7.0 - 1e-9

    def test_wide_separation_knn_accuracy(self):
        data = gen_gaussian_classes(3, 50, 10, spread=1.0, separation=10.0, seed=9)
        train = np.arange(data.sample_count) % 2 == 0
        predicted = knn_oracle(
            data.features[:, train], data.labels[train], data.features[:, ~train], k=1
        )
        assert (predicted == data.labels[~train]).mean() >= 0.99


class TestRingGenerator:
    def test_zero_noise_radii_exact(self):
        data = gen_ring_classes(2, 25, noise=0.0, ambient_dim=4, seed=2)
        radii = np.linalg.norm(data.features, axis=0)
        expected = data.labels + 1.0
        assert np.max(np.abs(radii - expected)) < 1e-9

    def test_seed_determinism(self):
        a = gen_ring_classes(3, 15, 0.1, 5, seed=11)
        b = gen_ring_classes(3, 15, 0.1, 5, seed=11)
        assert np.array_equal(a.features, b.features)

    def test_small_noise_knn_accuracy(self):
        data = gen_ring_classes(2, 60, noise=0.05, ambient_dim=6, seed=3)
        train = np.arange(data.sample_count) % 2 == 0
        predicted = knn_oracle(
            data.features[:, train], data.labels[train], data.features[:, ~train], k=1
        )
        assert (predicted == data.labels[~train]).mean() >= 0.95

    def test_requires_three_ambient_dims(self):
        with pytest.raises(DataError):
            gen_ring_classes(2, 10, 0.1, 2, seed=0)


class TestLeaveOneGroupOut:
    def make(self, groups):
        groups = np.asarray(groups)
        n = len(groups)
        return LabeledDataset(
            features=np.arange(n, dtype=float)[None, :],
            labels=np.arange(n) % 2,
            class_count=2,
            groups=groups,
        )

    def test_one_fold_per_group(self):
        data = self.make(np.arange(10))
        assert len(leave_one_group_out(data).folds) == 10

    def test_two_groups_explicit(self):
        plan = leave_one_group_out(self.make([0, 0, 1]))
        (train0, test0), (train1, test1) = plan.folds
        assert sorted(test0.tolist()) == [0, 1] and sorted(train0.tolist()) == [2]
        assert sorted(test1.tolist()) == [2] and sorted(train1.tolist()) == [0, 1]

    def test_single_group_rejected(self):
        with pytest.raises(DataError):
            leave_one_group_out(self.make([7, 7, 7, 7]))

    def test_missing_groups_rejected(self):
        data = LabeledDataset(features=np.ones((1, 2)), labels=[0, 1], class_count=2)
        with pytest.raises(DataError):
            leave_one_group_out(data)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=5), min_size=2, max_size=30))
    def test_fold_invariants(self, groups):
        if len(set(groups)) < 2:
            return
        plan = leave_one_group_out(self.make(groups))
        everything = set(range(len(groups)))
        groups = np.asarray(groups)
        for train, test in plan.folds:
            assert set(train) | set(test) == everything
            assert set(train) & set(test) == set()
            assert set(groups[train]) & set(groups[test]) == set()


def test_with_groups_covers_all_classes_per_fold():
    data = gen_gaussian_classes(3, 12, 4, 1.0, 5.0, seed=0)
    grouped = with_groups(data, 4)
    for train, _test in leave_one_group_out(grouped).folds:
        assert len(np.unique(grouped.labels[train])) == 3
