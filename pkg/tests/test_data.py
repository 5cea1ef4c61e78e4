from __future__ import annotations

import numpy as np
import pytest

from gradframe.data import (
    Boundary,
    CsvSchema,
    Domain,
    DomainSet,
    GaussianSpec,
    LabeledPoint,
    apply_standardization,
    generate_gaussian_domain,
    label_by_boundary,
    load_csv_dataset,
    read_ordinal_column,
    save_csv_dataset,
    simulation_source,
    simulation_target,
    split_into_k_domains,
    standardize,
)
from gradframe.errors import ConfigError, DataError, ShapeError


class TestBoundaryLabeling:
    def test_on_the_line_labels_zero(self):
        assert label_by_boundary(np.array([0.0, 0.0]), Boundary(-1.0, 0.0)) == 0

    def test_above_the_line_labels_one(self):
        assert label_by_boundary(np.array([1.0, 2.0]), Boundary(-1.0, 0.0)) == 1

    def test_steeper_boundary(self):
        assert label_by_boundary(np.array([1.0, -3.0]), Boundary(-2.0, 0.0)) == 0

    def test_wrong_dimension(self):
        with pytest.raises(ShapeError):
            label_by_boundary(np.array([1.0, 2.0, 3.0]), Boundary(-1.0, 0.0))


class TestGaussianGeneration:
    def test_counts_and_exact_label_consistency(self):
        spec_a = GaussianSpec(np.array([-2.5, -2.5]), 0.5 * np.eye(2), 100)
        spec_b = GaussianSpec(np.array([2.5, 2.5]), 0.5 * np.eye(2), 100)
        boundary = Boundary(-1.0, 0.0)
        dom = generate_gaussian_domain("S1", [spec_a, spec_b], boundary, seed=42)
        assert len(dom) == 200
        for p in dom.points:
            assert p.label == label_by_boundary(p.features, boundary)

    def test_sample_mean_converges(self):
        mean = np.array([1.0, -2.0])
        spec = GaussianSpec(mean, 0.25 * np.eye(2), 4000)
        dom = generate_gaussian_domain("g", [spec], Boundary(-1.0, 0.0), seed=7)
        sample_mean = dom.feature_matrix().mean(axis=0)
        tol = 4.0 * 0.5 / np.sqrt(4000)
        assert np.all(np.abs(sample_mean - mean) < tol)

    def test_zero_covariance_degenerates_to_mean(self):
        spec = GaussianSpec(np.array([1.5, 1.5]), np.zeros((2, 2)), 20)
        dom = generate_gaussian_domain("d", [spec], Boundary(-1.0, 0.0), seed=1)
        assert np.allclose(dom.feature_matrix(), [1.5, 1.5], atol=1e-4)
        assert len({p.label for p in dom.points}) == 1

    def test_non_psd_covariance_rejected(self):
        with pytest.raises(DataError):
            GaussianSpec(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 5)

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(DataError):
            GaussianSpec(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), 5)

    def test_seeded_reproducibility(self):
        spec = GaussianSpec(np.zeros(2), np.eye(2), 50)
        a = generate_gaussian_domain("a", [spec], Boundary(-1.0, 0.0), seed=3)
        b = generate_gaussian_domain("a", [spec], Boundary(-1.0, 0.0), seed=3)
        assert np.array_equal(a.feature_matrix(), b.feature_matrix())


class TestSimulationPresets:
    def test_source_composition(self):
        src = simulation_source(0)
        assert src.k == 2
        assert [d.id for d in src.domains] == ["S1", "S2"]
        assert all(len(d) == 200 for d in src.domains)

    def test_target_composition(self):
        tgt = simulation_target(0)
        assert len(tgt) == 100
        labels = tgt.label_vector()
        assert set(labels.tolist()) == {0.0, 1.0}


class TestCsvRoundTrip:
    def test_round_trip_exact(self, tmp_path):
        ds = simulation_source(5)
        path = tmp_path / "ds.csv"
        save_csv_dataset(ds, path)
        loaded = load_csv_dataset(path)
        assert [d.id for d in loaded.domains] == [d.id for d in ds.domains]
        for da, db in zip(ds.domains, loaded.domains):
            assert np.array_equal(da.feature_matrix(), db.feature_matrix())
            assert np.array_equal(da.label_vector(), db.label_vector())

    def test_domains_grouped(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text(
            "x0,x1,label,domain\n1,2,0,A\n3,4,1,B\n5,6,0,A\n7,8,1,B\n"
        )
        ds = load_csv_dataset(path)
        assert ds.k == 2
        assert len(ds.domain("A")) == 2
        assert len(ds.domain("B")) == 2
        assert np.array_equal(ds.domain("A").feature_matrix(), [[1, 2], [5, 6]])

    def test_without_domain_column(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("x0,x1,label\n1,2,0\n3,4,1\n")
        ds = load_csv_dataset(path)
        assert ds.k == 1

    def test_bad_label_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,label\n1,2,0\n3,4,1\n5,6,2\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv_dataset(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "missing.csv"
        path.write_text("x0,x1,outcome\n1,2,0\n")
        with pytest.raises(DataError, match="label"):
            load_csv_dataset(path)

    def test_non_numeric_feature_names_row_and_column(self, tmp_path):
        path = tmp_path / "nn.csv"
        path.write_text("x0,x1,label\n1,2,0\n1,oops,1\n")
        with pytest.raises(DataError, match="row 2.*x1"):
            load_csv_dataset(path)

    def test_missing_file(self):
        with pytest.raises(DataError):
            load_csv_dataset("/nonexistent/path.csv")

    def test_explicit_feature_columns(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("a,b,c,label\n1,2,9,0\n3,4,9,1\n")
        ds = load_csv_dataset(path, CsvSchema(feature_columns=("a", "b"), domain_column=None))
        assert ds.feature_dim == 2

    def test_read_ordinal_column(self, tmp_path):
        path = tmp_path / "keys.csv"
        path.write_text("x0,label,month\n1,0,3\n2,1,1\n")
        assert read_ordinal_column(path, "month") == [3, 1]


class TestStandardize:
    def _ds(self, rows):
        points = tuple(LabeledPoint(np.array(r, dtype=float), i % 2) for i, r in enumerate(rows))
        return DomainSet((Domain("d", points),))

    def test_constant_feature_maps_to_zero(self):
        ds = standardize(self._ds([[5.0, 1.0], [5.0, 3.0]]))
        x = ds.pooled().feature_matrix()
        assert np.all(x[:, 0] == 0.0)

    def test_two_point_feature_maps_to_unit(self):
        ds = standardize(self._ds([[0.0, 0.0], [2.0, 2.0]]))
        x = ds.pooled().feature_matrix()
        assert np.allclose(sorted(x[:, 0]), [-1.0, 1.0])

    def test_moments_after_transform(self):
        raw = simulation_source(3)
        ds = standardize(raw)
        x = ds.pooled().feature_matrix()
        assert np.allclose(x.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(x.std(axis=0), 1.0, atol=1e-12)

    def test_stats_apply_to_held_out(self):
        raw = simulation_source(3)
        ds = standardize(raw)
        held_out = simulation_target(3)
        transformed = apply_standardization(held_out, ds.standardization)
        expected = (held_out.feature_matrix() - ds.standardization.mean) / ds.standardization.std
        assert np.allclose(transformed.feature_matrix(), expected)


class TestSplitIntoKDomains:
    def _domain_with_keys(self, keys):
        points = tuple(
            LabeledPoint(np.array([float(k), 0.0]), i % 2) for i, k in enumerate(keys)
        )
        return Domain("base", points), list(keys)

    def test_nine_months_into_four(self):
        keys = [m for m in range(1, 10) for _ in range(3)]
        dom, ks = self._domain_with_keys(keys)
        groups = split_into_k_domains(dom, 4, ks)
        spans = [sorted({int(p.features[0]) for p in g.points}) for g in groups.domains]
        assert spans == [[1, 2], [3, 4], [5, 6], [7, 8, 9]]

    def test_k_equals_distinct(self):
        keys = [1, 2, 3, 4]
        dom, ks = self._domain_with_keys(keys)
        groups = split_into_k_domains(dom, 4, ks)
        assert groups.k == 4
        assert all(len(g) == 1 for g in groups.domains)

    def test_balanced_two_way(self):
        keys = list(range(1, 11))
        dom, ks = self._domain_with_keys(keys)
        groups = split_into_k_domains(dom, 2, ks)
        spans = [sorted({int(p.features[0]) for p in g.points}) for g in groups.domains]
        assert spans == [[1, 2, 3, 4, 5], [6, 7, 8, 9, 10]]

    def test_partition_property(self):
        keys = [3, 1, 2, 3, 2, 1, 4, 5, 4]
        dom, ks = self._domain_with_keys(keys)
        groups = split_into_k_domains(dom, 3, ks)
        total = sum(len(g) for g in groups.domains)
        assert total == len(dom)
        all_rows = np.concatenate([g.feature_matrix()[:, 0] for g in groups.domains])
        assert sorted(all_rows.tolist()) == sorted(float(k) for k in keys)

    def test_k_exceeding_distinct_keys(self):
        dom, ks = self._domain_with_keys([1, 1, 2, 2])
        with pytest.raises(DataError):
            split_into_k_domains(dom, 3, ks)

    def test_k_below_two(self):
        dom, ks = self._domain_with_keys([1, 2, 3])
        with pytest.raises(ConfigError):
            split_into_k_domains(dom, 1, ks)


class TestDomainTypes:
    def test_empty_domain_rejected(self):
        with pytest.raises(DataError):
            Domain("empty", ())

    def test_duplicate_ids_rejected(self):
        p = (LabeledPoint(np.array([1.0]), 0),)
        with pytest.raises(DataError):
            DomainSet((Domain("a", p), Domain("a", p)))

    def test_label_validation(self):
        with pytest.raises(DataError):
            LabeledPoint(np.array([1.0]), 3)

    def test_non_finite_features_rejected(self):
        with pytest.raises(DataError):
            LabeledPoint(np.array([np.inf]), 0)
