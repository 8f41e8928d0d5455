import numpy as np
import pytest

from synthad.data import (
    CategoricalColumn,
    Dataset,
    LabelColumn,
    NumericColumn,
    Schema,
    SchemaError,
    decode_categoricals,
    encode,
    filter_unsupervised_train,
    load_csv,
    split,
)


def _schema():
    return Schema(
        (
            NumericColumn("duration", 0.0, 10.0),
            CategoricalColumn("proto", ("tcp", "udp", "icmp")),
        ),
        LabelColumn("class", "normal"),
    )


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestSchema:
    def test_min_max_order_enforced(self):
        with pytest.raises(SchemaError):
            NumericColumn("x", 1.0, 1.0)

    def test_categories_non_empty_distinct(self):
        with pytest.raises(SchemaError):
            CategoricalColumn("c", ())
        with pytest.raises(SchemaError):
            CategoricalColumn("c", ("a", "a"))

    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            Schema(
                (NumericColumn("x", 0, 1), NumericColumn("x", 0, 1)),
                LabelColumn("y", "normal"),
            )

    def test_encoded_dim(self):
        assert _schema().encoded_dim == 4

    def test_nsl_kdd_format_dimension(self):
        # 38 numeric + one-hot groups of 3, 67, and 11 categories -> d = 119
        cols = [NumericColumn(f"num{i}", 0.0, 1.0) for i in range(38)]
        cols.insert(1, CategoricalColumn("protocol_type", tuple(f"p{i}" for i in range(3))))
        cols.insert(2, CategoricalColumn("service", tuple(f"s{i}" for i in range(67))))
        cols.insert(3, CategoricalColumn("flag", tuple(f"f{i}" for i in range(11))))
        schema = Schema(tuple(cols), LabelColumn("class", "normal"))
        assert schema.encoded_dim == 119

    def test_json_round_trip(self):
        schema = _schema()
        assert Schema.from_json(schema.to_json()) == schema


class TestLoadCsv:
    def test_empty_data_section(self, tmp_path):
        path = _write(tmp_path, "duration,proto,class\n")
        assert len(load_csv(path, _schema())) == 0

    def test_unknown_category_error_names_row_and_column(self, tmp_path):
        path = _write(tmp_path, "duration,proto,class\n1.0,gre,normal\n")
        with pytest.raises(SchemaError) as err:
            load_csv(path, _schema())
        assert "row 0" in str(err.value) and "proto" in str(err.value)

    def test_unknown_category_zero_mode(self, tmp_path):
        path = _write(tmp_path, "duration,proto,class\n1.0,gre,normal\n")
        ds = encode(load_csv(path, _schema(), unknown_category="zero"))
        assert np.array_equal(ds.features[0, 1:4], [0.0, 0.0, 0.0])

    def test_missing_column_rejected(self, tmp_path):
        path = _write(tmp_path, "duration,class\n1.0,normal\n")
        with pytest.raises(SchemaError):
            load_csv(path, _schema())

    def test_unparseable_numeric_rejected(self, tmp_path):
        path = _write(tmp_path, "duration,proto,class\nfast,tcp,normal\n")
        with pytest.raises(SchemaError) as err:
            load_csv(path, _schema())
        assert "duration" in str(err.value)

    def test_header_order_insensitive(self, tmp_path):
        path = _write(tmp_path, "class,proto,duration\nnormal,udp,5.0\n")
        ds = encode(load_csv(path, _schema()))
        assert ds.features[0, 0] == 0.5
        assert np.array_equal(ds.features[0, 1:4], [0.0, 1.0, 0.0])

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_csv("/nonexistent.csv", _schema())


class TestEncode:
    def _table(self, tmp_path, rows):
        body = "\n".join(rows)
        return load_csv(
            _write(tmp_path, f"duration,proto,class\n{body}\n"), _schema()
        )

    def test_min_and_max_map_to_endpoints(self, tmp_path):
        ds = encode(self._table(tmp_path, ["0.0,tcp,normal", "10.0,tcp,normal"]))
        assert ds.features[0, 0] == 0.0
        assert ds.features[1, 0] == 1.0

    def test_out_of_range_clipped(self, tmp_path):
        ds = encode(self._table(tmp_path, ["99.0,tcp,normal", "-5.0,tcp,normal"]))
        assert ds.features[0, 0] == 1.0
        assert ds.features[1, 0] == 0.0

    def test_one_hot_middle_category(self, tmp_path):
        ds = encode(self._table(tmp_path, ["1.0,udp,normal"]))
        assert np.array_equal(ds.features[0, 1:4], [0.0, 1.0, 0.0])

    def test_label_mapping(self, tmp_path):
        ds = encode(self._table(tmp_path, ["1.0,tcp,normal", "1.0,tcp,dos"]))
        assert list(ds.labels) == [1, -1]

    def test_unlisted_label_rejected_with_explicit_anomalies(self, tmp_path):
        schema = Schema(
            (NumericColumn("duration", 0.0, 10.0),
             CategoricalColumn("proto", ("tcp", "udp", "icmp"))),
            LabelColumn("class", "normal", anomaly_values=("dos",)),
        )
        path = _write(tmp_path, "duration,proto,class\n1.0,tcp,probe\n")
        with pytest.raises(SchemaError):
            encode(load_csv(path, schema))

    def test_decode_round_trip(self, tmp_path):
        ds = encode(self._table(tmp_path, ["1.0,udp,normal", "2.0,icmp,dos"]))
        decoded = decode_categoricals(ds)
        assert [r["proto"] for r in decoded] == ["udp", "icmp"]


class TestDataset:
    def test_out_of_range_features_rejected(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[1.5]]), np.array([1]))

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[0.5]]), np.array([0]))

    def test_audit_csv(self, tmp_path):
        ds = Dataset(np.array([[0.25, 1.0]]), np.array([-1]))
        path = tmp_path / "audit.csv"
        ds.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x0,x1,label"
        assert lines[1].endswith(",-1")


class TestFilter:
    def test_all_normal_unchanged(self):
        ds = Dataset(np.zeros((3, 1)), np.ones(3, dtype=int))
        assert len(filter_unsupervised_train(ds)) == 3

    def test_all_anomaly_rejected(self):
        ds = Dataset(np.zeros((3, 1)), -np.ones(3, dtype=int))
        with pytest.raises(ValueError):
            filter_unsupervised_train(ds)

    def test_mixed_counts(self):
        labels = np.array([1] * 60 + [-1] * 40)
        ds = Dataset(np.zeros((100, 1)), labels)
        out = filter_unsupervised_train(ds)
        assert len(out) == 60 and np.all(out.labels == 1)


class TestSplit:
    def _dataset(self, n=100, anom_frac=0.3):
        n_anom = int(n * anom_frac)
        feats = np.linspace(0.0, 1.0, n)[:, None]  # unique values identify rows
        labels = np.array([1] * (n - n_anom) + [-1] * n_anom)
        return Dataset(feats, labels)

    def test_exact_sizes(self):
        parts = split(self._dataset(), (0.8, 0.1, 0.1), seed=0)
        assert [len(p) for p in parts] == [80, 10, 10]

    def test_zero_fraction_rejected(self):
        with pytest.raises(ValueError):
            split(self._dataset(), (1.0, 0.0, 0.0), seed=0)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            split(self._dataset(), (0.5, 0.2, 0.2), seed=0)

    def test_partition_no_overlap_no_loss(self):
        ds = self._dataset()
        parts = split(ds, (0.6, 0.2, 0.2), seed=1)
        seen = np.concatenate([p.features[:, 0] for p in parts])
        assert np.array_equal(np.sort(seen), ds.features[:, 0])

    def test_stratified_within_one_sample(self):
        ds = self._dataset(n=200, anom_frac=0.25)
        parts = split(ds, (0.5, 0.25, 0.25), seed=2)
        for p in parts:
            expected = 0.25 * len(p)
            assert abs(np.sum(p.labels == -1) - expected) <= 1.0

    def test_deterministic(self):
        ds = self._dataset()
        a = split(ds, (0.6, 0.2, 0.2), seed=3)
        b = split(ds, (0.6, 0.2, 0.2), seed=3)
        for x, y in zip(a, b):
            assert np.array_equal(x.features, y.features)

    def test_empty_split_detected(self):
        with pytest.raises(ValueError):
            split(self._dataset(n=5, anom_frac=0.4), (0.9, 0.05, 0.05), seed=0)
