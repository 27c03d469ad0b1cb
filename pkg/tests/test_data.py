import json

import numpy as np
import pytest

from eegintent.data import (
    AcquisitionSpec,
    Dataset,
    DomainLabel,
    TrialRecord,
    load_dataset,
    save_dataset,
    stratified_split,
    stratified_split_indices,
)
from eegintent.errors import (
    CellTooSmall,
    DimensionMismatch,
    IoFailure,
    MalformedManifest,
    MissingFile,
    NonFiniteSample,
)
from eegintent.montage import default_montage


def tiny_spec(n_channels=4, n_samples=32):
    return AcquisitionSpec(
        sample_rate_hz=float(n_samples),
        n_channels=n_channels,
        trial_seconds=1.0,
        band_low_hz=1.0,
        band_high_hz=n_samples / 4.0,
    )


def make_dataset(n_trials=8, n_channels=4, n_samples=32, seed=0):
    spec = tiny_spec(n_channels, n_samples)
    rng = np.random.default_rng(seed)
    names = default_montage().channel_names[:n_channels]
    trials = [
        TrialRecord(
            i,
            i % 4,
            DomainLabel.MISARTICULATED if i % 2 else DomainLabel.CORRECT,
            rng.normal(size=(n_channels, n_samples)),
        )
        for i in range(n_trials)
    ]
    return Dataset(spec, names, tuple(trials))


class TestAcquisitionSpec:
    def test_default_sample_count(self):
        assert AcquisitionSpec().n_samples == 1500

    def test_band_must_fit_under_nyquist(self):
        with pytest.raises(ValueError):
            AcquisitionSpec(sample_rate_hz=80.0)  # 50 Hz > Nyquist
        with pytest.raises(ValueError):
            AcquisitionSpec(band_low_hz=10.0, band_high_hz=5.0)


class TestValidation:
    def test_class_label_range(self):
        with pytest.raises(ValueError):
            TrialRecord(0, 4, DomainLabel.CORRECT, np.zeros((4, 32)))

    def test_samples_stored_as_float32(self):
        t = TrialRecord(0, 0, DomainLabel.CORRECT, np.zeros((4, 32)))
        assert t.samples.dtype == np.float32
        assert not t.samples.flags.writeable

    def test_duplicate_trial_ids(self):
        ds = make_dataset(2)
        with pytest.raises(ValueError, match="duplicate"):
            Dataset(ds.spec, ds.channel_names, (ds.trials[0], ds.trials[0]))

    def test_dimension_mismatch(self):
        ds = make_dataset(1)
        bad = TrialRecord(5, 0, DomainLabel.CORRECT, np.zeros((3, 32)))
        with pytest.raises(DimensionMismatch, match="trial 5"):
            Dataset(ds.spec, ds.channel_names, (bad,))

    def test_non_finite_sample(self):
        ds = make_dataset(1)
        samples = np.zeros((4, 32))
        samples[2, 7] = np.nan
        bad = TrialRecord(3, 0, DomainLabel.CORRECT, samples)
        with pytest.raises(NonFiniteSample, match="trial 3"):
            Dataset(ds.spec, ds.channel_names, (bad,))

    def test_unknown_channel_name(self):
        ds = make_dataset(1)
        with pytest.raises(ValueError, match="montage"):
            Dataset(ds.spec, ("Fp1", "Fp2", "XX", "F7"), ds.trials)


class TestRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        ds = make_dataset(8)
        path = tmp_path / "set.json"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.spec == ds.spec
        assert loaded.channel_names == ds.channel_names
        assert len(loaded) == len(ds)
        for a, b in zip(ds.trials, loaded.trials):
            assert a.trial_id == b.trial_id
            assert a.class_label == b.class_label
            assert a.domain_label == b.domain_label
            assert a.samples.tobytes() == b.samples.tobytes()

    def test_second_save_identical_bytes(self, tmp_path):
        ds = make_dataset(5)
        save_dataset(ds, tmp_path / "a.json")
        save_dataset(ds, tmp_path / "b.json")
        a = (tmp_path / "a.bin").read_bytes()
        b = (tmp_path / "b.bin").read_bytes()
        assert a == b

    def test_empty_dataset(self, tmp_path):
        ds = Dataset(tiny_spec(), default_montage().channel_names[:4], ())
        path = tmp_path / "empty.json"
        save_dataset(ds, path)
        manifest = json.loads(path.read_text())
        assert manifest["trials"] == []
        assert len(load_dataset(path)) == 0

    def test_unwritable_directory(self, tmp_path):
        ds = make_dataset(1)
        with pytest.raises(IoFailure):
            save_dataset(ds, tmp_path / "missing_dir" / "set.json")


class TestLoadErrors:
    def test_missing_manifest(self, tmp_path):
        with pytest.raises(MissingFile):
            load_dataset(tmp_path / "nope.json")

    def test_missing_blob(self, tmp_path):
        ds = make_dataset(2)
        path = tmp_path / "set.json"
        save_dataset(ds, path)
        (tmp_path / "set.bin").unlink()
        with pytest.raises(MissingFile):
            load_dataset(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(MalformedManifest):
            load_dataset(path)

    def test_wrong_format_marker(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "other"}))
        with pytest.raises(MalformedManifest):
            load_dataset(path)

    def test_blob_length_mismatch_names_trial(self, tmp_path):
        ds = make_dataset(2)
        path = tmp_path / "set.json"
        save_dataset(ds, path)
        manifest = json.loads(path.read_text())
        # manifest declares 4x32 samples; shrink trial 1's blob span
        manifest["trials"][1]["byte_length"] -= 4 * 32
        path.write_text(json.dumps(manifest))
        with pytest.raises(DimensionMismatch, match="trial 1"):
            load_dataset(path)

    def test_non_finite_blob_names_trial(self, tmp_path):
        ds = make_dataset(2)
        path = tmp_path / "set.json"
        save_dataset(ds, path)
        blob_path = tmp_path / "set.bin"
        raw = bytearray(blob_path.read_bytes())
        offset = json.loads(path.read_text())["trials"][1]["byte_offset"]
        raw[offset : offset + 4] = np.float32(np.inf).tobytes()
        blob_path.write_bytes(bytes(raw))
        with pytest.raises(NonFiniteSample, match="trial 1"):
            load_dataset(path)


class TestStratifiedSplit:
    def balanced_labels(self, per_cell=25):
        classes = np.repeat(np.arange(4), 2 * per_cell)
        domains = np.tile(np.repeat([0, 1], per_cell), 4)
        return classes, domains

    def test_balanced_200_fraction_02(self):
        classes, domains = self.balanced_labels()
        train, test = stratified_split_indices(classes, domains, 0.2, seed=9)
        assert len(test) == 40 and len(train) == 160
        for c in range(4):
            for d in (0, 1):
                in_cell = (classes[test] == c) & (domains[test] == d)
                assert in_cell.sum() == 5

    def test_partition_and_determinism(self):
        classes, domains = self.balanced_labels(per_cell=6)
        a = stratified_split_indices(classes, domains, 0.3, seed=4)
        b = stratified_split_indices(classes, domains, 0.3, seed=4)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        merged = np.sort(np.concatenate(a))
        assert np.array_equal(merged, np.arange(len(classes)))

    def test_test_count_clamped_to_leave_one(self):
        classes = np.zeros(2, dtype=int)
        domains = np.zeros(2, dtype=int)
        train, test = stratified_split_indices(classes, domains, 0.9, seed=0)
        assert len(test) == 1 and len(train) == 1

    def test_cell_too_small(self):
        classes = np.array([0, 0, 1])
        domains = np.array([0, 0, 0])
        with pytest.raises(CellTooSmall, match="class=1"):
            stratified_split_indices(classes, domains, 0.5, seed=0)

    def test_dataset_level_split(self):
        ds = make_dataset(16)
        train, test = stratified_split(ds, 0.25, seed=1)
        assert len(train) + len(test) == len(ds)
        ids = {t.trial_id for t in train.trials} | {t.trial_id for t in test.trials}
        assert ids == {t.trial_id for t in ds.trials}

    def test_fraction_out_of_range(self):
        classes, domains = self.balanced_labels(per_cell=3)
        with pytest.raises(ValueError):
            stratified_split_indices(classes, domains, 1.0, seed=0)
