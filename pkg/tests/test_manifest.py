import numpy as np
import pytest

from core.data.dataset import LandmarkDataset
from core.data.manifest import (
    MANIFEST_NAME, DataConfig, augment_records, build_manifest, preprocess_raw, read_manifest,
    split_by_source, summarize, write_manifest,
)
from core.errors import EyemarkError


def tags_of(records):
    return sorted({r.tag for r in records})


class TestPreprocess:
    def test_empty_directory(self, tmp_path):
        (tmp_path / "raw").mkdir()
        records, skipped = preprocess_raw(tmp_path / "raw", tmp_path / "out", DataConfig(), 64)
        assert records == [] and skipped == 0
        summary = summarize(records)
        assert summary.rows()[-1] == ["total", 0]

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            preprocess_raw(tmp_path / "nope", tmp_path / "out", DataConfig(), 64)

    def test_records_and_groups(self, synthetic_raw, tmp_path):
        records, skipped = preprocess_raw(synthetic_raw, tmp_path / "out", DataConfig(), 64)
        assert skipped == 0 and len(records) == 4
        assert [r.group for r in records] == ["indoor", "indoor", "outdoor", "outdoor"]
        assert records[0].image == "original/indoor/synth_0000.png"
        for record in records:
            assert (record.width, record.height) == (64, 64)
            assert (tmp_path / "out" / record.image).is_file()
            points = np.asarray(record.points)
            assert np.all((points >= 0) & (points < 64))

    def test_unreadable_samples_are_skipped(self, synthetic_raw, tmp_path):
        (synthetic_raw / "indoor" / "broken.png").write_bytes(b"not an image")
        (synthetic_raw / "indoor" / "broken.pts").write_text("version: 1\n", encoding = "utf-8")
        (synthetic_raw / "outdoor" / "no_annotation.png").write_bytes(
            (synthetic_raw / "outdoor" / "synth_0001.png").read_bytes()
        )
        records, skipped = preprocess_raw(synthetic_raw, tmp_path / "out", DataConfig(), 64)
        assert len(records) == 4 and skipped == 2

    def test_missing_box_unless_derived(self, synthetic_raw, tmp_path):
        for box in synthetic_raw.rglob("*.box"):
            box.unlink()
        records, skipped = preprocess_raw(synthetic_raw, tmp_path / "a", DataConfig(), 64)
        assert records == [] and skipped == 4
        records, _ = preprocess_raw(synthetic_raw, tmp_path / "b", DataConfig(box_from_points = True), 64)
        assert len(records) == 4


class TestAugment:
    def test_seven_records_per_image(self, synthetic_raw, tmp_path):
        originals, _ = preprocess_raw(synthetic_raw, tmp_path / "pre", DataConfig(), 64)
        records, summary = augment_records(originals, tmp_path / "pre", tmp_path / "aug", DataConfig())
        assert len(records) + sum(summary.dropped.values()) == 7 * len(originals)
        assert tags_of(records) == ["blur", "hflip", "original", "rot+10", "rot+5", "rot-10", "rot-5"]
        for record in records:
            assert (tmp_path / "aug" / record.image).is_file()
        first = [r for r in records if r.source == originals[0].source]
        assert {r.image for r in first} >= {"original/indoor/synth_0000.png", "hflip/indoor/synth_0000.png"}

    def test_original_copied_byte_for_byte(self, synthetic_raw, tmp_path):
        originals, _ = preprocess_raw(synthetic_raw, tmp_path / "pre", DataConfig(), 64)
        augment_records(originals, tmp_path / "pre", tmp_path / "aug", DataConfig())
        image = originals[0].image
        assert (tmp_path / "aug" / image).read_bytes() == (tmp_path / "pre" / image).read_bytes()

    def test_disabled_augmentations(self, synthetic_raw, tmp_path):
        originals, _ = preprocess_raw(synthetic_raw, tmp_path / "pre", DataConfig(), 64)
        config = DataConfig(flip = False, blur = False, rotations = [5.0])
        records, _ = augment_records(originals, tmp_path / "pre", tmp_path / "aug", config)
        assert tags_of(records) == ["original", "rot+5"]

    def test_summary_table(self, synthetic_raw, tmp_path):
        originals, _ = preprocess_raw(synthetic_raw, tmp_path / "pre", DataConfig(), 64)
        records, summary = augment_records(originals, tmp_path / "pre", tmp_path / "aug", DataConfig(rotations = []))
        rows = summary.rows()
        assert rows[0] == ["category", "indoor", "outdoor", "total"]
        assert rows[1] == ["original", 2, 2, 4]
        assert rows[2] == ["hflip", 2, 2, 4]
        assert rows[3] == ["rotated", 0, 0, 0]
        assert rows[4] == ["blurred", 2, 2, 4]
        assert rows[5] == ["total", 6, 6, 12]
        csv_text = summary.write_csv(tmp_path / "summary.csv").read_text(encoding = "utf-8")
        assert csv_text.splitlines()[1] == "original,2,2,4"

    def test_rotation_set_is_fixed(self):
        with pytest.raises(ValueError):
            DataConfig(rotations = [7.0])


class TestManifest:
    def test_rerun_is_byte_identical(self, synthetic_raw, tmp_path):
        build_manifest(synthetic_raw, tmp_path / "a", DataConfig(), 64)
        build_manifest(synthetic_raw, tmp_path / "b", DataConfig(), 64)
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_round_trip_and_dataset(self, synthetic_raw, tmp_path):
        records, _ = build_manifest(synthetic_raw, tmp_path / "m", DataConfig(), 64)
        assert read_manifest(tmp_path / "m" / MANIFEST_NAME) == records
        dataset = LandmarkDataset.from_manifest(tmp_path / "m" / MANIFEST_NAME)
        assert dataset.images.shape == (len(records), 3, 64, 64)
        np.testing.assert_allclose(dataset.pixel_points(dataset.coords)[0], records[0].points)

    def test_invalid_line_is_reported(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text('{"image": "a.png"}\n', encoding = "utf-8")
        with pytest.raises(EyemarkError, match = ":1:"):
            read_manifest(path)

    def test_empty_dataset(self, tmp_path):
        write_manifest([], tmp_path / MANIFEST_NAME)
        with pytest.raises(EyemarkError, match = "empty"):
            LandmarkDataset.from_manifest(tmp_path / MANIFEST_NAME)


class TestSplit:
    def test_sources_never_straddle(self, synthetic_raw, tmp_path):
        records, _ = build_manifest(synthetic_raw, tmp_path / "m", DataConfig(), 64)
        train, val = split_by_source(records, 0.25, seed = 0)
        assert len({r.source for r in val}) == 1
        assert not {r.source for r in train} & {r.source for r in val}
        assert len(train) + len(val) == len(records)
        assert split_by_source(records, 0.25, seed = 0) == (train, val)

    def test_zero_fraction_keeps_everything(self, synthetic_raw, tmp_path):
        records, _ = build_manifest(synthetic_raw, tmp_path / "m", DataConfig(), 64)
        train, val = split_by_source(records, 0.0, seed = 0)
        assert train == records and val == []
