from collections import Counter

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crop_ensemble import InvalidInputError, SplitInfeasibleError
from crop_ensemble.datakit import (
    EvalReport,
    ImageRecord,
    SourceAccuracy,
    SplitSpec,
    append_manifest_note,
    evaluate,
    prepare_lfw,
    read_manifest,
    split,
    write_manifest,
)


def synthetic_records(subjects, images_per_subject, source="Other", label="Man"):
    return [
        ImageRecord(f"{source}/{s}_{i}.jpg", f"subj{s}", label, source)
        for s in range(subjects)
        for i in range(images_per_subject)
    ]


def split_counts(records):
    c = Counter(r.split for r in records)
    return (c["train"], c["val"], c["test"])


class TestSplit:
    def test_subjects_never_straddle_splits(self):
        out = split(synthetic_records(10, 10), SplitSpec(seed=3))
        by_split = {}
        for r in out:
            by_split.setdefault(r.split, set()).add(r.subject_id)
        assert by_split["train"] & by_split["val"] == set()
        assert by_split["train"] & by_split["test"] == set()
        assert by_split["val"] & by_split["test"] == set()

    def test_ten_by_ten_counts(self):
        out = split(synthetic_records(10, 10), SplitSpec(seed=5))
        assert split_counts(out) == (50, 20, 30)

    def test_deterministic_for_fixed_seed(self):
        records = synthetic_records(30, 4)
        a = split(records, SplitSpec(seed=11))
        b = split(records, SplitSpec(seed=11))
        assert [(r.path, r.split) for r in a] == [(r.path, r.split) for r in b]

    def test_seed_changes_assignment(self):
        records = synthetic_records(30, 4)
        a = split(records, SplitSpec(seed=1))
        b = split(records, SplitSpec(seed=2))
        assert [(r.path, r.split) for r in a] != [(r.path, r.split) for r in b]

    def test_sources_split_independently(self):
        records = synthetic_records(10, 10, source="Adience") + synthetic_records(
            20, 5, source="LFW")
        out = split(records, SplitSpec(seed=0))
        adience = [r for r in out if r.source == "Adience"]
        lfw = [r for r in out if r.source == "LFW"]
        assert split_counts(adience) == (50, 20, 30)
        assert split_counts(lfw) == (50, 15, 35)

    def test_empty_records_rejected(self):
        with pytest.raises(InvalidInputError):
            split([], SplitSpec())

    def test_dominant_subject_is_infeasible(self):
        records = [ImageRecord(f"p/{i}.jpg", "whale", "Man") for i in range(60)]
        records += [ImageRecord(f"p/x{i}.jpg", f"s{i}", "Man") for i in range(40)]
        with pytest.raises(SplitInfeasibleError, match="whale"):
            split(records, SplitSpec())

    def test_subject_disjoint_is_mandatory(self):
        with pytest.raises(InvalidInputError):
            SplitSpec(subject_disjoint=False)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            SplitSpec(fractions=(0.6, 0.3, 0.3))

    @settings(max_examples=30)
    @given(st.lists(st.integers(1, 12), min_size=4, max_size=40), st.integers(0, 999))
    def test_fraction_fidelity(self, group_sizes, seed):
        total = sum(group_sizes)
        max_group = max(group_sizes)
        if max_group > 0.5 * total:
            return  # infeasible by construction; covered elsewhere
        records = [
            ImageRecord(f"p/{s}_{i}.jpg", f"subj{s}", "Man")
            for s, n in enumerate(group_sizes)
            for i in range(n)
        ]
        out = split(records, SplitSpec(seed=seed))
        counts = split_counts(out)
        for count, target in zip(counts, (0.50, 0.15, 0.35)):
            assert abs(count - target * total) <= max_group


class TestEvaluate:
    def test_adience_headline_arithmetic(self):
        report = EvalReport(correct=8447, total=9303, per_source={})
        assert round(report.accuracy, 1) == 90.8

    def test_lfw_headline_arithmetic(self):
        report = EvalReport(correct=4414, total=4632, per_source={})
        assert round(report.accuracy, 1) == 95.3

    def test_zero_correct(self):
        records = [ImageRecord(f"p/{i}.jpg", f"s{i}", "Man") for i in range(5)]
        report = evaluate([(r, "Woman") for r in records])
        assert report.accuracy == 0.0

    def test_per_source_breakdown(self):
        adience = [ImageRecord(f"a/{i}.jpg", f"s{i}", "Man", "Adience") for i in range(4)]
        lfw = [ImageRecord(f"l/{i}.jpg", f"s{i}", "Woman", "LFW") for i in range(2)]
        pairs = [(r, "Man") for r in adience] + [(r, "Man") for r in lfw]
        report = evaluate(pairs)
        assert report.per_source["Adience"] == SourceAccuracy(4, 4)
        assert report.per_source["LFW"] == SourceAccuracy(0, 2)
        assert report.correct == 4 and report.total == 6

    def test_accepts_decision_like_objects(self):
        from crop_ensemble import GenderScore, single_crop_decision

        record = ImageRecord("p/0.jpg", "s0", "Man")
        decision = single_crop_decision(GenderScore(0.9, 0.1))
        assert evaluate([(record, decision)]).correct == 1

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            evaluate([])

    @given(st.integers(1, 10000), st.data())
    def test_accuracy_times_total_recovers_correct(self, total, data):
        correct = data.draw(st.integers(0, total))
        report = EvalReport(correct=correct, total=total, per_source={})
        assert round(report.accuracy / 100.0 * total) == correct


class TestManifestIO:
    def test_roundtrip(self, tmp_path):
        records = [
            ImageRecord("data/a 1.jpg", "s1", "Man", "Adience", "train"),
            ImageRecord("data/b.jpg", "s2", "Woman", "LFW", None),
        ]
        path = tmp_path / "m.tsv"
        write_manifest(records, path)
        assert read_manifest(path) == records

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("# header\n\np.jpg\ts1\tMan\tOther\t-\n")
        assert read_manifest(path) == [ImageRecord("p.jpg", "s1", "Man", "Other", None)]

    def test_bad_field_count_names_line(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("p.jpg\ts1\n")
        with pytest.raises(InvalidInputError, match=":1"):
            read_manifest(path)

    def test_provenance_note_is_ignored_by_parser(self, tmp_path):
        path = tmp_path / "m.tsv"
        write_manifest([ImageRecord("p.jpg", "s1", "Man")], path)
        append_manifest_note(path, "lfw-prepared: nothing to do")
        assert len(read_manifest(path)) == 1


class TestPrepareLfw:
    @staticmethod
    def _write_png(path, size, value=90):
        cv2.imwrite(str(path), np.full((size, size, 3), value, dtype=np.uint8))

    def test_resamples_to_reference(self, tmp_path):
        img = tmp_path / "face.png"
        self._write_png(img, 250)
        records = [ImageRecord(str(img), "s1", "Man", "LFW")]
        report = prepare_lfw(records)
        assert report.resampled == [str(img)]
        reloaded = cv2.imread(str(img))
        assert reloaded.shape == (816, 816, 3)

    def test_idempotent(self, tmp_path):
        img = tmp_path / "face.png"
        self._write_png(img, 250)
        records = [ImageRecord(str(img), "s1", "Man", "LFW")]
        prepare_lfw(records)
        report = prepare_lfw(records)
        assert report.resampled == []
        assert report.already_normalized == [str(img)]

    def test_errors_isolated(self, tmp_path):
        good = tmp_path / "good.png"
        self._write_png(good, 250)
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"this is not an image")
        records = [
            ImageRecord(str(good), "s1", "Man", "LFW"),
            ImageRecord(str(bad), "s2", "Man", "LFW"),
        ]
        report = prepare_lfw(records)
        assert report.resampled == [str(good)]
        assert len(report.failures) == 1
        assert report.failures[0][0] == str(bad)

    def test_non_lfw_sources_untouched(self, tmp_path):
        img = tmp_path / "adience.png"
        self._write_png(img, 250)
        report = prepare_lfw([ImageRecord(str(img), "s1", "Man", "Adience")])
        assert report.resampled == []
        assert cv2.imread(str(img)).shape == (250, 250, 3)

    def test_writes_manifest_provenance(self, tmp_path):
        img = tmp_path / "face.png"
        self._write_png(img, 250)
        manifest = tmp_path / "m.tsv"
        records = [ImageRecord(str(img), "s1", "Man", "LFW")]
        write_manifest(records, manifest)
        prepare_lfw(records, manifest_path=manifest)
        assert "lfw-prepared" in manifest.read_text()
        assert read_manifest(manifest) == records
