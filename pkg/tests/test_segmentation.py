import json

import numpy as np
import pytest

from voicerisk.audio import AudioBuffer
from voicerisk.errors import (
    IndexOutOfRangeError,
    OutOfBoundsError,
    OverlapError,
    SchemaError,
    SilentInputError,
)
from voicerisk.segmentation import (
    STORY_SENTENCE_COUNTS,
    AlignmentEntry,
    ManifestRow,
    PhraseId,
    expand_manifest_keys,
    load_alignment,
    load_manifest,
    segment_by_alignment,
    segment_by_energy,
    write_manifest,
)

FS = 16000


def write_alignment(path, entries):
    payload = [{"story_id": s, "sentence_index": i, "start_s": a, "end_s": b, "text": ""}
               for (s, i, a, b) in entries]
    path.write_text(json.dumps(payload))


def test_phrase_id_bounds():
    PhraseId("story1", 5)
    PhraseId("story3", 15)
    with pytest.raises(IndexOutOfRangeError):
        PhraseId("story1", 6)
    with pytest.raises(IndexOutOfRangeError):
        PhraseId("storyX", 0)


def test_load_alignment_sorted(tmp_path):
    p = tmp_path / "a.json"
    write_alignment(p, [("story1", 1, 5.0, 6.0), ("story1", 0, 1.0, 2.0)])
    entries = load_alignment(p)
    assert [e.phrase.sentence_index for e in entries] == [1, 0] or \
        [e.start_s for e in entries] == [1.0, 5.0]
    assert entries[0].start_s == 1.0


def test_load_alignment_bad_span(tmp_path):
    p = tmp_path / "a.json"
    write_alignment(p, [("story1", 0, 2.0, 2.0)])
    with pytest.raises(SchemaError):
        load_alignment(p)


def test_load_alignment_index_out_of_range(tmp_path):
    p = tmp_path / "a.json"
    write_alignment(p, [("story1", 7, 0.0, 1.0)])  # story1 has 6 sentences
    with pytest.raises(IndexOutOfRangeError):
        load_alignment(p)


def test_load_alignment_overlap(tmp_path):
    p = tmp_path / "a.json"
    write_alignment(p, [("story1", 0, 0.0, 2.0), ("story1", 1, 1.5, 3.0)])
    with pytest.raises(OverlapError):
        load_alignment(p)


def _meta(story="story1"):
    return ManifestRow("s01", "female", 5, story, 1, "x.wav", "a.json")


def test_segment_by_alignment_slicing():
    buf = AudioBuffer(np.arange(10 * FS) / (10 * FS), FS, "r")
    entries = [AlignmentEntry(PhraseId("story1", 0), 0.0, 4.0),
               AlignmentEntry(PhraseId("story1", 1), 4.0, 10.0)]
    records = segment_by_alignment(buf, entries, _meta())
    assert len(records) == 2
    assert records[0].audio.samples.size == 4 * FS
    assert records[1].audio.samples.size == 6 * FS
    assert records[0].risk_label == 1
    assert records[0].segment_key == "s01/story1/0/1"
    total = sum(r.audio.samples.size for r in records)
    assert total <= buf.samples.size


def test_segment_by_alignment_out_of_bounds():
    buf = AudioBuffer(np.zeros(10 * FS) + 0.1, FS, "r")
    entries = [AlignmentEntry(PhraseId("story1", 0), 2.0, 12.0)]
    with pytest.raises(OutOfBoundsError):
        segment_by_alignment(buf, entries, _meta())


def test_full_session_segment_count():
    # 20 subjects x 2 repetitions x (6 + 7 + 16) sentences = 1160
    rows = []
    for i in range(20):
        for story in STORY_SENTENCE_COUNTS:
            for rep in (1, 2):
                rows.append(ManifestRow(f"s{i:02d}", "male", 2, story, rep, "", ""))
    assert len(expand_manifest_keys(rows)) == 1160


def test_manifest_roundtrip(tmp_path):
    rows = [ManifestRow("s01", "female", 5, "story1", 1, "wav/a.wav", "al/a.json"),
            ManifestRow("s02", "male", 2, "story3", 2, "wav/b.wav", "")]
    p = tmp_path / "m.csv"
    write_manifest(p, rows)
    back = load_manifest(p)
    assert back == rows


def test_manifest_rejects_bad_gender(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("subject_id,gender,risk_score,story_id,repetition,audio_path,alignment_path\n"
                 "s01,unknown,3,story1,1,a.wav,a.json\n")
    with pytest.raises(SchemaError):
        load_manifest(p)


def _tone(dur_s, freq=220.0):
    t = np.arange(int(dur_s * FS)) / FS
    return 0.3 * np.sin(2 * np.pi * freq * t)


def test_energy_segmentation_two_spans():
    x = np.concatenate([_tone(0.8), np.zeros(int(0.5 * FS)), _tone(0.8)])
    spans = segment_by_energy(AudioBuffer(x, FS, "2t"))
    assert len(spans) == 2
    assert spans[0][0] < spans[0][1] <= spans[1][0] < spans[1][1]


def test_energy_segmentation_short_gap_merged():
    x = np.concatenate([_tone(0.8), np.zeros(int(0.1 * FS)), _tone(0.8)])
    spans = segment_by_energy(AudioBuffer(x, FS, "1t"), min_pause_ms=300)
    assert len(spans) == 1


def test_energy_segmentation_k_pauses():
    # K pauses above the threshold -> K + 1 spans, by construction
    k = 4
    parts = [_tone(0.7)]
    for _ in range(k):
        parts.append(np.zeros(int(0.45 * FS)))
        parts.append(_tone(0.7))
    spans = segment_by_energy(AudioBuffer(np.concatenate(parts), FS, "k"))
    assert len(spans) == k + 1


def test_energy_segmentation_deterministic():
    x = np.concatenate([_tone(0.8), np.zeros(int(0.5 * FS)), _tone(0.6)])
    buf = AudioBuffer(x, FS, "d")
    assert segment_by_energy(buf) == segment_by_energy(buf)


def test_energy_segmentation_silent():
    with pytest.raises(SilentInputError):
        segment_by_energy(AudioBuffer(np.zeros(FS), FS, "z"))
