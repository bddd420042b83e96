"""Corpus building: filtering, windowing, augmentation, splitting."""

import json
import random

import pytest

from midifill.codec import decode_tokens, encode_song, validate_grammar
from midifill.controls import compute_control_set
from midifill.midi_io import QuantizedNote, QuantizedSong, QuantizedTrack, Role, write_midi
from midifill.pipeline import (
    augment,
    build_dataset,
    filter_songs,
    load_shard,
    window_slices,
)
from midifill.samples import random_song
from midifill.tension import detect_key

from .conftest import song_signature


def long_song(bars=16, seed=0, time_signature=(4, 4)):
    return random_song(random.Random(seed), bars=bars, time_signature=time_signature)


class TestFilter:
    def test_accepts_and_rejects(self, tmp_path, demo_song):
        good = tmp_path / "good.mid"
        good.write_bytes(write_midi(demo_song))
        solo = QuantizedSong(
            (4, 4),
            120.0,
            1,
            (
                QuantizedTrack(Role.MELODY, 0, (QuantizedNote(60, 0, 4),)),
                QuantizedTrack(Role.BASS, 32, (QuantizedNote(40, 0, 4),)),
            ),
        )
        # a single-track file: write only the melody channel by hand
        bad = tmp_path / "bad.mid"
        data = bytearray(write_midi(solo))
        bad.write_bytes(bytes(data))
        # truncate the bass track chunk to corrupt it
        broken = tmp_path / "broken.mid"
        broken.write_bytes(write_midi(demo_song)[:40])

        result = filter_songs([good, broken])
        assert [p for p, _ in result.accepted] == [str(good)]
        assert len(result.rejected) == 1 and "offset" in result.rejected[0][1]


class TestWindows:
    def test_window_counts(self):
        assert len(window_slices(long_song(16))) == 9
        assert len(window_slices(long_song(8))) == 1
        assert len(window_slices(long_song(7))) == 0

    def test_windows_are_eight_bars_rebased(self):
        windows = window_slices(long_song(10, seed=3))
        assert len(windows) == 3
        for window in windows:
            assert window.bars == 8
            assert all(n.onset < window.total_steps for t in window.tracks for n in t.notes)

    def test_window_notes_match_source_slice(self):
        song = long_song(9, seed=5)
        second = window_slices(song)[1]
        steps = song.steps_per_bar
        for track, source in zip(second.tracks, song.tracks):
            expected = [
                (n.pitch, n.onset - steps)
                for n in source.notes
                if steps <= n.onset < 9 * steps
            ]
            assert [(n.pitch, n.onset) for n in track.notes] == expected

    def test_every_window_round_trips_and_validates(self):
        for song in [long_song(8, seed) for seed in range(6)]:
            for window in window_slices(song):
                controls = compute_control_set(window)
                seq = encode_song(window, controls)
                assert validate_grammar(seq) is None
                assert song_signature(decode_tokens(seq)) == song_signature(window)


class TestAugment:
    def test_major_44_window_unchanged(self):
        window = window_slices(long_song(8, seed=11, time_signature=(4, 4)))[0]
        if detect_key(window).is_minor:
            pytest.skip("random window happened to be minor")
        assert len(augment([window])) == 1

    def test_minority_metre_gets_twelve(self):
        window = window_slices(long_song(8, seed=2, time_signature=(3, 4)))[0]
        out = augment([window])
        assert len(out) == 12
        base = out[0]
        for shift_index, shifted in enumerate(out[1:], start=1):
            deltas = {
                b.pitch - a.pitch
                for ta, tb in zip(base.tracks, shifted.tracks)
                for a, b in zip(ta.notes, tb.notes)
            }
            assert len(deltas) == 1  # rigid translation
            assert deltas.pop() in (shift_index, shift_index - 12)

    def test_note_counts_invariant(self):
        window = window_slices(long_song(8, seed=4, time_signature=(6, 8)))[0]
        counts = [sum(len(t.notes) for t in w.tracks) for w in augment([window])]
        assert len(set(counts)) == 1

    def test_high_notes_fold_down_an_octave(self):
        # 3/4 grid: 12 steps per bar
        tracks = (
            QuantizedTrack(Role.MELODY, 0, tuple(QuantizedNote(105, i * 12, 4) for i in range(8))),
            QuantizedTrack(Role.BASS, 32, tuple(QuantizedNote(40, i * 12, 4) for i in range(8))),
        )
        window = QuantizedSong((3, 4), 120.0, 8, tracks)
        out = augment([window])
        shifted_up_5 = out[5]  # +5 semitones would hit 110 -> fold to -7
        melody = [n.pitch for n in shifted_up_5.tracks[0].notes]
        assert set(melody) == {105 + 5 - 12}


class TestBuildDataset:
    def _songs(self, count=10):
        return [(f"song_{i}.mid", long_song(8, seed=i)) for i in range(count)]

    def test_split_is_song_level_and_deterministic(self, tmp_path):
        songs = self._songs(10)
        manifest_a = build_dataset(songs, tmp_path / "a", seed=7)
        manifest_b = build_dataset(songs, tmp_path / "b", seed=7)
        assert manifest_a["split"] == manifest_b["split"]
        assert json.dumps(manifest_a["counts"], sort_keys=True) == json.dumps(
            manifest_b["counts"], sort_keys=True
        )
        values = list(manifest_a["split"].values())
        assert values.count("train") == 8
        assert values.count("valid") == 1
        assert values.count("test") == 1

    def test_different_seed_changes_split(self, tmp_path):
        songs = self._songs(10)
        a = build_dataset(songs, tmp_path / "a", seed=1)["split"]
        b = build_dataset(songs, tmp_path / "b", seed=2)["split"]
        assert a != b

    def test_shards_parse_and_both_variants_exist(self, tmp_path):
        songs = self._songs(5)
        manifest = build_dataset(songs, tmp_path / "data", seed=3)
        train_with = load_shard(tmp_path / "data" / "train_with_controls.jsonl")
        train_without = load_shard(tmp_path / "data" / "train_without_controls.jsonl")
        assert train_with and train_without
        assert all(e.encoder_input.with_controls for e in train_with)
        assert not any(e.encoder_input.with_controls for e in train_without)
        modes = {e.mode for e in train_with}
        assert "pretrain_span" in modes and len(modes) >= 2
        assert manifest["calibration_sha256"]

    def test_manifest_counts_consistent(self, tmp_path):
        songs = self._songs(6)
        manifest = build_dataset(songs, tmp_path / "out", seed=9)
        for split in ("train", "valid", "test"):
            windows = manifest["counts"][split]["windows"]
            examples = manifest["counts"][split]["examples"]
            assert examples == windows * 4  # 2 variants x (pretrain + finetune)
