"""SMF parsing/writing, quantization, and track classification."""

import struct

import pytest

from midifill.controls import bin_tempo
from midifill.midi_io import (
    MidiParseError,
    QuantizedNote,
    QuantizedSong,
    QuantizedTrack,
    RawNote,
    RawSong,
    RawTrack,
    Role,
    UnfilterableSongError,
    UnsupportedMetreError,
    classify_tracks,
    parse_midi,
    quantize,
    write_midi,
)

from .conftest import make_songs, song_signature


# --- independent SMF assembly (kept separate from the library writer) ---


def varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def smf(tracks: list[bytes], fmt: int = 1, division: int = 480) -> bytes:
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    chunks = b"".join(b"MTrk" + struct.pack(">I", len(t)) + t for t in tracks)
    return header + chunks


def ev(delta: int, *payload: int) -> bytes:
    return varlen(delta) + bytes(payload)


END = ev(0, 0xFF, 0x2F, 0x00)


def simple_track(events: list[bytes]) -> bytes:
    return b"".join(events) + END


class TestParse:
    def test_single_note(self):
        track = simple_track([ev(0, 0x90, 60, 80), ev(480, 0x80, 60, 0)])
        raw = parse_midi(smf([track], fmt=0))
        assert raw.ticks_per_quarter == 480
        assert len(raw.tracks) == 1
        assert raw.tracks[0].notes == [RawNote(60, 0, 480)]
        assert raw.warnings == []

    def test_overlapping_same_pitch_closes_first_at_second_onset(self):
        track = simple_track(
            [ev(0, 0x90, 60, 80), ev(120, 0x90, 60, 80), ev(240, 0x80, 60, 0)]
        )
        raw = parse_midi(smf([track]))
        assert raw.tracks[0].notes == [RawNote(60, 0, 120), RawNote(60, 120, 240)]

    def test_empty_track_chunk(self):
        raw = parse_midi(smf([END]))
        assert raw.note_count() == 0
        assert raw.tracks == []

    def test_malformed_header_names_offset(self):
        with pytest.raises(MidiParseError, match="byte offset 0"):
            parse_midi(b"JUNKJUNKJUNKJUNK")

    def test_truncated_data_names_offset(self):
        data = smf([simple_track([ev(0, 0x90, 60, 80)])])[:-3]
        with pytest.raises(MidiParseError, match="byte offset"):
            parse_midi(data)

    def test_unmatched_note_on_closes_at_track_end_with_warning(self):
        track = simple_track([ev(0, 0x90, 60, 80), ev(960, 0x90, 62, 80), ev(0, 0x80, 62, 0)])
        raw = parse_midi(smf([track]))
        assert any("unmatched" in w for w in raw.warnings)
        notes = {(n.pitch, n.start_tick, n.duration_tick) for n in raw.tracks[0].notes}
        assert (60, 0, 960) in notes

    def test_running_status_and_velocity_zero_off(self):
        track = simple_track([ev(0, 0x90, 60, 80), ev(240, 60, 0), ev(0, 64, 64), ev(240, 64, 0)])
        raw = parse_midi(smf([track]))
        assert raw.tracks[0].notes == [RawNote(60, 0, 240), RawNote(64, 240, 240)]

    def test_first_tempo_and_timesig_win(self):
        meta = simple_track(
            [
                ev(0, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20),  # 120 bpm
                ev(0, 0xFF, 0x58, 0x04, 3, 2, 24, 8),  # 3/4
                ev(480, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40),  # later: 60 bpm
            ]
        )
        notes = simple_track([ev(0, 0x90, 60, 80), ev(480, 0x80, 60, 0)])
        raw = parse_midi(smf([meta, notes]))
        assert raw.tempo_bpm == pytest.approx(120.0)
        assert raw.time_signature == (3, 4)

    def test_type0_splits_channels(self):
        track = simple_track(
            [
                ev(0, 0x90, 72, 80),
                ev(0, 0x91, 40, 80),
                ev(480, 0x80, 72, 0),
                ev(0, 0x81, 40, 0),
            ]
        )
        raw = parse_midi(smf([track], fmt=0))
        assert len(raw.tracks) == 2

    def test_smpte_division_rejected(self):
        with pytest.raises(MidiParseError, match="SMPTE"):
            parse_midi(smf([END], division=0xE250))


def raw_from(notes_by_track, tpq=480, tempo=120.0, timesig=(4, 4), programs=None):
    tracks = []
    for i, notes in enumerate(notes_by_track):
        program = programs[i] if programs else 0
        tracks.append(
            RawTrack(
                index=i,
                channel=i,
                program=program,
                is_drum=False,
                notes=[RawNote(*n) for n in notes],
            )
        )
    return RawSong(tpq, tempo, timesig, tracks)


class TestQuantize:
    def test_rounds_to_zero(self):
        raw = raw_from([[(72, 10, 480)], [(40, 0, 480)]])
        song = quantize(raw)
        melody = song.track_by_role(Role.MELODY)
        assert melody.notes[0].onset == 0

    def test_duration_clamped_to_32(self):
        raw = raw_from([[(72, 0, 33 * 120)], [(40, 0, 480)]], tpq=480)
        song = quantize(raw)
        assert song.track_by_role(Role.MELODY).notes[0].duration == 32

    def test_truncates_to_16_bars(self):
        # one note per bar for 17 bars of 4/4
        melody = [(72, b * 16 * 120, 480) for b in range(17)]
        raw = raw_from([melody, [(40, 0, 480)]])
        song = quantize(raw)
        assert song.bars == 16
        assert len(song.track_by_role(Role.MELODY).notes) == 16

    def test_unsupported_metre(self):
        raw = raw_from([[(72, 0, 480)], [(40, 0, 480)]], timesig=(7, 8))
        with pytest.raises(UnsupportedMetreError):
            quantize(raw)

    def test_out_of_range_pitches_clamped_and_flagged(self):
        raw = raw_from([[(110, 0, 480), (72, 480, 480)], [(10, 0, 480)]])
        song = quantize(raw)
        assert song.track_by_role(Role.MELODY).notes[0].pitch == 108
        assert song.track_by_role(Role.BASS).notes[0].pitch == 21
        assert any("clamped" in w for w in song.warnings)

    def test_zero_length_note_becomes_one_step(self):
        raw = raw_from([[(72, 0, 1)], [(40, 0, 480)]])
        assert quantize(raw).track_by_role(Role.MELODY).notes[0].duration == 1


class TestClassify:
    def test_three_track_example(self):
        mono_high = [(72, i * 480, 240) for i in range(4)]
        mono_low = [(40, i * 480, 240) for i in range(4)]
        poly_mid = [(60, i * 480, 480) for i in range(4)] + [
            (64, i * 480, 480) for i in range(4)
        ]
        raw = raw_from([mono_high, mono_low, poly_mid])
        roles = classify_tracks(raw)
        assert roles == {Role.MELODY: 0, Role.BASS: 1, Role.ACCOMPANIMENT: 2}

    def test_two_track_example(self):
        raw = raw_from([[(70, 0, 480)], [(45, 0, 480)]])
        roles = classify_tracks(raw)
        assert roles == {Role.MELODY: 0, Role.BASS: 1}

    def test_single_track_errors(self):
        raw = raw_from([[(70, 0, 480)]])
        with pytest.raises(UnfilterableSongError):
            classify_tracks(raw)

    def test_drums_excluded(self):
        raw = raw_from([[(70, 0, 480)], [(45, 0, 480)]])
        raw.tracks.append(
            RawTrack(index=2, channel=9, program=0, is_drum=True, notes=[RawNote(36, 0, 480)])
        )
        roles = classify_tracks(raw)
        assert set(roles.values()) == {0, 1}

    def test_extra_tracks_dropped_densest_wins_accompaniment(self):
        mono_high = [(80, i * 480, 240) for i in range(4)]
        mono_low = [(30, i * 480, 240) for i in range(4)]
        sparse_mid = [(60, 0, 480)]
        dense_mid = [(55 + j, i * 480, 480) for i in range(4) for j in (0, 5)]
        raw = raw_from([mono_high, mono_low, sparse_mid, dense_mid])
        roles = classify_tracks(raw)
        assert roles[Role.ACCOMPANIMENT] == 3


class TestWriteRoundTrip:
    def test_demo_round_trip(self, demo_song):
        recovered = quantize(parse_midi(write_midi(demo_song)))
        assert song_signature(recovered) == song_signature(demo_song)
        assert bin_tempo(recovered.tempo_bpm) == bin_tempo(demo_song.tempo_bpm)

    def test_three_tracks_programs_survive(self, demo_song):
        raw = parse_midi(write_midi(demo_song))
        note_tracks = [t for t in raw.tracks if t.notes]
        assert len(note_tracks) == 3
        assert sorted(t.program for t in note_tracks) == [0, 32, 48]

    def test_round_trip_property_random_songs(self):
        for song in make_songs(99, 60):
            recovered = quantize(parse_midi(write_midi(song)))
            assert song_signature(recovered) == song_signature(song)
            assert bin_tempo(recovered.tempo_bpm) == bin_tempo(song.tempo_bpm)

    def test_quantize_idempotent_at_song_level(self):
        for song in make_songs(7, 30):
            once = quantize(parse_midi(write_midi(song)))
            twice = quantize(parse_midi(write_midi(once)))
            assert song_signature(twice) == song_signature(once)


class TestTypes:
    def test_note_invariants(self):
        with pytest.raises(ValueError):
            QuantizedNote(20, 0, 4)
        with pytest.raises(ValueError):
            QuantizedNote(60, 0, 0)
        with pytest.raises(ValueError):
            QuantizedNote(60, -1, 4)

    def test_track_sorts_notes(self):
        track = QuantizedTrack(
            Role.MELODY,
            0,
            (QuantizedNote(70, 4, 2), QuantizedNote(60, 0, 8), QuantizedNote(67, 0, 4)),
        )
        assert [(n.onset, n.duration, n.pitch) for n in track.notes] == [
            (0, 4, 67),
            (0, 8, 60),
            (4, 2, 70),
        ]

    def test_song_requires_melody_and_bass(self):
        track = QuantizedTrack(Role.MELODY, 0, (QuantizedNote(60, 0, 4),))
        with pytest.raises(ValueError, match="mandatory"):
            QuantizedSong((4, 4), 120.0, 1, (track,))

    def test_song_rejects_notes_past_grid(self):
        tracks = (
            QuantizedTrack(Role.MELODY, 0, (QuantizedNote(60, 14, 8),)),
            QuantizedTrack(Role.BASS, 32, (QuantizedNote(40, 0, 4),)),
        )
        with pytest.raises(ValueError, match="grid"):
            QuantizedSong((4, 4), 120.0, 1, tracks)
