"""Built-in sample songs and a random-song generator.

The two-bar demo song is the package's canonical worked example (used by
the docs, the bundled service testset, and the test suite). The random
generator produces role-canonical songs: a monophonic high melody, a
monophonic low bass, and an optional polyphonic mid-register
accompaniment, so classification and codec round-trips hold by
construction.
"""

from __future__ import annotations

import random

from .midi_io import (
    DURATION_MAX,
    QuantizedNote,
    QuantizedSong,
    QuantizedTrack,
    Role,
    STEPS_PER_BAR,
)

__all__ = ["two_bar_demo_song", "random_song"]


def two_bar_demo_song() -> QuantizedSong:
    """A 4/4 two-bar piano/bass/strings miniature at 110 bpm."""
    melody = [(79, 0, 4), (76, 4, 4), (74, 8, 6), (69, 16, 4), (71, 20, 4), (72, 24, 6)]
    bass = [(45, 0, 8), (41, 8, 8), (43, 16, 8), (48, 24, 8)]
    accomp = [
        (64, 0, 8),
        (67, 0, 8),
        (60, 0, 16),
        (65, 8, 8),
        (59, 16, 8),
        (65, 16, 8),
        (67, 16, 8),
        (60, 24, 8),
        (64, 24, 8),
    ]

    def notes(rows):
        return tuple(QuantizedNote(p, o, d) for p, o, d in rows)

    return QuantizedSong(
        time_signature=(4, 4),
        tempo_bpm=110.0,
        bars=2,
        tracks=(
            QuantizedTrack(Role.MELODY, 0, notes(melody)),
            QuantizedTrack(Role.BASS, 32, notes(bass)),
            QuantizedTrack(Role.ACCOMPANIMENT, 48, notes(accomp)),
        ),
    )


def _mono_notes(
    rng: random.Random,
    bars: int,
    steps: int,
    low: int,
    high: int,
    notes_per_bar: tuple[int, int],
) -> list[QuantizedNote]:
    # strictly monophonic: every note ends at or before the next onset
    grid_end = bars * steps
    onsets = []
    for bar in range(bars):
        count = rng.randint(*notes_per_bar)
        onsets.extend(bar * steps + p for p in sorted(rng.sample(range(steps), min(count, steps))))
    notes = []
    for i, onset in enumerate(onsets):
        limit = onsets[i + 1] if i + 1 < len(onsets) else grid_end
        max_duration = min(DURATION_MAX, limit - onset)
        if max_duration < 1:
            continue
        notes.append(QuantizedNote(rng.randint(low, high), onset, rng.randint(1, max_duration)))
    return notes


def _chord_notes(
    rng: random.Random, bars: int, steps: int, low: int, high: int
) -> list[QuantizedNote]:
    # block chords that never overlap, so same-pitch notes never collide
    grid_end = bars * steps
    onsets = []
    for bar in range(bars):
        onsets.extend(bar * steps + p for p in sorted(rng.sample(range(steps), rng.randint(1, 2))))
    notes = []
    for i, onset in enumerate(onsets):
        limit = onsets[i + 1] if i + 1 < len(onsets) else grid_end
        max_duration = min(DURATION_MAX, limit - onset)
        if max_duration < 1:
            continue
        duration = rng.randint(min(2, max_duration), max_duration)
        for pitch in rng.sample(range(low, high + 1), rng.randint(2, 4)):
            notes.append(QuantizedNote(pitch, onset, duration))
    return notes


def random_song(
    rng: random.Random,
    bars: int | None = None,
    track_count: int | None = None,
    time_signature: tuple[int, int] | None = None,
) -> QuantizedSong:
    """A random role-canonical song; every track carries at least one note."""
    if time_signature is None:
        time_signature = rng.choice(list(STEPS_PER_BAR))
    steps = STEPS_PER_BAR[time_signature]
    if bars is None:
        bars = rng.randint(1, 4)
    if track_count is None:
        track_count = rng.choice((2, 3))

    while True:
        melody = _mono_notes(rng, bars, steps, 60, 84, (1, 4))
        bass = _mono_notes(rng, bars, steps, 28, 45, (1, 2))
        if melody and bass:
            break
    tracks = [
        QuantizedTrack(Role.MELODY, rng.randint(0, 30), tuple(melody)),
        QuantizedTrack(Role.BASS, rng.randint(32, 39), tuple(bass)),
    ]
    if track_count == 3:
        accomp = _chord_notes(rng, bars, steps, 48, 59)
        tracks.append(QuantizedTrack(Role.ACCOMPANIMENT, rng.randint(40, 60), tuple(accomp)))
    return QuantizedSong(
        time_signature=time_signature,
        tempo_bpm=float(rng.randint(50, 180)),
        bars=bars,
        tracks=tuple(tracks),
    )
