"""Corpus construction: filter, window, augment, tokenize, split.

MIDI files are kept when they classify into at least melody+bass. Every
accepted song is sliced into 8-bar windows (hop of one bar), minority
metres and minor-key windows are pitch-shifted to the other 11 keys,
and each window is tokenized twice (with and without control tokens)
into masked-example shards with a song-level 8:1:1 split, so windows of
one source song never straddle splits.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .codec import encode_song
from .controls import Calibration, DEFAULT_CALIBRATION, compute_control_set
from .masking import FINETUNE_MODES, finetune_mask, pretrain_mask
from .midi_io import (
    PITCH_MAX,
    PITCH_MIN,
    QuantizedNote,
    QuantizedSong,
    QuantizedTrack,
    parse_midi,
    quantize,
)
from .tension import NoNotesError, detect_key

__all__ = [
    "WINDOW_BARS",
    "FilterResult",
    "filter_songs",
    "window_slices",
    "augment",
    "build_dataset",
    "load_shard",
]

WINDOW_BARS = 8
SPLIT_NAMES = ("train", "valid", "test")
VARIANTS = ("with_controls", "without_controls")


@dataclass
class FilterResult:
    accepted: list[tuple[str, QuantizedSong]] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)


def filter_songs(paths: list[str | Path]) -> FilterResult:
    """Quantize each file, keeping songs that classify into melody+bass."""
    result = FilterResult()
    for path in paths:
        path = Path(path)
        try:
            song = quantize(parse_midi(path.read_bytes()))
        except Exception as error:  # noqa: BLE001 - reason is reported per file
            result.rejected.append((str(path), str(error)))
            continue
        result.accepted.append((str(path), song))
    return result


def window_slices(song: QuantizedSong) -> list[QuantizedSong]:
    """All full 8-bar windows at a hop of one bar; shorter songs give
    none. Notes crossing the window end are clipped to it."""
    if song.bars < WINDOW_BARS:
        return []
    steps = song.steps_per_bar
    window_steps = WINDOW_BARS * steps
    windows = []
    for start_bar in range(song.bars - WINDOW_BARS + 1):
        offset = start_bar * steps
        tracks = []
        for track in song.tracks:
            notes = []
            for note in track.notes:
                if not offset <= note.onset < offset + window_steps:
                    continue
                duration = min(note.duration, offset + window_steps - note.onset)
                notes.append(QuantizedNote(note.pitch, note.onset - offset, duration))
            tracks.append(QuantizedTrack(track.role, track.instrument, tuple(notes)))
        windows.append(
            QuantizedSong(
                time_signature=song.time_signature,
                tempo_bpm=song.tempo_bpm,
                bars=WINDOW_BARS,
                tracks=tuple(tracks),
            )
        )
    return windows


def _transpose(song: QuantizedSong, shift: int) -> QuantizedSong:
    """Rigid pitch translation; shifts overflowing the pitch range fold
    down an octave, and any stragglers clamp to the range bounds."""
    pitches = [n.pitch for t in song.tracks for n in t.notes]
    if max(pitches) + shift > PITCH_MAX:
        shift -= 12
    tracks = []
    for track in song.tracks:
        notes = tuple(
            QuantizedNote(min(max(n.pitch + shift, PITCH_MIN), PITCH_MAX), n.onset, n.duration)
            for n in track.notes
        )
        tracks.append(QuantizedTrack(track.role, track.instrument, notes))
    return QuantizedSong(
        time_signature=song.time_signature,
        tempo_bpm=song.tempo_bpm,
        bars=song.bars,
        tracks=tuple(tracks),
    )


def augment(windows: list[QuantizedSong]) -> list[QuantizedSong]:
    """Emit 11 extra transpositions (+1..+11 semitones) for windows in a
    minority metre (anything but 4/4) or a minor key."""
    out = []
    for window in windows:
        out.append(window)
        try:
            minor = detect_key(window).is_minor
        except NoNotesError:
            continue
        if window.time_signature != (4, 4) or minor:
            out.extend(_transpose(window, shift) for shift in range(1, 12))
    return out


def _song_windows(song: QuantizedSong) -> list[QuantizedSong]:
    windows = []
    for window in augment(window_slices(song)):
        try:
            detect_key(window)
        except NoNotesError:
            continue  # silent window: nothing to key or mask
        windows.append(window)
    return windows


def _split_songs(count: int, rng: random.Random) -> list[str]:
    order = list(range(count))
    rng.shuffle(order)
    train_count = int(count * 0.8)
    valid_count = int(count * 0.1)
    names = ["test"] * count
    for i in order[:train_count]:
        names[i] = "train"
    for i in order[train_count : train_count + valid_count]:
        names[i] = "valid"
    return names


def build_dataset(
    songs: list[tuple[str, QuantizedSong]],
    out_dir: str | Path,
    seed: int,
    calibration: Calibration = DEFAULT_CALIBRATION,
) -> dict:
    """Write masked-example shards and a manifest; fully seed-driven.

    Per window and per variant two JSON lines are emitted: one pretrain
    span-masked example and one finetune example with the mode cycling
    through the three finetune modes. Token sequences are also dumped as
    text for callers that mask on the fly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    split_of_song = _split_songs(len(songs), rng)

    shard_lines: dict[tuple[str, str], list[str]] = {
        (split, variant): [] for split in SPLIT_NAMES for variant in VARIANTS
    }
    sequence_lines: dict[tuple[str, str], list[str]] = {
        (split, variant): [] for split in SPLIT_NAMES for variant in VARIANTS
    }
    counts = {split: {"songs": 0, "windows": 0, "examples": 0} for split in SPLIT_NAMES}

    example_index = 0
    for song_index, (path, song) in enumerate(songs):
        split = split_of_song[song_index]
        counts[split]["songs"] += 1
        for window in _song_windows(song):
            counts[split]["windows"] += 1
            controls = compute_control_set(window, calibration)
            for variant in VARIANTS:
                seq = encode_song(
                    window,
                    controls if variant == "with_controls" else None,
                    calibration,
                )
                sequence_lines[(split, variant)].append(seq.to_text())
                mode = FINETUNE_MODES[example_index % len(FINETUNE_MODES)]
                mask_seed = rng.randrange(2**31)
                shard = shard_lines[(split, variant)]
                shard.append(pretrain_mask(seq, mask_seed).to_json_line())
                shard.append(finetune_mask(seq, mode, mask_seed).to_json_line())
                counts[split]["examples"] += 2
            example_index += 1

    files = {}
    for (split, variant), lines in shard_lines.items():
        name = f"{split}_{variant}.jsonl"
        (out_dir / name).write_text("\n".join(lines) + ("\n" if lines else ""))
        files[name] = len(lines)
    for (split, variant), lines in sequence_lines.items():
        name = f"{split}_{variant}_sequences.txt"
        (out_dir / name).write_text("\n".join(lines) + ("\n" if lines else ""))
        files[name] = len(lines)

    manifest = {
        "seed": seed,
        "window_bars": WINDOW_BARS,
        "counts": counts,
        "split": {path: split_of_song[i] for i, (path, _) in enumerate(songs)},
        "calibration_sha256": hashlib.sha256(calibration.to_json().encode()).hexdigest(),
        "files": files,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_shard(path: str | Path):
    from .masking import MaskedExample

    lines = Path(path).read_text().splitlines()
    return [MaskedExample.from_json_line(line) for line in lines if line.strip()]
