"""Token vocabulary, song<->token conversion, and grammar validation.

The representation is bar/position based: a header (time signature,
tempo, optional control block, instruments) followed by one block per
bar. Inside a bar every track appears in order as a ``track_k`` token
followed by note groups ``position pitch+ duration``; notes sharing an
onset and duration share a single duration token after their pitch run.

The vocabulary has exactly 360 entries and is immutable once built.
Sequences serialize as space-separated tokens, one sequence per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .controls import Calibration, ControlSet, DEFAULT_CALIBRATION
from .midi_io import (
    DURATION_MAX,
    MAX_BARS,
    PITCH_MAX,
    PITCH_MIN,
    QuantizedNote,
    QuantizedSong,
    QuantizedTrack,
    Role,
    STEPS_PER_BAR,
)

__all__ = [
    "EncodeError",
    "DecodeError",
    "Vocabulary",
    "TokenSequence",
    "build_vocab",
    "encode_song",
    "decode_tokens",
    "validate_grammar",
    "parse_structure",
    "ParsedStructure",
    "ParsedBar",
    "ParsedCell",
    "MASK",
    "PAD",
    "EOS",
    "BAR",
    "MAX_POSITIONS",
    "MAX_TRACKS",
    "TIMESIG_TOKENS",
    "timesig_token",
    "steps_per_bar_of",
]

MASK = "mask"
PAD = "pad"
EOS = "eos"
BAR = "bar"

MAX_POSITIONS = 16
MAX_TRACKS = 3

TIMESIG_TOKENS = {"4/4": (4, 4), "3/4": (3, 4), "2/4": (2, 4), "6/8": (6, 8)}


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


def timesig_token(time_signature: tuple[int, int]) -> str:
    return f"{time_signature[0]}/{time_signature[1]}"


def steps_per_bar_of(token: str) -> int:
    return STEPS_PER_BAR[TIMESIG_TOKENS[token]]


@dataclass(frozen=True)
class Vocabulary:
    """The fixed 360-token vocabulary with stable token<->id maps."""

    tokens: tuple[str, ...]
    categories: tuple[tuple[str, int], ...]
    _ids: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._ids.update({t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        return self._ids[token]

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def ids(self, tokens: list[str]) -> list[int]:
        return [self._ids[t] for t in tokens]

    def category_counts(self) -> dict[str, int]:
        return dict(self.categories)

    def to_json(self) -> str:
        return json.dumps({t: i for i, t in enumerate(self.tokens)}, indent=2)


def build_vocab() -> Vocabulary:
    """Build the 360-token vocabulary; ids are stable across runs."""
    groups: list[tuple[str, list[str]]] = [
        ("position", [f"e_{i}" for i in range(MAX_POSITIONS)]),
        ("pitch", [f"p_{i}" for i in range(PITCH_MIN, PITCH_MAX + 1)]),
        ("duration", [f"n_{i}" for i in range(1, DURATION_MAX + 1)]),
        ("structure", [BAR] + [f"track_{i}" for i in range(MAX_TRACKS)]),
        ("time_signature", list(TIMESIG_TOKENS)),
        ("tempo", [f"t_{i}" for i in range(7)]),
        ("instrument", [f"i_{i}" for i in range(128)]),
        ("key", [f"k_{i}" for i in range(24)]),
        ("tensile_strain", [f"s_{i}" for i in range(12)]),
        ("cloud_diameter", [f"a_{i}" for i in range(12)]),
        ("density", [f"d_{i}" for i in range(10)]),
        ("polyphony", [f"y_{i}" for i in range(10)]),
        ("occupation", [f"o_{i}" for i in range(10)]),
        ("model", [MASK, PAD, EOS]),
    ]
    tokens: list[str] = []
    categories = []
    for name, group in groups:
        tokens.extend(group)
        categories.append((name, len(group)))
    return Vocabulary(tokens=tuple(tokens), categories=tuple(categories))


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    with_controls: bool

    def __len__(self) -> int:
        return len(self.tokens)

    def to_text(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_text(cls, text: str, with_controls: bool | None = None) -> "TokenSequence":
        tokens = tuple(text.split())
        if with_controls is None:
            with_controls = len(tokens) > 2 and tokens[2].startswith("k_")
        return cls(tokens=tokens, with_controls=with_controls)


def _value(token: str) -> int:
    return int(token.split("_", 1)[1])


def _is(token: str, prefix: str) -> bool:
    return token.startswith(prefix) and token[len(prefix) :].isdigit()


# ---------------------------------------------------------------------------
# Encoding


def _group_notes(notes: tuple[QuantizedNote, ...], bar_start: int, bar_end: int):
    """Yield (position, duration, [pitches]) groups for one track-bar,
    positions nondecreasing, equal positions ordered by duration."""
    in_bar = [n for n in notes if bar_start <= n.onset < bar_end]
    group: list[int] = []
    group_key: tuple[int, int] | None = None
    for note in in_bar:  # already sorted by (onset, duration, pitch)
        key = (note.onset - bar_start, note.duration)
        if key != group_key:
            if group_key is not None:
                yield group_key[0], group_key[1], group
            group_key = key
            group = []
        group.append(note.pitch)
    if group_key is not None:
        yield group_key[0], group_key[1], group


def encode_song(
    song: QuantizedSong,
    controls: ControlSet | None = None,
    calibration: Calibration = DEFAULT_CALIBRATION,
) -> TokenSequence:
    """Encode a song (and optionally its controls) into tokens.

    Layout: time signature, tempo, [key, density*T, occupation*T,
    polyphony*T,] instrument*T, then per bar: ``bar`` [strain diameter]
    and every track's cell.
    """
    if controls is not None:
        if len(controls.tracks) != len(song.tracks):
            raise EncodeError(
                f"control set has {len(controls.tracks)} tracks, song has {len(song.tracks)}"
            )
        if len(controls.bars) != song.bars:
            raise EncodeError(
                f"control set has {len(controls.bars)} bars, song has {song.bars}"
            )

    tokens: list[str] = [timesig_token(song.time_signature)]
    tokens.append(f"t_{calibration.bin_tempo(song.tempo_bpm)}")
    if controls is not None:
        tokens.append(f"k_{controls.key_bin}")
        tokens.extend(f"d_{tc.density_bin}" for tc in controls.tracks)
        tokens.extend(f"o_{tc.occupation_bin}" for tc in controls.tracks)
        tokens.extend(f"y_{tc.polyphony_bin}" for tc in controls.tracks)
    tokens.extend(f"i_{t.instrument}" for t in song.tracks)

    steps = song.steps_per_bar
    for bar in range(song.bars):
        tokens.append(BAR)
        if controls is not None:
            tokens.append(f"s_{controls.bars[bar].strain_bin}")
            tokens.append(f"a_{controls.bars[bar].diameter_bin}")
        for index, track in enumerate(song.tracks):
            tokens.append(f"track_{index}")
            for position, duration, pitches in _group_notes(
                track.notes, bar * steps, (bar + 1) * steps
            ):
                tokens.append(f"e_{position}")
                tokens.extend(f"p_{p}" for p in pitches)
                tokens.append(f"n_{duration}")
    return TokenSequence(tokens=tuple(tokens), with_controls=controls is not None)


# ---------------------------------------------------------------------------
# Structure parsing (shared by validation, decoding, and masking)


class _Violation(Exception):
    def __init__(self, index: int, reason: str):
        super().__init__(f"token {index}: {reason}")
        self.index = index
        self.reason = reason


@dataclass
class ParsedCell:
    track_index: int
    start: int  # index of the track token (or the mask standing in for it)
    end: int  # inclusive index of the cell's last token
    is_mask: bool
    notes: list[QuantizedNote]


@dataclass
class ParsedBar:
    bar_index: int
    bar_token: int
    cells: list[ParsedCell]


@dataclass
class ParsedStructure:
    time_signature: tuple[int, int]
    steps_per_bar: int
    tempo_bin: int
    key_bin: int | None
    track_count: int
    instruments: list[int]
    header_end: int  # index of the first bar token
    bars: list[ParsedBar]


def _parse(tokens: tuple[str, ...], with_controls: bool, allow_masks: bool) -> ParsedStructure:
    n = len(tokens)
    pos = 0

    def need(reason: str) -> _Violation:
        return _Violation(min(pos, n - 1) if n else 0, reason)

    if n == 0:
        raise _Violation(0, "empty sequence")
    if tokens[0] not in TIMESIG_TOKENS:
        raise _Violation(0, f"expected a time-signature token, got {tokens[0]!r}")
    time_signature = TIMESIG_TOKENS[tokens[0]]
    steps = STEPS_PER_BAR[time_signature]
    pos = 1
    if pos >= n or not _is(tokens[pos], "t_") or not 0 <= _value(tokens[pos]) <= 6:
        raise need("expected a tempo token")
    tempo_bin = _value(tokens[pos])
    pos += 1

    key_bin = None
    if with_controls:
        if pos >= n or not _is(tokens[pos], "k_") or not 0 <= _value(tokens[pos]) <= 23:
            raise need("expected a key token")
        key_bin = _value(tokens[pos])
        pos += 1
        densities = []
        while pos < n and _is(tokens[pos], "d_") and _value(tokens[pos]) <= 9:
            densities.append(_value(tokens[pos]))
            pos += 1
        track_count = len(densities)
        if not 2 <= track_count <= MAX_TRACKS:
            raise need(f"expected 2-{MAX_TRACKS} density tokens, got {track_count}")
        for prefix, name in (("o_", "occupation"), ("y_", "polyphony")):
            for _ in range(track_count):
                if pos >= n or not _is(tokens[pos], prefix) or _value(tokens[pos]) > 9:
                    raise need(f"expected {track_count} {name} tokens")
                pos += 1
    else:
        track_count = 0

    instruments = []
    while pos < n and _is(tokens[pos], "i_") and _value(tokens[pos]) <= 127:
        instruments.append(_value(tokens[pos]))
        pos += 1
    if with_controls:
        if len(instruments) != track_count:
            raise need(f"expected {track_count} instrument tokens, got {len(instruments)}")
    else:
        track_count = len(instruments)
        if not 2 <= track_count <= MAX_TRACKS:
            raise need(f"expected 2-{MAX_TRACKS} instrument tokens, got {track_count}")

    header_end = pos
    bars: list[ParsedBar] = []
    while pos < n:
        if tokens[pos] != BAR:
            raise need(f"expected {BAR!r} token, got {tokens[pos]!r}")
        if len(bars) >= MAX_BARS:
            raise need(f"more than {MAX_BARS} bars")
        bar = ParsedBar(bar_index=len(bars), bar_token=pos, cells=[])
        pos += 1
        if with_controls:
            if pos >= n or not _is(tokens[pos], "s_") or _value(tokens[pos]) > 11:
                raise need("expected a tensile-strain token after the bar token")
            pos += 1
            if pos >= n or not _is(tokens[pos], "a_") or _value(tokens[pos]) > 11:
                raise need("expected a cloud-diameter token")
            pos += 1
        for track_index in range(track_count):
            if allow_masks and pos < n and tokens[pos] == MASK:
                bar.cells.append(ParsedCell(track_index, pos, pos, True, []))
                pos += 1
                continue
            if pos >= n or tokens[pos] != f"track_{track_index}":
                raise need(f"expected 'track_{track_index}'")
            cell = ParsedCell(track_index, pos, pos, False, [])
            pos += 1
            bar_offset = bar.bar_index * steps
            position: int | None = None
            while pos < n and _is(tokens[pos], "e_"):
                new_position = _value(tokens[pos])
                if new_position >= steps:
                    raise need(f"position {new_position} outside a {steps}-step bar")
                if position is not None and new_position < position:
                    raise need(f"position {new_position} decreases from {position}")
                position = new_position
                pos += 1
                pitches = []
                while pos < n and _is(tokens[pos], "p_"):
                    pitch = _value(tokens[pos])
                    if not PITCH_MIN <= pitch <= PITCH_MAX:
                        raise need(f"pitch {pitch} outside [{PITCH_MIN},{PITCH_MAX}]")
                    if pitches and pitch <= pitches[-1]:
                        raise need(f"pitch {pitch} not above {pitches[-1]} in its group")
                    pitches.append(pitch)
                    pos += 1
                if not pitches:
                    raise need("expected a pitch token after the position")
                if pos >= n or not _is(tokens[pos], "n_") or not 1 <= _value(tokens[pos]) <= DURATION_MAX:
                    raise need("expected a duration token after the pitch run")
                duration = _value(tokens[pos])
                pos += 1
                for pitch in pitches:
                    cell.notes.append(QuantizedNote(pitch, bar_offset + position, duration))
            cell.end = pos - 1
            bar.cells.append(cell)
        bars.append(bar)
    if not bars:
        raise _Violation(n - 1, "no bar tokens")
    return ParsedStructure(
        time_signature=time_signature,
        steps_per_bar=steps,
        tempo_bin=tempo_bin,
        key_bin=key_bin,
        track_count=track_count,
        instruments=instruments,
        header_end=header_end,
        bars=bars,
    )


def validate_grammar(seq: TokenSequence, allow_masks: bool = False) -> int | None:
    """Return None when the sequence is grammatical, else the index of
    the first offending token."""
    try:
        _parse(seq.tokens, seq.with_controls, allow_masks)
    except _Violation as v:
        return v.index
    return None


def parse_structure(seq: TokenSequence, allow_masks: bool = False) -> ParsedStructure:
    """Parse into header info and per-bar cells; raises DecodeError on
    the first grammar violation."""
    try:
        return _parse(seq.tokens, seq.with_controls, allow_masks)
    except _Violation as v:
        raise DecodeError(str(v)) from None


def decode_tokens(
    seq: TokenSequence, calibration: Calibration = DEFAULT_CALIBRATION
) -> QuantizedSong:
    """Rebuild the QuantizedSong a token sequence describes.

    Inverse of :func:`encode_song` on note content, metre, tempo bin,
    and instruments; control tokens are validated but not needed to
    rebuild notes. Durations overrunning the song grid are clipped, and
    duplicate notes collapse (sampled sequences may contain either).
    """
    parsed = parse_structure(seq)
    bars = len(parsed.bars)
    grid_end = bars * parsed.steps_per_bar
    tracks = []
    for track_index in range(parsed.track_count):
        seen: set[QuantizedNote] = set()
        notes = []
        for bar in parsed.bars:
            for note in bar.cells[track_index].notes:
                duration = min(note.duration, grid_end - note.onset)
                clipped = QuantizedNote(note.pitch, note.onset, duration)
                if clipped not in seen:
                    seen.add(clipped)
                    notes.append(clipped)
        tracks.append(
            QuantizedTrack(
                role=Role(track_index),
                instrument=parsed.instruments[track_index],
                notes=tuple(notes),
            )
        )
    return QuantizedSong(
        time_signature=parsed.time_signature,
        tempo_bpm=calibration.tempo_representative(parsed.tempo_bin),
        bars=bars,
        tracks=tuple(tracks),
    )
