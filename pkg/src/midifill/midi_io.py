"""Standard MIDI File I/O and grid quantization.

Reads SMF type 0/1 byte streams into an unquantized :class:`RawSong`,
quantizes onto a 16th-note grid with melody/bass/accompaniment track
classification, and writes :class:`QuantizedSong` objects back to SMF.
Velocity and mid-file tempo/metre changes are deliberately ignored: songs
are short windows (at most 16 bars) and dynamics are out of scope.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

__all__ = [
    "MidiParseError",
    "UnsupportedMetreError",
    "UnfilterableSongError",
    "Role",
    "RawNote",
    "RawTrack",
    "RawSong",
    "QuantizedNote",
    "QuantizedTrack",
    "QuantizedSong",
    "STEPS_PER_BAR",
    "PITCH_MIN",
    "PITCH_MAX",
    "DURATION_MAX",
    "MAX_BARS",
    "parse_midi",
    "quantize",
    "classify_tracks",
    "write_midi",
]

PITCH_MIN = 21
PITCH_MAX = 108
DURATION_MAX = 32
MAX_BARS = 16

# Grid resolution per supported metre, in 16th-note steps per bar.
STEPS_PER_BAR: dict[tuple[int, int], int] = {
    (4, 4): 16,
    (3, 4): 12,
    (2, 4): 8,
    (6, 8): 12,
}

WRITE_TICKS_PER_QUARTER = 480

# Tracks whose sounding steps are >=2-note at a rate above this are not
# melody candidates.
MELODY_POLYPHONY_LIMIT = 0.2

DRUM_CHANNEL = 9


class MidiParseError(ValueError):
    """Malformed SMF data; message names the offending byte offset."""


class UnsupportedMetreError(ValueError):
    """Time signature outside the supported set (4/4, 3/4, 2/4, 6/8)."""


class UnfilterableSongError(ValueError):
    """Song lacks the tracks needed for melody/bass classification."""


class Role(IntEnum):
    MELODY = 0
    BASS = 1
    ACCOMPANIMENT = 2


@dataclass(frozen=True)
class RawNote:
    pitch: int
    start_tick: int
    duration_tick: int


@dataclass
class RawTrack:
    index: int
    channel: int
    program: int
    is_drum: bool
    notes: list[RawNote] = field(default_factory=list)


@dataclass
class RawSong:
    ticks_per_quarter: int
    tempo_bpm: float
    time_signature: tuple[int, int]
    tracks: list[RawTrack]
    warnings: list[str] = field(default_factory=list)

    def note_count(self) -> int:
        return sum(len(t.notes) for t in self.tracks)


@dataclass(frozen=True)
class QuantizedNote:
    """A note on the song grid: onset/duration in 16th-note steps."""

    pitch: int
    onset: int
    duration: int

    def __post_init__(self) -> None:
        if not (PITCH_MIN <= self.pitch <= PITCH_MAX):
            raise ValueError(f"pitch {self.pitch} outside [{PITCH_MIN},{PITCH_MAX}]")
        if not (1 <= self.duration <= DURATION_MAX):
            raise ValueError(f"duration {self.duration} outside [1,{DURATION_MAX}]")
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")

    @property
    def end(self) -> int:
        return self.onset + self.duration


def note_sort_key(note: QuantizedNote) -> tuple[int, int, int]:
    return (note.onset, note.duration, note.pitch)


@dataclass(frozen=True)
class QuantizedTrack:
    role: Role
    instrument: int
    notes: tuple[QuantizedNote, ...]

    def __post_init__(self) -> None:
        if not (0 <= self.instrument <= 127):
            raise ValueError(f"instrument {self.instrument} outside [0,127]")
        ordered = tuple(sorted(self.notes, key=note_sort_key))
        object.__setattr__(self, "notes", ordered)


@dataclass(frozen=True)
class QuantizedSong:
    """Grid-quantized song: metre, tempo, and 2-3 role-classified tracks."""

    time_signature: tuple[int, int]
    tempo_bpm: float
    bars: int
    tracks: tuple[QuantizedTrack, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.time_signature not in STEPS_PER_BAR:
            raise UnsupportedMetreError(f"unsupported time signature {self.time_signature}")
        if not (1 <= self.bars <= MAX_BARS):
            raise ValueError(f"bars {self.bars} outside [1,{MAX_BARS}]")
        if self.tempo_bpm <= 0:
            raise ValueError("tempo must be positive")
        roles = [t.role for t in self.tracks]
        if len(set(roles)) != len(roles):
            raise ValueError("duplicate track roles")
        if Role.MELODY not in roles or Role.BASS not in roles:
            raise ValueError("melody and bass tracks are mandatory")
        grid_end = self.bars * self.steps_per_bar
        for track in self.tracks:
            for note in track.notes:
                if note.end > grid_end:
                    raise ValueError(f"note {note} exceeds song grid of {grid_end} steps")

    @property
    def steps_per_bar(self) -> int:
        return STEPS_PER_BAR[self.time_signature]

    @property
    def total_steps(self) -> int:
        return self.bars * self.steps_per_bar

    def track_by_role(self, role: Role) -> QuantizedTrack | None:
        for track in self.tracks:
            if track.role == role:
                return track
        return None


# ---------------------------------------------------------------------------
# SMF reading


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def error(self, message: str) -> MidiParseError:
        return MidiParseError(f"{message} at byte offset {self.pos}")

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise self.error(f"unexpected end of data (wanted {n} bytes)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.read(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.read(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.read(4))[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise self.error("variable-length quantity longer than 4 bytes")


def parse_midi(data: bytes) -> RawSong:
    """Parse an SMF type 0/1 byte stream into a RawSong.

    Note-on/note-off pairs are resolved to (pitch, start, duration) in
    ticks. The first tempo and time-signature events win; later changes
    are ignored. An unmatched note-on is closed at its track's end and
    recorded in ``warnings``. Notes are grouped into one raw track per
    (chunk, channel), so type 0 files split by channel.
    """
    r = _Reader(data)
    if r.read(4) != b"MThd":
        r.pos -= 4
        raise r.error("missing MThd header")
    header_len = r.u32()
    if header_len < 6:
        raise r.error(f"bad MThd length {header_len}")
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.read(header_len - 6)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt} at byte offset 8")
    if division & 0x8000:
        raise MidiParseError("SMPTE division is not supported at byte offset 12")
    if division == 0:
        raise MidiParseError("zero ticks-per-quarter division at byte offset 12")

    warnings: list[str] = []
    tracks: dict[tuple[int, int], RawTrack] = {}
    channel_programs: dict[tuple[int, int], int] = {}
    # (tick, chunk index, value) so "first event" ties break deterministically
    tempo_events: list[tuple[int, int, float]] = []
    timesig_events: list[tuple[int, int, tuple[int, int]]] = []

    for chunk_index in range(ntrks):
        while True:
            if r.pos >= len(r.data):
                raise r.error(f"missing track chunk {chunk_index}")
            chunk_id = r.read(4)
            chunk_len = r.u32()
            if chunk_id == b"MTrk":
                break
            r.read(chunk_len)  # skip alien chunks
        end = r.pos + chunk_len
        tick = 0
        status = 0
        # (channel, pitch) -> start tick of the open note
        open_notes: dict[tuple[int, int], int] = {}

        def close_note(channel: int, pitch: int, end_tick: int) -> None:
            start = open_notes.pop((channel, pitch))
            key = (chunk_index, channel)
            if key not in tracks:
                tracks[key] = RawTrack(
                    index=len(tracks),
                    channel=channel,
                    program=channel_programs.get(key, 0),
                    is_drum=channel == DRUM_CHANNEL,
                )
            tracks[key].notes.append(RawNote(pitch, start, max(0, end_tick - start)))

        while r.pos < end:
            tick += r.varlen()
            byte = r.u8()
            if byte & 0x80:
                status = byte
            else:
                if status == 0:
                    raise r.error("running status with no prior status byte")
                r.pos -= 1
            kind = status & 0xF0
            channel = status & 0x0F
            if status == 0xFF:
                meta = r.u8()
                length = r.varlen()
                payload = r.read(length)
                status = 0  # meta events cancel running status
                if meta == 0x51 and length == 3:
                    mpqn = int.from_bytes(payload, "big")
                    if mpqn > 0:
                        tempo_events.append((tick, chunk_index, 60_000_000 / mpqn))
                elif meta == 0x58 and length >= 2:
                    timesig_events.append((tick, chunk_index, (payload[0], 1 << payload[1])))
                elif meta == 0x2F:
                    r.pos = end
            elif status in (0xF0, 0xF7):
                length = r.varlen()
                r.read(length)
                status = 0
            elif kind == 0x90:
                pitch = r.u8()
                velocity = r.u8()
                if velocity > 0:
                    if (channel, pitch) in open_notes:
                        # restruck before release: close the first at this onset
                        close_note(channel, pitch, tick)
                    open_notes[(channel, pitch)] = tick
                elif (channel, pitch) in open_notes:
                    close_note(channel, pitch, tick)
            elif kind == 0x80:
                pitch = r.u8()
                r.u8()
                if (channel, pitch) in open_notes:
                    close_note(channel, pitch, tick)
            elif kind == 0xC0:
                program = r.u8()
                channel_programs.setdefault((chunk_index, channel), program)
            elif kind == 0xD0:
                r.u8()
            elif kind in (0xA0, 0xB0, 0xE0):
                r.read(2)
            else:
                raise r.error(f"unexpected status byte 0x{status:02x}")
        if open_notes:
            warnings.append(
                f"chunk {chunk_index}: {len(open_notes)} unmatched note-on event(s) closed at track end"
            )
            for channel, pitch in sorted(open_notes):
                close_note(channel, pitch, tick)

    tempo_bpm = min(tempo_events)[2] if tempo_events else 120.0
    time_signature = min(timesig_events)[2] if timesig_events else (4, 4)

    for key, track in tracks.items():
        track.program = channel_programs.get(key, 0)
        track.notes.sort(key=lambda n: (n.start_tick, n.pitch))
    raw_tracks = sorted(tracks.values(), key=lambda t: t.index)
    for i, track in enumerate(raw_tracks):
        track.index = i
    return RawSong(
        ticks_per_quarter=division,
        tempo_bpm=tempo_bpm,
        time_signature=time_signature,
        tracks=raw_tracks,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Quantization and classification


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def _quantize_track_notes(
    track: RawTrack, ticks_per_quarter: int
) -> list[tuple[int, int, int]]:
    """Grid-round one raw track to (pitch, onset step, duration steps)."""
    ticks_per_step = ticks_per_quarter / 4.0
    out = []
    for note in track.notes:
        onset = _round_half_up(note.start_tick / ticks_per_step)
        duration = _round_half_up(note.duration_tick / ticks_per_step)
        duration = min(max(duration, 1), DURATION_MAX)
        out.append((note.pitch, onset, duration))
    return out


def _track_grid_stats(notes: list[tuple[int, int, int]]) -> tuple[float, float, int]:
    """(mean pitch, polyphony rate, note count) over grid-rounded notes."""
    if not notes:
        return (0.0, 0.0, 0)
    counts: dict[int, int] = {}
    for _, onset, duration in notes:
        for step in range(onset, onset + duration):
            counts[step] = counts.get(step, 0) + 1
    sounding = len(counts)
    poly = sum(1 for c in counts.values() if c >= 2)
    mean_pitch = sum(p for p, _, _ in notes) / len(notes)
    return (mean_pitch, poly / sounding if sounding else 0.0, len(notes))


def classify_tracks(raw: RawSong) -> dict[Role, int]:
    """Assign melody/bass/accompaniment roles to raw track indices.

    Bass is the non-drum track with the lowest mean pitch. Melody is the
    highest-mean-pitch track among the mostly-monophonic remainder
    (polyphony rate < 0.2), falling back to the highest mean pitch when
    every candidate is polyphonic. Of the rest, the densest track becomes
    the accompaniment. Ties break toward the lower track index.
    """
    eligible: list[tuple[int, float, float, int]] = []
    for track in raw.tracks:
        if track.is_drum or not track.notes:
            continue
        mean_pitch, poly_rate, count = _track_grid_stats(
            _quantize_track_notes(track, raw.ticks_per_quarter)
        )
        eligible.append((track.index, mean_pitch, poly_rate, count))
    if len(eligible) < 2:
        raise UnfilterableSongError(
            f"need at least 2 non-drum tracks with notes, found {len(eligible)}"
        )

    bass = min(eligible, key=lambda t: (t[1], t[0]))
    rest = [t for t in eligible if t[0] != bass[0]]
    mono = [t for t in rest if t[2] < MELODY_POLYPHONY_LIMIT]
    pool = mono if mono else rest
    melody = max(pool, key=lambda t: (t[1], -t[0]))
    rest = [t for t in rest if t[0] != melody[0]]

    roles = {Role.MELODY: melody[0], Role.BASS: bass[0]}
    if rest:
        accompaniment = max(rest, key=lambda t: (t[3], -t[0]))
        roles[Role.ACCOMPANIMENT] = accompaniment[0]
    return roles


def quantize(raw: RawSong) -> QuantizedSong:
    """Snap a RawSong to the 16th-note grid as a role-classified song.

    Onsets and durations round to the nearest step; durations clamp to
    [1, 32]; the song truncates to 16 bars; out-of-range pitches clamp to
    [21, 108] with a warning. Exact duplicate notes collapse to one.
    """
    if raw.time_signature not in STEPS_PER_BAR:
        raise UnsupportedMetreError(f"unsupported time signature {raw.time_signature}")
    if raw.note_count() == 0:
        raise ValueError("cannot quantize a song with no notes")
    roles = classify_tracks(raw)
    steps_per_bar = STEPS_PER_BAR[raw.time_signature]
    step_limit = MAX_BARS * steps_per_bar

    warnings = list(raw.warnings)
    by_role: dict[Role, list[tuple[int, int, int]]] = {}
    clamped = 0
    max_end = 0
    for role, raw_index in roles.items():
        track = raw.tracks[raw_index]
        notes = []
        for pitch, onset, duration in _quantize_track_notes(track, raw.ticks_per_quarter):
            if onset >= step_limit:
                continue
            if pitch < PITCH_MIN or pitch > PITCH_MAX:
                pitch = min(max(pitch, PITCH_MIN), PITCH_MAX)
                clamped += 1
            notes.append((pitch, onset, duration))
            max_end = max(max_end, onset + duration)
        by_role[role] = notes
    if clamped:
        warnings.append(f"{clamped} pitch(es) clamped into [{PITCH_MIN},{PITCH_MAX}]")
    if max_end == 0:
        raise ValueError("no notes remain inside the 16-bar window")

    bars = min(MAX_BARS, max(1, -(-max_end // steps_per_bar)))
    grid_end = bars * steps_per_bar
    tracks = []
    for role in sorted(by_role):
        seen = set()
        quantized = []
        for pitch, onset, duration in by_role[role]:
            duration = min(duration, grid_end - onset)
            if duration < 1:
                continue
            key = (pitch, onset, duration)
            if key in seen:
                continue
            seen.add(key)
            quantized.append(QuantizedNote(pitch, onset, duration))
        tracks.append(
            QuantizedTrack(
                role=role,
                instrument=raw.tracks[roles[role]].program,
                notes=tuple(quantized),
            )
        )
    return QuantizedSong(
        time_signature=raw.time_signature,
        tempo_bpm=raw.tempo_bpm,
        bars=bars,
        tracks=tuple(tracks),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# SMF writing


def _varlen(value: int) -> bytes:
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


def _track_chunk(events: list[tuple[int, bytes]]) -> bytes:
    """Assemble absolute-tick (tick, payload) events into an MTrk chunk."""
    events.sort(key=lambda e: e[0])
    body = bytearray()
    prev = 0
    for tick, payload in events:
        body += _varlen(tick - prev)
        body += payload
        prev = tick
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(song: QuantizedSong) -> bytes:
    """Serialize a QuantizedSong as an SMF type 1 byte stream.

    Uses 480 ticks per quarter, a single tempo event and a single
    time-signature event in a conductor track, and one note-bearing track
    per song track (channel = role index, never the drum channel).
    """
    tpq = WRITE_TICKS_PER_QUARTER
    ticks_per_step = tpq // 4

    numerator, denominator = song.time_signature
    conductor: list[tuple[int, bytes]] = []
    mpqn = round(60_000_000 / song.tempo_bpm)
    conductor.append((0, b"\xff\x51\x03" + mpqn.to_bytes(3, "big")))
    dd = denominator.bit_length() - 1
    conductor.append((0, bytes([0xFF, 0x58, 0x04, numerator, dd, 24, 8])))

    chunks = [_track_chunk(conductor)]
    for track in song.tracks:
        channel = int(track.role)
        events: list[tuple[int, bytes]] = [(0, bytes([0xC0 | channel, track.instrument]))]
        for note in track.notes:
            on = note.onset * ticks_per_step
            off = note.end * ticks_per_step
            events.append((on, bytes([0x90 | channel, note.pitch, 80])))
            events.append((off, bytes([0x80 | channel, note.pitch, 0])))
        chunks.append(_track_chunk(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), tpq)
    return header + b"".join(chunks)
