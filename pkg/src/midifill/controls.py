"""Track and bar control features with their token-bin calibration.

Three per-track rates (density, occupation, polyphony), two per-bar
tension measures (binned from :mod:`midifill.tension`), plus song-level
key and tempo bins. Bin boundaries live in a :class:`Calibration` object
that can be loaded from JSON, so quantile-based tables can replace the
uniform defaults without code changes.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .midi_io import QuantizedSong, QuantizedTrack
from .tension import KeyEstimate, bar_tensions, detect_key

__all__ = [
    "EmptyTrackError",
    "TrackStats",
    "TrackControls",
    "BarControls",
    "ControlSet",
    "Calibration",
    "DEFAULT_CALIBRATION",
    "track_stats",
    "track_density",
    "track_occupation",
    "track_polyphony",
    "bin_rate",
    "bin_tension",
    "bin_tempo",
    "compute_control_set",
]

RATE_BIN_COUNT = 10
TENSION_BIN_COUNT = 12
TEMPO_BIN_COUNT = 7


class EmptyTrackError(ValueError):
    """Rate features need at least one grid step."""


@dataclass(frozen=True)
class TrackStats:
    """Raw counts behind the three track rates."""

    number_note: int
    timesteps_total: int
    timesteps_any_note: int
    timesteps_poly_note: int

    def __post_init__(self) -> None:
        if not 0 <= self.timesteps_poly_note <= self.timesteps_any_note <= self.timesteps_total:
            raise ValueError("inconsistent track step counts")


@dataclass(frozen=True)
class TrackControls:
    density_bin: int
    occupation_bin: int
    polyphony_bin: int


@dataclass(frozen=True)
class BarControls:
    strain_bin: int
    diameter_bin: int


@dataclass(frozen=True)
class ControlSet:
    """Binned controls for one song: key/tempo, per-track, per-bar."""

    key_bin: int
    tempo_bin: int
    tracks: tuple[TrackControls, ...]
    bars: tuple[BarControls, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.key_bin <= 23:
            raise ValueError(f"key_bin {self.key_bin} outside [0,23]")
        if not 0 <= self.tempo_bin < TEMPO_BIN_COUNT:
            raise ValueError(f"tempo_bin {self.tempo_bin} outside [0,6]")
        for tc in self.tracks:
            for value in (tc.density_bin, tc.occupation_bin, tc.polyphony_bin):
                if not 0 <= value < RATE_BIN_COUNT:
                    raise ValueError(f"track bin {value} outside [0,9]")
        for bc in self.bars:
            for value in (bc.strain_bin, bc.diameter_bin):
                if not 0 <= value < TENSION_BIN_COUNT:
                    raise ValueError(f"bar bin {value} outside [0,11]")

    def to_dict(self) -> dict:
        return {
            "key_bin": self.key_bin,
            "tempo_bin": self.tempo_bin,
            "tracks": [
                {
                    "density": tc.density_bin,
                    "occupation": tc.occupation_bin,
                    "polyphony": tc.polyphony_bin,
                }
                for tc in self.tracks
            ],
            "bars": [
                {"strain": bc.strain_bin, "diameter": bc.diameter_bin} for bc in self.bars
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSet":
        return cls(
            key_bin=data["key_bin"],
            tempo_bin=data["tempo_bin"],
            tracks=tuple(
                TrackControls(t["density"], t["occupation"], t["polyphony"])
                for t in data["tracks"]
            ),
            bars=tuple(BarControls(b["strain"], b["diameter"]) for b in data["bars"]),
        )


def _uniform(width: float, count: int) -> tuple[float, ...]:
    # rounding keeps boundaries at the float nearest the decimal value,
    # so e.g. a raw rate of exactly 0.3 lands in bin 3, not bin 2
    return tuple(round(width * i, 12) for i in range(1, count))


@dataclass(frozen=True)
class Calibration:
    """Upper-open bin boundary tables; value v lands in the number of
    boundaries <= v, clamped to the last bin."""

    rate_bins: tuple[float, ...] = field(default_factory=lambda: _uniform(0.1, RATE_BIN_COUNT))
    tension_bins: tuple[float, ...] = field(
        default_factory=lambda: _uniform(0.2, TENSION_BIN_COUNT)
    )
    tempo_bins: tuple[float, ...] = (60.0, 80.0, 100.0, 120.0, 140.0, 160.0)

    def bin_rate(self, value: float) -> int:
        return min(bisect_right(self.rate_bins, value), len(self.rate_bins))

    def bin_tension(self, value: float) -> int:
        return min(bisect_right(self.tension_bins, value), len(self.tension_bins))

    def bin_tempo(self, bpm: float) -> int:
        return min(bisect_right(self.tempo_bins, bpm), len(self.tempo_bins))

    def tempo_representative(self, tempo_bin: int) -> float:
        """A bpm that maps back into the given bin (for token decoding)."""
        edges = (0.0,) + self.tempo_bins
        if tempo_bin >= len(self.tempo_bins):
            return self.tempo_bins[-1] + 20.0
        upper = edges[tempo_bin + 1]
        return (edges[tempo_bin] + upper) / 2.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "rate_bins": list(self.rate_bins),
                "tension_bins": list(self.tension_bins),
                "tempo_bins": list(self.tempo_bins),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Calibration":
        data = json.loads(text)
        return cls(
            rate_bins=tuple(data["rate_bins"]),
            tension_bins=tuple(data["tension_bins"]),
            tempo_bins=tuple(data["tempo_bins"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Calibration":
        return cls.from_json(Path(path).read_text())


DEFAULT_CALIBRATION = Calibration()


def track_stats(track: QuantizedTrack, total_steps: int) -> TrackStats:
    """Count notes and sounding/polyphonic steps over the song window."""
    counts = [0] * total_steps
    for note in track.notes:
        for step in range(note.onset, min(note.end, total_steps)):
            counts[step] += 1
    return TrackStats(
        number_note=len(track.notes),
        timesteps_total=total_steps,
        timesteps_any_note=sum(1 for c in counts if c >= 1),
        timesteps_poly_note=sum(1 for c in counts if c >= 2),
    )


def track_density(stats: TrackStats) -> float:
    """Notes per grid step; exceeds 1 for dense polyphony."""
    if stats.timesteps_total == 0:
        raise EmptyTrackError("density over zero grid steps")
    return stats.number_note / stats.timesteps_total


def track_occupation(stats: TrackStats) -> float:
    """Fraction of grid steps covered by any sounding note."""
    if stats.timesteps_total == 0:
        raise EmptyTrackError("occupation over zero grid steps")
    return stats.timesteps_any_note / stats.timesteps_total


def track_polyphony(stats: TrackStats) -> float:
    """Fraction of sounding steps carrying two or more simultaneous
    notes; zero when nothing sounds."""
    if stats.timesteps_any_note == 0:
        return 0.0
    return stats.timesteps_poly_note / stats.timesteps_any_note


def bin_rate(value: float, calibration: Calibration = DEFAULT_CALIBRATION) -> int:
    """Rate bin in [0,9]; the default table is uniform width 0.1."""
    return calibration.bin_rate(value)


def bin_tension(value: float, calibration: Calibration = DEFAULT_CALIBRATION) -> int:
    """Tension bin in [0,11]; the default table is uniform width 0.2."""
    return calibration.bin_tension(value)


def bin_tempo(bpm: float, calibration: Calibration = DEFAULT_CALIBRATION) -> int:
    """Tempo bin in [0,6] over [0,60,80,100,120,140,160,inf)."""
    return calibration.bin_tempo(bpm)


def compute_control_set(
    song: QuantizedSong,
    calibration: Calibration = DEFAULT_CALIBRATION,
    key: KeyEstimate | None = None,
) -> ControlSet:
    """Bin every control for one song: a pure function of its notes."""
    if key is None:
        key = detect_key(song)
    total = song.total_steps
    tracks = []
    for track in song.tracks:
        stats = track_stats(track, total)
        tracks.append(
            TrackControls(
                density_bin=calibration.bin_rate(track_density(stats)),
                occupation_bin=calibration.bin_rate(track_occupation(stats)),
                polyphony_bin=calibration.bin_rate(track_polyphony(stats)),
            )
        )
    bars = [
        BarControls(
            strain_bin=calibration.bin_tension(bt.tensile_strain),
            diameter_bin=calibration.bin_tension(bt.cloud_diameter),
        )
        for bt in bar_tensions(song, key)
    ]
    return ControlSet(
        key_bin=key.key_index,
        tempo_bin=calibration.bin_tempo(song.tempo_bpm),
        tracks=tuple(tracks),
        bars=tuple(bars),
    )
