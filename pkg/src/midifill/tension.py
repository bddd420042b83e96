"""Spiral-array pitch geometry, key detection, and bar tension measures.

Pitch classes are embedded on a helix along the line of fifths: index k
(C=0, G=1, F=-1, ...) maps to (r*sin(k*pi/2), r*cos(k*pi/2), k*h). Major
and minor key centers are weighted combinations of tonic, dominant, and
subdominant chord centers on the same helix. Two bar-level measures come
out of this geometry:

* tensile strain -- distance from the bar's note-cloud centroid to the
  key center;
* cloud diameter -- the largest pairwise distance among the bar's
  distinct pitch classes.

Keys are detected song-level by Krumhansl-Schmuckler profile correlation
over a duration-weighted pitch-class histogram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .midi_io import QuantizedNote, QuantizedSong

__all__ = [
    "SpiralPoint",
    "KeyEstimate",
    "BarTension",
    "NoNotesError",
    "SPIRAL_RADIUS",
    "SPIRAL_HEIGHT",
    "CHORD_WEIGHTS",
    "KEY_WEIGHTS",
    "pitch_to_spiral",
    "pitch_class_to_fifths",
    "key_name",
    "detect_key",
    "tensile_strain",
    "cloud_diameter",
    "bar_tensions",
]

# Standard spiral-array calibration: unit radius, aspect h = sqrt(2/15),
# chord/key mixing weights, and the major/minor blend for minor keys.
SPIRAL_RADIUS = 1.0
SPIRAL_HEIGHT = math.sqrt(2.0 / 15.0)
CHORD_WEIGHTS = (0.536, 0.274, 0.19)
KEY_WEIGHTS = (0.536, 0.274, 0.19)
MINOR_DOMINANT_MAJOR_FRACTION = 0.75
MINOR_SUBDOMINANT_MINOR_FRACTION = 0.75

# Default line-of-fifths window [-3, 8] covers all 12 pitch classes with
# spellings centered near C (Eb up to G#).
DEFAULT_FIFTHS_LOW = -3

# Krumhansl-Kessler probe-tone profiles, index 0 = tonic.
_KK_MAJOR = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
_KK_MINOR = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

# sin/cos of k*pi/2 are exact by table lookup; float math.sin would leave
# ~1e-16 residue on the axis crossings.
_QUARTER_SIN = (0.0, 1.0, 0.0, -1.0)
_QUARTER_COS = (1.0, 0.0, -1.0, 0.0)

_PITCH_CLASS_NAMES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")


class NoNotesError(ValueError):
    """Key detection needs at least one note."""


@dataclass(frozen=True)
class SpiralPoint:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("non-finite spiral coordinates")

    def distance(self, other: "SpiralPoint") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class KeyEstimate:
    """Detected key: 0..11 = C..B major, 12..23 = C..B minor."""

    key_index: int
    key_position: SpiralPoint

    def __post_init__(self) -> None:
        if not (0 <= self.key_index <= 23):
            raise ValueError(f"key_index {self.key_index} outside [0,23]")

    @property
    def is_minor(self) -> bool:
        return self.key_index >= 12

    @property
    def tonic_pitch_class(self) -> int:
        return self.key_index % 12


@dataclass(frozen=True)
class BarTension:
    tensile_strain: float
    cloud_diameter: float
    note_count: int


def pitch_to_spiral(k: int) -> SpiralPoint:
    """Spiral position of line-of-fifths index k (C=0, G=1, F=-1)."""
    return SpiralPoint(
        SPIRAL_RADIUS * _QUARTER_SIN[k % 4],
        SPIRAL_RADIUS * _QUARTER_COS[k % 4],
        k * SPIRAL_HEIGHT,
    )


def pitch_class_to_fifths(pitch_class: int, low: int = DEFAULT_FIFTHS_LOW) -> int:
    """Line-of-fifths index of a pitch class within the 12-wide window
    [low, low+11]; the window fixes the enharmonic spelling."""
    return ((pitch_class * 7 - low) % 12) + low


def _fifths_window_low(key: KeyEstimate) -> int:
    # Spell chromatics toward the detected key's side of the spiral: the
    # window that puts C major (and its relative minor) at the default.
    tonic = pitch_class_to_fifths(key.tonic_pitch_class)
    return tonic - 6 if key.is_minor else tonic + DEFAULT_FIFTHS_LOW


def _combine(weights: Sequence[float], points: Sequence[SpiralPoint]) -> SpiralPoint:
    return SpiralPoint(
        sum(w * p.x for w, p in zip(weights, points)),
        sum(w * p.y for w, p in zip(weights, points)),
        sum(w * p.z for w, p in zip(weights, points)),
    )


def _major_chord_center(k: int) -> SpiralPoint:
    return _combine(CHORD_WEIGHTS, (pitch_to_spiral(k), pitch_to_spiral(k + 1), pitch_to_spiral(k + 4)))


def _minor_chord_center(k: int) -> SpiralPoint:
    return _combine(CHORD_WEIGHTS, (pitch_to_spiral(k), pitch_to_spiral(k + 1), pitch_to_spiral(k - 3)))


def _major_key_center(k: int) -> SpiralPoint:
    return _combine(
        KEY_WEIGHTS,
        (_major_chord_center(k), _major_chord_center(k + 1), _major_chord_center(k - 1)),
    )


def _minor_key_center(k: int) -> SpiralPoint:
    a = MINOR_DOMINANT_MAJOR_FRACTION
    b = MINOR_SUBDOMINANT_MINOR_FRACTION
    dominant = _combine((a, 1 - a), (_major_chord_center(k + 1), _minor_chord_center(k + 1)))
    subdominant = _combine((b, 1 - b), (_minor_chord_center(k - 1), _major_chord_center(k - 1)))
    return _combine(KEY_WEIGHTS, (_minor_chord_center(k), dominant, subdominant))


def key_position(key_index: int) -> SpiralPoint:
    """Spiral-array center of one of the 24 keys."""
    tonic = pitch_class_to_fifths(key_index % 12)
    if key_index < 12:
        return _major_key_center(tonic)
    return _minor_key_center(tonic)


def key_name(key_index: int) -> str:
    quality = "major" if key_index < 12 else "minor"
    return f"{_PITCH_CLASS_NAMES[key_index % 12]} {quality}"


def detect_key(song: QuantizedSong) -> KeyEstimate:
    """Detect the song-level key by Krumhansl-Schmuckler correlation.

    The duration-weighted pitch-class histogram is correlated against the
    24 rotated Krumhansl-Kessler profiles; the highest correlation wins
    and ties break toward the lower key index.
    """
    histogram = np.zeros(12)
    for track in song.tracks:
        for note in track.notes:
            histogram[note.pitch % 12] += note.duration
    if histogram.sum() == 0:
        raise NoNotesError("cannot detect a key with no notes")

    best_index = 0
    best_r = -2.0
    for tonic in range(12):
        for offset, profile in ((0, _KK_MAJOR), (12, _KK_MINOR)):
            rotated = np.roll(profile, tonic)
            r = _pearson(histogram, rotated)
            index = tonic + offset
            if r > best_r + 1e-12:
                best_index, best_r = index, r
    return KeyEstimate(best_index, key_position(best_index))


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        return 0.0
    return float(da @ db) / denom


def _note_positions(notes: Iterable[QuantizedNote], low: int) -> list[SpiralPoint]:
    return [pitch_to_spiral(pitch_class_to_fifths(n.pitch % 12, low)) for n in notes]


def tensile_strain(bar_notes: Sequence[QuantizedNote], key: KeyEstimate) -> float:
    """Distance from the bar's note-cloud centroid to the key center.

    The centroid is the plain per-note mean (duration-unweighted); an
    empty bar has zero strain.
    """
    if not bar_notes:
        return 0.0
    points = _note_positions(bar_notes, _fifths_window_low(key))
    n = len(points)
    centroid = SpiralPoint(
        sum(p.x for p in points) / n,
        sum(p.y for p in points) / n,
        sum(p.z for p in points) / n,
    )
    return centroid.distance(key.key_position)


def cloud_diameter(bar_notes: Sequence[QuantizedNote]) -> float:
    """Largest pairwise spiral distance among the bar's distinct pitch
    classes; zero with fewer than two of them."""
    fifths = sorted({pitch_class_to_fifths(n.pitch % 12) for n in bar_notes})
    if len(fifths) < 2:
        return 0.0
    points = [pitch_to_spiral(k) for k in fifths]
    return max(
        points[i].distance(points[j])
        for i in range(len(points))
        for j in range(i + 1, len(points))
    )


def bar_tensions(song: QuantizedSong, key: KeyEstimate | None = None) -> list[BarTension]:
    """Per-bar (tensile strain, cloud diameter) over all tracks."""
    if key is None:
        key = detect_key(song)
    steps = song.steps_per_bar
    bars: list[list[QuantizedNote]] = [[] for _ in range(song.bars)]
    for track in song.tracks:
        for note in track.notes:
            bars[note.onset // steps].append(note)
    return [
        BarTension(tensile_strain(notes, key), cloud_diameter(notes), len(notes))
        for notes in bars
    ]
