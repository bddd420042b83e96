"""Objective evaluation of generated infills against the originals.

Seven features per region -- pitch number, note number, pitch range,
chromagram histogram, pitch-interval histogram, duration histogram, and
onset-interval histogram -- compared with two normalized difference
statistics: scalars use abs(gen-ori)/ori, histograms use
sum((gen-ori)^2)/sum(ori^2), both guarded at zero denominators. The
corpus harness aggregates mean/std per infill category (melody, bass,
accompaniment, bar) in the same shape as the reference results table.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import numpy as np

from .codec import TokenSequence, parse_structure
from .masking import MaskedExample, mask_cells
from .midi_io import QuantizedNote

__all__ = [
    "FeatureVector",
    "MetricReport",
    "FEATURE_NAMES",
    "CATEGORIES",
    "compute_features",
    "diff_scalar",
    "diff_hist",
    "pair_differences",
    "evaluate_corpus",
    "region_notes",
    "sample_eval_regions",
    "render_table",
]

FEATURE_NAMES = (
    "pitch_number",
    "note_number",
    "pitch_range",
    "chroma_hist",
    "pitch_interval_hist",
    "duration_hist",
    "onset_interval_hist",
)
CATEGORIES = ("melody", "bass", "accompaniment", "bar")

PITCH_INTERVAL_CLAMP = 24  # semitones, so 49 histogram bins
ONSET_INTERVAL_CLAMP = 16  # grid steps, so 17 histogram bins


@dataclass(frozen=True)
class FeatureVector:
    pitch_number: int
    note_number: int
    pitch_range: int
    chroma_hist: np.ndarray
    pitch_interval_hist: np.ndarray
    duration_hist: np.ndarray
    onset_interval_hist: np.ndarray


def compute_features(notes: list[QuantizedNote]) -> FeatureVector:
    """Feature vector of one region; histograms hold raw counts.

    Consecutive-note sequences (pitch and onset intervals) follow onset
    order with ties broken by ascending pitch.
    """
    ordered = sorted(notes, key=lambda n: (n.onset, n.pitch))
    chroma = np.zeros(12)
    duration = np.zeros(32)
    pitch_interval = np.zeros(2 * PITCH_INTERVAL_CLAMP + 1)
    onset_interval = np.zeros(ONSET_INTERVAL_CLAMP + 1)
    for note in ordered:
        chroma[note.pitch % 12] += 1
        duration[note.duration - 1] += 1
    for previous, current in zip(ordered, ordered[1:]):
        delta = current.pitch - previous.pitch
        delta = max(-PITCH_INTERVAL_CLAMP, min(PITCH_INTERVAL_CLAMP, delta))
        pitch_interval[delta + PITCH_INTERVAL_CLAMP] += 1
        gap = min(ONSET_INTERVAL_CLAMP, current.onset - previous.onset)
        onset_interval[gap] += 1
    pitches = [n.pitch for n in ordered]
    return FeatureVector(
        pitch_number=len(set(pitches)),
        note_number=len(ordered),
        pitch_range=(max(pitches) - min(pitches)) if len(pitches) > 1 else 0,
        chroma_hist=chroma,
        pitch_interval_hist=pitch_interval,
        duration_hist=duration,
        onset_interval_hist=onset_interval,
    )


def diff_scalar(gen: float, ori: float) -> float:
    """abs(gen-ori)/ori; at ori=0 it is 0 when gen=0 and 1 otherwise."""
    if ori == 0:
        return 0.0 if gen == 0 else 1.0
    return abs(gen - ori) / ori


def diff_hist(gen: np.ndarray, ori: np.ndarray) -> float:
    """sum((gen-ori)^2)/sum(ori^2) with the same all-zero guard."""
    denominator = float(np.sum(np.square(ori)))
    if denominator == 0:
        return 0.0 if float(np.sum(np.square(gen))) == 0 else 1.0
    return float(np.sum(np.square(gen - ori))) / denominator


def pair_differences(
    generated: list[QuantizedNote], original: list[QuantizedNote]
) -> dict[str, float]:
    g = compute_features(generated)
    o = compute_features(original)
    return {
        "pitch_number": diff_scalar(g.pitch_number, o.pitch_number),
        "note_number": diff_scalar(g.note_number, o.note_number),
        "pitch_range": diff_scalar(g.pitch_range, o.pitch_range),
        "chroma_hist": diff_hist(g.chroma_hist, o.chroma_hist),
        "pitch_interval_hist": diff_hist(g.pitch_interval_hist, o.pitch_interval_hist),
        "duration_hist": diff_hist(g.duration_hist, o.duration_hist),
        "onset_interval_hist": diff_hist(g.onset_interval_hist, o.onset_interval_hist),
    }


@dataclass(frozen=True)
class MetricReport:
    """Per-example differences plus mean/std aggregates per category."""

    examples: tuple[tuple[str, dict[str, float]], ...]
    aggregates: dict[str, dict[str, tuple[float, float]]]

    def category_count(self, category: str) -> int:
        return sum(1 for c, _ in self.examples if c == category)

    def to_dict(self) -> dict:
        return {
            "examples": [{"category": c, "differences": d} for c, d in self.examples],
            "aggregates": {
                category: {
                    feature: {"mean": mean, "std": std}
                    for feature, (mean, std) in features.items()
                }
                for category, features in self.aggregates.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate_corpus(
    pairs: list[tuple[list[QuantizedNote], list[QuantizedNote], str]]
) -> MetricReport:
    """All seven differences per (generated, original, category) pair,
    aggregated as population mean/std per category."""
    examples = [(category, pair_differences(gen, ori)) for gen, ori, category in pairs]
    aggregates: dict[str, dict[str, tuple[float, float]]] = {}
    for category in sorted({c for c, _ in examples}):
        rows = [d for c, d in examples if c == category]
        aggregates[category] = {}
        for feature in FEATURE_NAMES:
            # sorted so aggregation is exactly permutation-invariant
            values = np.sort(np.array([row[feature] for row in rows]))
            aggregates[category][feature] = (float(values.mean()), float(values.std()))
    return MetricReport(examples=tuple(examples), aggregates=aggregates)


# ---------------------------------------------------------------------------
# Region extraction and the infilling evaluation harness


def region_notes(seq: TokenSequence, cells: list[tuple[int, int]]) -> list[QuantizedNote]:
    """Notes of the given (bar, track) cells, with song-absolute onsets."""
    structure = parse_structure(seq)
    notes: list[QuantizedNote] = []
    for bar, track in cells:
        notes.extend(structure.bars[bar].cells[track].notes)
    return sorted(notes, key=lambda n: (n.onset, n.pitch))


def sample_eval_regions(
    seq: TokenSequence, rng: random.Random
) -> list[tuple[str, MaskedExample, list[tuple[int, int]]]]:
    """The two evaluation tasks for one song: one random whole-track
    infill (category = that track's role) and one whole-bar infill."""
    structure = parse_structure(seq)
    bar_count = len(structure.bars)
    track_names = CATEGORIES[: structure.track_count]

    track = rng.randrange(structure.track_count)
    track_cells = [(b, track) for b in range(bar_count)]
    bar = rng.randrange(bar_count)
    bar_cells = [(bar, t) for t in range(structure.track_count)]
    return [
        (track_names[track], mask_cells(seq, track_cells), track_cells),
        ("bar", mask_cells(seq, bar_cells), bar_cells),
    ]


def render_table(report: MetricReport, with_report: MetricReport | None = None) -> str:
    """Fixed-width table: features x (melody, bass, accompaniment, bar)
    x (mean, std). With two reports, cells print "without/with" pairs.
    """
    label_width = max(len(f) for f in FEATURE_NAMES) + 2
    cell_width = 13 if with_report else 8
    lines = []
    header = " " * label_width + "".join(
        f"{category:^{2 * cell_width}}" for category in CATEGORIES
    )
    subheader = " " * label_width + "".join(
        f"{'mean':^{cell_width}}{'std':^{cell_width}}" for _ in CATEGORIES
    )
    lines.append(header)
    lines.append(subheader)
    for feature in FEATURE_NAMES:
        row = f"{feature:<{label_width}}"
        for category in CATEGORIES:
            stats = report.aggregates.get(category, {}).get(feature)
            other = None
            if with_report is not None:
                other = with_report.aggregates.get(category, {}).get(feature)
            if stats is None and other is None:
                row += f"{'-':^{cell_width}}" * 2
                continue
            if with_report is None:
                mean_text = f"{stats[0]:.2f}" if stats else "-"
                std_text = f"{stats[1]:.2f}" if stats else "-"
            else:
                mean_text = _pair_text(stats, other, 0)
                std_text = _pair_text(stats, other, 1)
            row += f"{mean_text:^{cell_width}}{std_text:^{cell_width}}"
        lines.append(row)
    return "\n".join(lines)


def _pair_text(a: tuple[float, float] | None, b: tuple[float, float] | None, index: int) -> str:
    left = f"{a[index]:.2f}" if a is not None else "-"
    right = f"{b[index]:.2f}" if b is not None else "-"
    return f"{left}/{right}"
