"""Masked-example construction for pretraining and finetuning.

Pretraining masks short random token spans (1-3 tokens, drawn 2:1:1 in
favor of length 3) until just under 15% of the sequence is covered; each
span collapses to a single ``mask`` token. Finetuning masks whole
track-in-bar cells (the track token through its last note token), one
``mask`` per cell, in one of three modes: every track of one bar, one
track in every bar, or a random subset of cells.

The decoder pair is teacher-forced: the target is the concatenation of
span contents each followed by ``eos``; the input is the same sequence
shifted right with a ``mask`` opening each segment, so position t of the
input predicts position t of the target.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .codec import BAR, EOS, MASK, TokenSequence, parse_structure

__all__ = [
    "MaskSpan",
    "MaskedExample",
    "PRETRAIN_MODE",
    "FINETUNE_MODES",
    "MASK_BUDGET_FRACTION",
    "pretrain_mask",
    "finetune_mask",
    "build_decoder_pair",
    "split_segments",
    "splice_segments",
]

PRETRAIN_MODE = "pretrain_span"
FINETUNE_MODES = ("bar_all_tracks", "track_all_bars", "random_cells")

MASK_BUDGET_FRACTION = 0.15
PRETRAIN_SPAN_MAX = 3
RANDOM_CELL_PROBABILITY = 0.3


@dataclass(frozen=True)
class MaskSpan:
    """Inclusive token range [start, end] replaced by one mask token."""

    start: int
    end: int
    kind: str  # PRETRAIN_MODE or "bar_track"
    bar: int | None = None
    track: int | None = None

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"span end {self.end} before start {self.start}")
        if self.kind == PRETRAIN_MODE and not 1 <= self.length <= PRETRAIN_SPAN_MAX:
            raise ValueError(f"pretrain span length {self.length} outside [1,{PRETRAIN_SPAN_MAX}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class MaskedExample:
    encoder_input: TokenSequence
    decoder_input: tuple[str, ...]
    decoder_target: tuple[str, ...]
    spans: tuple[MaskSpan, ...]
    mode: str

    def __post_init__(self) -> None:
        if self.encoder_input.tokens.count(MASK) != len(self.spans):
            raise ValueError("mask token count disagrees with span count")
        if self.decoder_target.count(EOS) != len(self.spans):
            raise ValueError("eos count disagrees with span count")
        if len(self.decoder_input) != len(self.decoder_target):
            raise ValueError("decoder input/target length mismatch")

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "encoder_input": list(self.encoder_input.tokens),
                "decoder_input": list(self.decoder_input),
                "decoder_target": list(self.decoder_target),
                "spans": [
                    {"start": s.start, "end": s.end, "kind": s.kind, "bar": s.bar, "track": s.track}
                    for s in self.spans
                ],
                "mode": self.mode,
            }
        )

    @classmethod
    def from_json_line(cls, line: str) -> "MaskedExample":
        data = json.loads(line)
        tokens = tuple(data["encoder_input"])
        with_controls = len(tokens) > 2 and tokens[2].startswith("k_")
        return cls(
            encoder_input=TokenSequence(tokens, with_controls),
            decoder_input=tuple(data["decoder_input"]),
            decoder_target=tuple(data["decoder_target"]),
            spans=tuple(
                MaskSpan(s["start"], s["end"], s["kind"], s.get("bar"), s.get("track"))
                for s in data["spans"]
            ),
            mode=data["mode"],
        )


def build_decoder_pair(
    original: TokenSequence, spans: list[MaskSpan] | tuple[MaskSpan, ...]
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Teacher-forcing (decoder_input, decoder_target) for the spans."""
    previous_end = -1
    for span in spans:
        if span.start <= previous_end:
            raise ValueError(f"span starting at {span.start} overlaps the previous one")
        if span.end >= len(original.tokens):
            raise ValueError(f"span end {span.end} outside the sequence")
        previous_end = span.end
    decoder_input: list[str] = []
    decoder_target: list[str] = []
    for span in spans:
        content = list(original.tokens[span.start : span.end + 1])
        decoder_input.extend([MASK] + content)
        decoder_target.extend(content + [EOS])
    return tuple(decoder_input), tuple(decoder_target)


def _masked_encoder(tokens: tuple[str, ...], spans: list[MaskSpan]) -> tuple[str, ...]:
    out: list[str] = []
    cursor = 0
    for span in spans:
        out.extend(tokens[cursor : span.start])
        out.append(MASK)
        cursor = span.end + 1
    out.extend(tokens[cursor:])
    return tuple(out)


def _example(seq: TokenSequence, spans: list[MaskSpan], mode: str) -> MaskedExample:
    spans = sorted(spans, key=lambda s: s.start)
    decoder_input, decoder_target = build_decoder_pair(seq, spans)
    return MaskedExample(
        encoder_input=TokenSequence(_masked_encoder(seq.tokens, spans), seq.with_controls),
        decoder_input=decoder_input,
        decoder_target=decoder_target,
        spans=tuple(spans),
        mode=mode,
    )


def pretrain_mask(seq: TokenSequence, rng_seed: int) -> MaskedExample:
    """Span-mask a sequence for pretraining, covering at most 15% of it.

    Span lengths are drawn 3/1/2 with probabilities 0.5/0.25/0.25 and
    placed uniformly among the non-overlapping positions after the first
    bar token (the global header is never masked). Sampling stops as
    soon as the remaining budget could not fit a worst-case span, so
    every drawn length is placed and the drawn 2:1:1 ratio carries over
    to the emitted spans.
    """
    rng = random.Random(rng_seed)
    tokens = seq.tokens
    n = len(tokens)
    budget = int(MASK_BUDGET_FRACTION * n)
    first_bar = tokens.index(BAR) if BAR in tokens else n
    spans: list[MaskSpan] = []
    free = [True] * n
    total = 0
    while total + PRETRAIN_SPAN_MAX <= budget:
        roll = rng.random()
        length = 3 if roll < 0.5 else (1 if roll < 0.75 else 2)
        if first_bar > n - length:
            break
        # rejection sampling is uniform over the free starts and cheap at
        # <=15% occupancy; the exhaustive scan is the rare fallback
        start = None
        for _ in range(64):
            candidate = rng.randint(first_bar, n - length)
            if all(free[candidate : candidate + length]):
                start = candidate
                break
        if start is None:
            starts = [
                s for s in range(first_bar, n - length + 1) if all(free[s : s + length])
            ]
            if not starts:
                break
            start = rng.choice(starts)
        for i in range(start, start + length):
            free[i] = False
        spans.append(MaskSpan(start, start + length - 1, PRETRAIN_MODE))
        total += length
    return _example(seq, spans, PRETRAIN_MODE)


def finetune_mask(seq: TokenSequence, mode: str, rng_seed: int) -> MaskedExample:
    """Mask whole track-in-bar cells according to the finetuning mode.

    ``bar_all_tracks`` masks every track of one random bar;
    ``track_all_bars`` masks one random track in every bar;
    ``random_cells`` keeps each cell with probability 0.3, redrawing
    when nothing or everything got selected. Bar tokens and bar-level
    tension tokens are never masked.
    """
    if mode not in FINETUNE_MODES:
        raise ValueError(f"unknown finetune mode {mode!r}")
    rng = random.Random(rng_seed)
    structure = parse_structure(seq)
    cells = [(bar.bar_index, cell) for bar in structure.bars for cell in bar.cells]

    if mode == "bar_all_tracks":
        bar_index = rng.randrange(len(structure.bars))
        chosen = [(b, c) for b, c in cells if b == bar_index]
    elif mode == "track_all_bars":
        track_index = rng.randrange(structure.track_count)
        chosen = [(b, c) for b, c in cells if c.track_index == track_index]
    else:
        chosen = []
        for _ in range(1000):
            chosen = [(b, c) for b, c in cells if rng.random() < RANDOM_CELL_PROBABILITY]
            if 0 < len(chosen) < len(cells):
                break
        else:
            chosen = cells[:1]
    spans = [
        MaskSpan(cell.start, cell.end, "bar_track", bar=b, track=cell.track_index)
        for b, cell in chosen
    ]
    return _example(seq, spans, mode)


def mask_cells(seq: TokenSequence, cells: list[tuple[int, int]]) -> MaskedExample:
    """Mask an explicit list of (bar, track) cells.

    The masked-example layout is identical to :func:`finetune_mask`;
    this is the entry point for callers that pick regions themselves
    (the service, the evaluation harness).
    """
    if not cells:
        raise ValueError("no cells to mask")
    structure = parse_structure(seq)
    wanted = set()
    for bar, track in cells:
        if not 0 <= bar < len(structure.bars):
            raise ValueError(f"bar {bar} outside [0,{len(structure.bars) - 1}]")
        if not 0 <= track < structure.track_count:
            raise ValueError(f"track {track} outside [0,{structure.track_count - 1}]")
        wanted.add((bar, track))
    spans = [
        MaskSpan(cell.start, cell.end, "bar_track", bar=bar.bar_index, track=cell.track_index)
        for bar in structure.bars
        for cell in bar.cells
        if (bar.bar_index, cell.track_index) in wanted
    ]
    return _example(seq, spans, "selected_cells")


def split_segments(decoder_target: tuple[str, ...] | list[str]) -> list[list[str]]:
    """Split a decoder target into its per-span segments (eos removed)."""
    segments: list[list[str]] = []
    current: list[str] = []
    for token in decoder_target:
        if token == EOS:
            segments.append(current)
            current = []
        else:
            current.append(token)
    if current:
        raise ValueError("decoder target does not end with eos")
    return segments


def splice_segments(example: MaskedExample, segments: list[list[str]]) -> TokenSequence:
    """Replace each encoder mask with its segment, rebuilding a full
    sequence (the reconstruction closure of masking)."""
    if len(segments) != len(example.spans):
        raise ValueError(f"{len(segments)} segments for {len(example.spans)} spans")
    out: list[str] = []
    index = iter(segments)
    for token in example.encoder_input.tokens:
        if token == MASK:
            out.extend(next(index))
        else:
            out.append(token)
    return TokenSequence(tuple(out), example.encoder_input.with_controls)
