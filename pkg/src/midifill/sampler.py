"""Grammar-constrained autoregressive infilling.

Each encoder ``mask`` stands for one track-in-a-bar cell. The decoder
fills the cells in order under the track grammar

    track_k (position pitch+ duration)* eos

with positions nondecreasing and bounded by the metre, and pitches
strictly ascending within a group. At every step the next token is
sampled only from the tokens the grammar allows (the logit-offset trick
of adding -100 to excluded tokens is available as a compatibility mode);
the sampled segments are spliced back into the encoder input, so the
output always parses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .codec import (
    DURATION_MAX,
    EOS,
    MASK,
    PITCH_MAX,
    PITCH_MIN,
    TokenSequence,
    Vocabulary,
    build_vocab,
    steps_per_bar_of,
    validate_grammar,
)
from .masking import MaskedExample, splice_segments
from .model import Seq2SeqTransformer

__all__ = ["GrammarState", "InfillResult", "allowed_next", "sample_infill", "SEGMENT_TOKEN_CAP"]

SEGMENT_TOKEN_CAP = 256
EXCLUDED_LOGIT_OFFSET = -100.0


@dataclass
class GrammarState:
    """Decoding state of one track-in-bar segment."""

    expected_track_index: int
    steps_per_bar: int
    started: bool = False  # track token consumed
    current_position: int | None = None
    in_group: bool = False
    last_pitch_in_group: int | None = None
    segment_done: bool = False
    # positions where eos was legal; used to trim truncated segments
    tokens: list[str] = field(default_factory=list)
    last_closed_length: int = 0

    def eos_legal(self) -> bool:
        return self.started and not self.in_group


def allowed_next(state: GrammarState) -> list[str]:
    """Tokens the grammar permits next, in stable order."""
    if state.segment_done:
        return []
    if not state.started:
        return [f"track_{state.expected_track_index}"]
    if state.in_group:
        allowed = []
        if state.last_pitch_in_group is None:
            allowed.extend(f"p_{p}" for p in range(PITCH_MIN, PITCH_MAX + 1))
        else:
            allowed.extend(
                f"p_{p}" for p in range(state.last_pitch_in_group + 1, PITCH_MAX + 1)
            )
            allowed.extend(f"n_{d}" for d in range(1, DURATION_MAX + 1))
        return allowed
    first = state.current_position if state.current_position is not None else 0
    allowed = [f"e_{p}" for p in range(first, state.steps_per_bar)]
    allowed.append(EOS)
    return allowed


def advance(state: GrammarState, token: str) -> None:
    """Apply one sampled token to the state."""
    if token == EOS:
        state.segment_done = True
        return
    state.tokens.append(token)
    if not state.started:
        state.started = True
        state.last_closed_length = len(state.tokens)
        return
    if token.startswith("e_"):
        state.current_position = int(token[2:])
        state.in_group = True
        state.last_pitch_in_group = None
    elif token.startswith("p_"):
        state.last_pitch_in_group = int(token[2:])
    elif token.startswith("n_"):
        state.in_group = False
        state.last_pitch_in_group = None
        state.last_closed_length = len(state.tokens)
    else:
        raise ValueError(f"token {token!r} cannot appear inside a segment")


@dataclass(frozen=True)
class InfillResult:
    tokens: TokenSequence
    segments: tuple[tuple[str, ...], ...]
    truncated: bool


def _pick(
    logits: torch.Tensor,
    allowed_ids: list[int],
    temperature: float,
    generator: torch.Generator,
    exact: bool,
) -> int:
    if temperature <= 0:
        if exact:
            subset = logits[allowed_ids]
            return allowed_ids[int(subset.argmax())]
        adjusted = logits.clone()
        mask = torch.ones_like(adjusted, dtype=torch.bool)
        mask[allowed_ids] = False
        adjusted[mask] += EXCLUDED_LOGIT_OFFSET
        return int(adjusted.argmax())
    if exact:
        subset = logits[allowed_ids] / temperature
        probs = torch.softmax(subset, dim=-1)
        return allowed_ids[int(torch.multinomial(probs, 1, generator=generator))]
    adjusted = logits.clone()
    mask = torch.ones_like(adjusted, dtype=torch.bool)
    mask[allowed_ids] = False
    adjusted[mask] += EXCLUDED_LOGIT_OFFSET
    probs = torch.softmax(adjusted / temperature, dim=-1)
    return int(torch.multinomial(probs, 1, generator=generator))


@torch.no_grad()
def sample_infill(
    model: Seq2SeqTransformer,
    masked: MaskedExample,
    temperature: float = 1.0,
    rng_seed: int = 0,
    vocab: Vocabulary | None = None,
    exact_exclusion: bool = True,
) -> InfillResult:
    """Fill every masked cell of a finetune-masked example.

    Decodes autoregressively with the training-time decoder layout (a
    ``mask`` opens each segment) and grammar-restricted sampling;
    ``temperature <= 0`` selects the argmax. A segment hitting the token
    cap is trimmed back to its last completed group, closed, and the
    result flagged as truncated. The spliced output always passes
    grammar validation.
    """
    if vocab is None:
        vocab = build_vocab()
    if any(span.kind != "bar_track" or span.track is None for span in masked.spans):
        raise ValueError("sample_infill needs bar_track spans with track indices")
    model.eval()
    steps_per_bar = steps_per_bar_of(masked.encoder_input.tokens[0])
    generator = torch.Generator().manual_seed(rng_seed)

    encoder_ids = torch.tensor([vocab.ids(list(masked.encoder_input.tokens))], dtype=torch.long)
    memory = model.encode(encoder_ids, None)
    mask_id = vocab.id(MASK)
    decoder_ids: list[int] = []
    segments: list[tuple[str, ...]] = []
    truncated = False
    decoder_budget = model.config.max_decoder_len

    for span in masked.spans:
        state = GrammarState(expected_track_index=span.track, steps_per_bar=steps_per_bar)
        decoder_ids.append(mask_id)
        while not state.segment_done:
            out_of_budget = (
                len(state.tokens) >= SEGMENT_TOKEN_CAP or len(decoder_ids) >= decoder_budget
            )
            if out_of_budget:
                # trim to the last point where eos was legal and close
                drop = len(state.tokens) - state.last_closed_length
                if drop:
                    del decoder_ids[-drop:]
                    del state.tokens[state.last_closed_length :]
                truncated = True
                break
            ids = torch.tensor([decoder_ids], dtype=torch.long)
            logits = model.decode(memory, ids, None, None)[0, -1]
            allowed_ids = vocab.ids(allowed_next(state))
            choice = _pick(logits, allowed_ids, temperature, generator, exact_exclusion)
            token = vocab.token(choice)
            advance(state, token)
            if token != EOS:
                decoder_ids.append(choice)
        if not state.tokens:
            # budget ran out before the forced track token
            state.tokens.append(f"track_{span.track}")
            decoder_ids.append(vocab.id(state.tokens[0]))
        segments.append(tuple(state.tokens))

    result = splice_segments(masked, [list(s) for s in segments])
    violation = validate_grammar(result)
    if violation is not None:
        raise AssertionError(f"constrained sampler produced a violation at token {violation}")
    return InfillResult(tokens=result, segments=tuple(segments), truncated=truncated)
