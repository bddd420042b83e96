"""Span masking, cell masking, and the teacher-forcing decoder layout."""

import pytest

from midifill.codec import EOS, MASK, TokenSequence, encode_song, validate_grammar
from midifill.controls import compute_control_set
from midifill.masking import (
    FINETUNE_MODES,
    MaskSpan,
    MaskedExample,
    build_decoder_pair,
    finetune_mask,
    mask_cells,
    pretrain_mask,
    splice_segments,
    split_segments,
)

from .conftest import (
    CONTROL_TOKENS,
    MASKED_BAR0_ENCODER,
    MASKED_BAR0_TARGET,
    make_songs,
)


def control_seq() -> TokenSequence:
    return TokenSequence.from_text(CONTROL_TOKENS)


def closure_holds(example: MaskedExample, original: TokenSequence) -> bool:
    segments = split_segments(example.decoder_target)
    return splice_segments(example, segments).tokens == original.tokens


class TestPretrainMask:
    def test_budget_never_exceeded(self):
        for song in make_songs(31, 40, bars=4):
            seq = encode_song(song, compute_control_set(song))
            for seed in range(3):
                example = pretrain_mask(seq, seed)
                masked = sum(s.length for s in example.spans)
                assert masked <= 0.15 * len(seq.tokens)

    def test_deterministic(self):
        seq = control_seq()
        assert pretrain_mask(seq, 123) == pretrain_mask(seq, 123)

    def test_header_never_masked(self):
        for song in make_songs(17, 20, bars=4):
            seq = encode_song(song, compute_control_set(song))
            first_bar = seq.tokens.index("bar")
            example = pretrain_mask(seq, 5)
            assert all(span.start >= first_bar for span in example.spans)
            assert example.encoder_input.tokens[:first_bar] == seq.tokens[:first_bar]

    def test_span_lengths_within_1_to_3(self):
        for song in make_songs(13, 20, bars=4):
            seq = encode_song(song, compute_control_set(song))
            for span in pretrain_mask(seq, 9).spans:
                assert 1 <= span.length <= 3

    def test_short_sequence_gets_zero_spans(self):
        tiny = TokenSequence.from_text("4/4 t_3 i_0 i_32 bar track_0 track_1")
        example = pretrain_mask(tiny, 0)
        assert example.spans == ()
        assert example.encoder_input.tokens == tiny.tokens
        assert example.decoder_input == () and example.decoder_target == ()

    def test_reconstruction_closure(self):
        for song in make_songs(41, 30, bars=3):
            seq = encode_song(song, compute_control_set(song))
            for seed in range(2):
                assert closure_holds(pretrain_mask(seq, seed), seq)

    def test_length_ratio_two_one_one(self):
        from scipy.stats import chisquare

        lengths = []
        songs = make_songs(3, 50, bars=6)
        sequences = [encode_song(s, compute_control_set(s)) for s in songs]
        for seed in range(400):
            example = pretrain_mask(sequences[seed % len(sequences)], seed)
            lengths.extend(span.length for span in example.spans)
        counts = [lengths.count(3), lengths.count(1), lengths.count(2)]
        total = sum(counts)
        _, p = chisquare(counts, [total / 2, total / 4, total / 4])
        assert p > 0.01


class TestFinetuneMask:
    def test_bar0_fixture(self):
        seq = control_seq()
        for seed in range(30):
            example = finetune_mask(seq, "bar_all_tracks", seed)
            if example.spans[0].bar == 0:
                break
        assert example.encoder_input.to_text() == MASKED_BAR0_ENCODER
        assert " ".join(example.decoder_target) == MASKED_BAR0_TARGET
        assert [s.track for s in example.spans] == [0, 1, 2]

    def test_track_all_bars_masks_one_track_everywhere(self):
        for song in make_songs(23, 10, bars=2, track_count=3):
            seq = encode_song(song, compute_control_set(song))
            example = finetune_mask(seq, "track_all_bars", 7)
            assert len(example.spans) == 2
            tracks = {s.track for s in example.spans}
            assert len(tracks) == 1
            assert {s.bar for s in example.spans} == {0, 1}

    def test_random_cells_some_but_not_all(self):
        seq = control_seq()
        for seed in range(10):
            example = finetune_mask(seq, "random_cells", seed)
            assert 0 < len(example.spans) < 6

    def test_header_bar_and_tension_tokens_survive(self):
        seq = control_seq()
        first_bar = seq.tokens.index("bar")

        def structural(tokens):
            return [
                (i, t)
                for i, t in enumerate(tokens)
                if t == "bar" or t.startswith("s_") or t.startswith("a_")
            ]

        for mode in FINETUNE_MODES:
            example = finetune_mask(seq, mode, 3)
            assert example.encoder_input.tokens[:first_bar] == seq.tokens[:first_bar]
            kept = [t for _, t in structural(example.encoder_input.tokens)]
            original = [t for _, t in structural(seq.tokens)]
            assert kept == original

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            finetune_mask(control_seq(), "bogus", 0)

    def test_closure_all_modes(self):
        for song in make_songs(29, 15, bars=2):
            seq = encode_song(song, compute_control_set(song))
            for mode in FINETUNE_MODES:
                assert closure_holds(finetune_mask(seq, mode, 11), seq)

    def test_masked_encoder_validates_with_masks_allowed(self):
        seq = control_seq()
        for mode in FINETUNE_MODES:
            example = finetune_mask(seq, mode, 1)
            assert validate_grammar(example.encoder_input, allow_masks=True) is None

    def test_mask_cells_explicit(self):
        seq = control_seq()
        example = mask_cells(seq, [(1, 2)])
        assert len(example.spans) == 1
        assert example.spans[0].bar == 1 and example.spans[0].track == 2
        assert closure_holds(example, seq)
        with pytest.raises(ValueError):
            mask_cells(seq, [(5, 0)])
        with pytest.raises(ValueError):
            mask_cells(seq, [])


class TestDecoderPair:
    def test_single_token_span(self):
        seq = TokenSequence(("4/4", "t_3", "i_0", "i_32", "bar", "track_0", "track_1"), False)
        spans = [MaskSpan(5, 5, "bar_track", bar=0, track=0)]
        decoder_input, decoder_target = build_decoder_pair(seq, spans)
        assert decoder_input == (MASK, "track_0")
        assert decoder_target == ("track_0", EOS)

    def test_three_segments_from_fixture(self):
        seq = control_seq()
        example = mask_cells(seq, [(0, 0), (0, 1), (0, 2)])
        assert example.encoder_input.to_text() == MASKED_BAR0_ENCODER
        assert " ".join(example.decoder_target) == MASKED_BAR0_TARGET
        # shift alignment: input opens each segment with a mask
        assert example.decoder_input[0] == MASK
        assert example.decoder_input[1:10] == example.decoder_target[0:9]

    def test_zero_spans(self):
        seq = control_seq()
        assert build_decoder_pair(seq, []) == ((), ())

    def test_overlapping_spans_rejected(self):
        seq = control_seq()
        with pytest.raises(ValueError, match="overlap"):
            build_decoder_pair(seq, [MaskSpan(5, 8, "bar_track"), MaskSpan(8, 9, "bar_track")])

    def test_mask_eos_counting_invariants(self):
        seq = control_seq()
        example = mask_cells(seq, [(0, 1), (1, 0)])
        assert example.encoder_input.tokens.count(MASK) == 2
        assert example.decoder_target.count(EOS) == 2
        assert len(example.decoder_input) == len(example.decoder_target)

    def test_json_line_round_trip(self):
        seq = control_seq()
        example = finetune_mask(seq, "random_cells", 5)
        again = MaskedExample.from_json_line(example.to_json_line())
        assert again == example
