"""Masked-example construction for the two training stages.

Pretraining hides many short spans (1-3 tokens, at most 15% of the
sequence); finetuning hides whole track-in-bar cells. Both collapse each
hidden region to a single ``mask`` token and pair it with a decoder
segment that ends in ``eos``.
"""

from midifill import compute_control_set, encode_song, finetune_mask, pretrain_mask
from midifill.masking import splice_segments, split_segments
from midifill.samples import two_bar_demo_song

song = two_bar_demo_song()
seq = encode_song(song, compute_control_set(song))
print(f"sequence length: {len(seq.tokens)} tokens")

# --- pretraining: short spans, budgeted at 15%
example = pretrain_mask(seq, rng_seed=7)
masked = sum(span.length for span in example.spans)
print(f"\npretrain mask: {len(example.spans)} spans, {masked} tokens hidden "
      f"({masked / len(seq.tokens):.0%} of the sequence)")
print("  encoder:", example.encoder_input.to_text())
print("  decoder target:", " ".join(example.decoder_target))

# --- finetuning: one mask per track-in-bar cell
example = finetune_mask(seq, "bar_all_tracks", rng_seed=1)
print(f"\nfinetune mask (whole bar {example.spans[0].bar}):")
print("  encoder:", example.encoder_input.to_text())
print("  decoder input: ", " ".join(example.decoder_input))
print("  decoder target:", " ".join(example.decoder_target))

# the teacher-forcing alignment: input position t predicts target position t
for t in range(3):
    print(f"  step {t}: given {example.decoder_input[t]!r} predict "
          f"{example.decoder_target[t]!r}")

# --- masking loses nothing: splicing the targets back restores the original
segments = split_segments(example.decoder_target)
print("\nreconstruction closure:", splice_segments(example, segments).tokens == seq.tokens)
