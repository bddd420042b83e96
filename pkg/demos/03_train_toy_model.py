"""Train a toy model until it memorizes a small corpus.

Ten random songs are masked once each and fed to a 2-layer model until
teacher-forced token accuracy crosses 99% (a few hundred Adam steps on a
CPU). The trained weights are written as a versioned checkpoint next to
this script.
"""

import pathlib
import random

import torch

from midifill import ModelConfig, Seq2SeqTransformer, TrainConfig, save_checkpoint
from midifill import build_vocab, compute_control_set, encode_song, finetune_mask
from midifill.model import collate, make_optimizer, token_accuracy, train_step
from midifill.samples import random_song

vocab = build_vocab()
rng = random.Random(4)
examples = []
for i in range(10):
    song = random_song(rng, bars=2)
    seq = encode_song(song, compute_control_set(song))
    examples.append(finetune_mask(seq, "bar_all_tracks", i))
print(f"corpus: {len(examples)} masked examples, "
      f"{sum(len(e.decoder_target) for e in examples)} target tokens")

torch.manual_seed(1)
model = Seq2SeqTransformer(ModelConfig.toy())
config = TrainConfig(learning_rate=1e-3, batch_size=10, seed=0)
optimizer = make_optimizer(model, config.learning_rate)
batch = collate(examples, vocab)

torch.manual_seed(config.seed)
for step in range(2000):
    loss = train_step(model, optimizer, batch)
    if (step + 1) % 50 == 0:
        accuracy = token_accuracy(model, examples, vocab)
        print(f"step {step + 1:4d}  loss {loss:.4f}  accuracy {accuracy:.1%}")
        if accuracy >= 0.99:
            break

out = pathlib.Path(__file__).with_name("toy_model.ckpt")
out.write_bytes(save_checkpoint(model))
print(f"\ncheckpoint written to {out}")
