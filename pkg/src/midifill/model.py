"""Transformer encoder-decoder for masked-sequence reconstruction.

The blocks are written out explicitly (attention, feedforward, residual
wiring) rather than taken from ``nn.Transformer``: the model is small
and the tests need full control over masking semantics. The encoder
self-attends bidirectionally over non-pad positions; the decoder
self-attends causally and cross-attends to the encoder output.

Residual blocks are pre-normalized (``ModelConfig.pre_norm``), which
trains far more reliably at toy scale than the post-norm original;
post-norm remains available behind the flag. Training runs in single
precision; :func:`gradient_check` switches to double precision and
verifies backpropagation against central finite differences.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .codec import PAD, Vocabulary, build_vocab
from .masking import MaskedExample

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "CheckpointError",
    "Seq2SeqTransformer",
    "Batch",
    "collate",
    "sequence_loss",
    "token_accuracy",
    "train_step",
    "fit",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"MFCKPT1\n"


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 4
    num_heads: int = 8
    model_dim: int = 512
    feedforward_dim: int = 2048
    max_encoder_len: int = 2048
    max_decoder_len: int = 1024
    dropout_rate: float = 0.1
    vocab_size: int = 360
    pre_norm: bool = True

    def __post_init__(self) -> None:
        if self.model_dim % self.num_heads != 0:
            raise ValueError("model_dim must be divisible by num_heads")
        if min(self.max_encoder_len, self.max_decoder_len) < 1:
            raise ValueError("sequence length caps must be >= 1")

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Small configuration for CPU tests and demos."""
        values = dict(
            num_layers=2,
            num_heads=4,
            model_dim=64,
            feedforward_dim=128,
            max_encoder_len=512,
            max_decoder_len=256,
            dropout_rate=0.1,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 16
    pretrain_epochs: int = 2
    finetune_epochs: int = 8
    seed: int = 0
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self) -> None:
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")


def _sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table.unsqueeze(0)


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(
        self,
        query: torch.Tensor,
        keyvalue: torch.Tensor,
        key_mask: torch.Tensor | None,
        causal: bool,
    ) -> torch.Tensor:
        b, tq, _ = query.shape
        tk = keyvalue.shape[1]

        def split(x):
            return x.view(b, -1, self.heads, self.head_dim).transpose(1, 2)

        q = split(self.q_proj(query))
        k = split(self.k_proj(keyvalue))
        v = split(self.v_proj(keyvalue))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if key_mask is not None:
            # key_mask True at real tokens; padded keys never receive weight
            scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        if causal:
            future = torch.triu(
                torch.ones(tq, tk, dtype=torch.bool, device=query.device), diagonal=1
            )
            scores = scores.masked_fill(future, float("-inf"))
        weights = self.dropout(torch.softmax(scores, dim=-1))
        out = (weights @ v).transpose(1, 2).reshape(b, tq, -1)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, hidden), nn.ReLU(), nn.Dropout(dropout), nn.Linear(hidden, dim)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class _Residual(nn.Module):
    """One residual sublayer, pre- or post-normalized."""

    def __init__(self, dim: int, dropout: float, pre_norm: bool):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.dropout = nn.Dropout(dropout)
        self.pre_norm = pre_norm

    def forward(self, x: torch.Tensor, sublayer) -> torch.Tensor:
        if self.pre_norm:
            return x + self.dropout(sublayer(self.norm(x)))
        return self.norm(x + self.dropout(sublayer(x)))


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.attn = MultiHeadAttention(config.model_dim, config.num_heads, config.dropout_rate)
        self.ffn = FeedForward(config.model_dim, config.feedforward_dim, config.dropout_rate)
        self.res_attn = _Residual(config.model_dim, config.dropout_rate, config.pre_norm)
        self.res_ffn = _Residual(config.model_dim, config.dropout_rate, config.pre_norm)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None) -> torch.Tensor:
        x = self.res_attn(x, lambda h: self.attn(h, h, pad_mask, causal=False))
        return self.res_ffn(x, self.ffn)


class DecoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.model_dim, config.num_heads, config.dropout_rate)
        self.cross_attn = MultiHeadAttention(config.model_dim, config.num_heads, config.dropout_rate)
        self.ffn = FeedForward(config.model_dim, config.feedforward_dim, config.dropout_rate)
        self.res_self = _Residual(config.model_dim, config.dropout_rate, config.pre_norm)
        self.res_cross = _Residual(config.model_dim, config.dropout_rate, config.pre_norm)
        self.res_ffn = _Residual(config.model_dim, config.dropout_rate, config.pre_norm)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor,
        self_mask: torch.Tensor | None,
        memory_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        x = self.res_self(x, lambda h: self.self_attn(h, h, self_mask, causal=True))
        x = self.res_cross(x, lambda h: self.cross_attn(h, memory, memory_mask, causal=False))
        return self.res_ffn(x, self.ffn)


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder over the token vocabulary.

    Token embeddings are shared between encoder and decoder; the output
    projection is a separate, untied linear layer. Pad masks are boolean
    tensors marking real tokens and must keep at least one real position
    per row.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.model_dim)
        self.register_buffer(
            "enc_positions", _sinusoidal_table(config.max_encoder_len, config.model_dim)
        )
        self.register_buffer(
            "dec_positions", _sinusoidal_table(config.max_decoder_len, config.model_dim)
        )
        self.input_dropout = nn.Dropout(config.dropout_rate)
        self.encoder_layers = nn.ModuleList(
            EncoderLayer(config) for _ in range(config.num_layers)
        )
        self.decoder_layers = nn.ModuleList(
            DecoderLayer(config) for _ in range(config.num_layers)
        )
        self.encoder_norm = nn.LayerNorm(config.model_dim) if config.pre_norm else nn.Identity()
        self.decoder_norm = nn.LayerNorm(config.model_dim) if config.pre_norm else nn.Identity()
        self.output_projection = nn.Linear(config.model_dim, config.vocab_size)
        self.scale = math.sqrt(config.model_dim)

    def _embed(self, ids: torch.Tensor, table: torch.Tensor) -> torch.Tensor:
        if ids.shape[1] > table.shape[1]:
            raise ValueError(f"sequence length {ids.shape[1]} over the cap {table.shape[1]}")
        x = self.embedding(ids) * self.scale + table[:, : ids.shape[1]].to(ids.device)
        return self.input_dropout(x)

    def encode(self, encoder_ids: torch.Tensor, pad_mask: torch.Tensor | None) -> torch.Tensor:
        x = self._embed(encoder_ids, self.enc_positions)
        for layer in self.encoder_layers:
            x = layer(x, pad_mask)
        return self.encoder_norm(x)

    def decode(
        self,
        memory: torch.Tensor,
        decoder_ids: torch.Tensor,
        decoder_pad_mask: torch.Tensor | None,
        memory_pad_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        x = self._embed(decoder_ids, self.dec_positions)
        for layer in self.decoder_layers:
            x = layer(x, memory, decoder_pad_mask, memory_pad_mask)
        return self.output_projection(self.decoder_norm(x))

    def forward(
        self,
        encoder_ids: torch.Tensor,
        decoder_ids: torch.Tensor,
        encoder_pad_mask: torch.Tensor | None = None,
        decoder_pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Logits over the vocabulary at every decoder position."""
        memory = self.encode(encoder_ids, encoder_pad_mask)
        return self.decode(memory, decoder_ids, decoder_pad_mask, encoder_pad_mask)


def sequence_loss(
    logits: torch.Tensor, targets: torch.Tensor, pad_mask: torch.Tensor | None = None
) -> torch.Tensor:
    """Mean token cross-entropy over non-pad target positions."""
    per_token = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), reduction="none"
    ).reshape(targets.shape)
    if pad_mask is None:
        return per_token.mean()
    real = pad_mask.to(per_token.dtype)
    count = real.sum()
    if count == 0:
        warnings.warn("loss over an all-pad target defined as 0", stacklevel=2)
        return torch.zeros((), dtype=per_token.dtype, device=per_token.device)
    return (per_token * real).sum() / count


@dataclass
class Batch:
    encoder_ids: torch.Tensor
    decoder_ids: torch.Tensor
    target_ids: torch.Tensor
    encoder_mask: torch.Tensor
    decoder_mask: torch.Tensor


def collate(examples: list[MaskedExample], vocab: Vocabulary) -> Batch:
    """Pad a list of masked examples into id tensors plus pad masks."""
    pad_id = vocab.id(PAD)

    def pack(rows: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
        width = max(1, max(len(r) for r in rows))
        ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
        mask = torch.zeros((len(rows), width), dtype=torch.bool)
        for i, row in enumerate(rows):
            ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = True
        return ids, mask

    encoder_ids, encoder_mask = pack([vocab.ids(list(e.encoder_input.tokens)) for e in examples])
    decoder_ids, decoder_mask = pack([vocab.ids(list(e.decoder_input)) for e in examples])
    target_ids, _ = pack([vocab.ids(list(e.decoder_target)) for e in examples])
    if target_ids.shape != decoder_ids.shape:
        raise ValueError("decoder input/target shape mismatch")
    return Batch(encoder_ids, decoder_ids, target_ids, encoder_mask, decoder_mask)


def train_step(
    model: Seq2SeqTransformer, optimizer: torch.optim.Optimizer, batch: Batch
) -> float:
    """One Adam update on one batch; returns the batch loss."""
    model.train()
    optimizer.zero_grad()
    logits = model(batch.encoder_ids, batch.decoder_ids, batch.encoder_mask, batch.decoder_mask)
    loss = sequence_loss(logits, batch.target_ids, batch.decoder_mask)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def make_optimizer(model: nn.Module, learning_rate: float) -> torch.optim.Optimizer:
    return torch.optim.Adam(model.parameters(), lr=learning_rate, betas=(0.9, 0.999), eps=1e-8)


def fit(
    model: Seq2SeqTransformer,
    examples: list[MaskedExample],
    train_config: TrainConfig,
    stage: str,
    vocab: Vocabulary | None = None,
    max_steps: int | None = None,
    log_stream=None,
    optimizer: torch.optim.Optimizer | None = None,
) -> list[float]:
    """Train over the examples for the stage's epoch count.

    Deterministic for a fixed ``train_config.seed``: shuffling uses its
    own generator and torch is reseeded before the first step. Emits one
    ``{"step", "stage", "loss"}`` JSON line per step to ``log_stream``.
    """
    if vocab is None:
        vocab = build_vocab()
    epochs = train_config.pretrain_epochs if stage == "pretrain" else train_config.finetune_epochs
    if optimizer is None:
        optimizer = make_optimizer(model, train_config.learning_rate)
    torch.manual_seed(train_config.seed)
    import random as _random

    shuffler = _random.Random(train_config.seed)
    losses: list[float] = []
    step = 0
    for _ in range(epochs):
        order = list(range(len(examples)))
        shuffler.shuffle(order)
        for start in range(0, len(order), train_config.batch_size):
            chunk = [examples[i] for i in order[start : start + train_config.batch_size]]
            batch = collate(chunk, vocab)
            loss = train_step(model, optimizer, batch)
            losses.append(loss)
            if log_stream is not None:
                log_stream.write(json.dumps({"step": step, "stage": stage, "loss": loss}) + "\n")
            step += 1
            if max_steps is not None and step >= max_steps:
                return losses
    return losses


@torch.no_grad()
def token_accuracy(
    model: Seq2SeqTransformer, examples: list[MaskedExample], vocab: Vocabulary | None = None
) -> float:
    """Teacher-forced argmax accuracy over non-pad target tokens."""
    if vocab is None:
        vocab = build_vocab()
    model.eval()
    batch = collate(examples, vocab)
    logits = model(batch.encoder_ids, batch.decoder_ids, batch.encoder_mask, batch.decoder_mask)
    predictions = logits.argmax(-1)
    correct = ((predictions == batch.target_ids) & batch.decoder_mask).sum()
    return float(correct) / float(batch.decoder_mask.sum())


def gradient_check(
    model: Seq2SeqTransformer,
    batch: Batch,
    num_coordinates: int = 200,
    step: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Runs at double precision with dropout disabled, over
    ``num_coordinates`` randomly chosen parameter coordinates.
    """
    model = model.double()
    model.eval()

    def compute_loss() -> torch.Tensor:
        logits = model(batch.encoder_ids, batch.decoder_ids, batch.encoder_mask, batch.decoder_mask)
        return sequence_loss(logits, batch.target_ids, batch.decoder_mask)

    model.zero_grad()
    compute_loss().backward()

    parameters = [p for p in model.parameters() if p.requires_grad]
    sizes = [p.numel() for p in parameters]
    total = sum(sizes)
    generator = torch.Generator().manual_seed(seed)
    picks = torch.randperm(total, generator=generator)[:num_coordinates].tolist()

    worst = 0.0
    with torch.no_grad():
        for flat_index in picks:
            param_index = 0
            while flat_index >= sizes[param_index]:
                flat_index -= sizes[param_index]
                param_index += 1
            param = parameters[param_index]
            flat = param.view(-1)
            original = flat[flat_index].item()
            backprop = param.grad.view(-1)[flat_index].item()

            flat[flat_index] = original + step
            loss_plus = compute_loss().item()
            flat[flat_index] = original - step
            loss_minus = compute_loss().item()
            flat[flat_index] = original

            finite_diff = (loss_plus - loss_minus) / (2 * step)
            scale = max(abs(finite_diff), abs(backprop), 1e-8)
            worst = max(worst, abs(finite_diff - backprop) / scale)
    return worst


def save_checkpoint(model: Seq2SeqTransformer) -> bytes:
    """Serialize model weights and config.

    Layout: the magic bytes ``MFCKPT1\\n`` followed by a torch-saved
    payload ``{"format_version", "config", "state"}``.
    """
    buffer = io.BytesIO()
    buffer.write(CHECKPOINT_MAGIC)
    torch.save(
        {"format_version": 1, "config": asdict(model.config), "state": model.state_dict()},
        buffer,
    )
    return buffer.getvalue()


def load_checkpoint(
    data: bytes, expected_vocab_size: int | None = None
) -> tuple[Seq2SeqTransformer, ModelConfig]:
    """Rebuild a model from checkpoint bytes; inverse of save_checkpoint."""
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError("bad checkpoint magic bytes")
    payload = torch.load(io.BytesIO(data[len(CHECKPOINT_MAGIC) :]), weights_only=True)
    if payload.get("format_version") != 1:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('format_version')}")
    config = ModelConfig(**payload["config"])
    if expected_vocab_size is not None and config.vocab_size != expected_vocab_size:
        raise CheckpointError(
            f"checkpoint vocab size {config.vocab_size} != expected {expected_vocab_size}"
        )
    model = Seq2SeqTransformer(config)
    model.load_state_dict(payload["state"])
    model.eval()
    return model, config
