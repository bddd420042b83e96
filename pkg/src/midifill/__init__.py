"""Controllable multi-track MIDI infilling toolkit.

Pipeline: MIDI bytes -> :class:`QuantizedSong` -> control features ->
token sequence -> masked examples -> transformer reconstruction ->
grammar-constrained sampling -> objective evaluation. Also ships a CLI
(``midifill``) and an HTTP service (:func:`midifill.service.create_app`).
"""

from .codec import (
    TokenSequence,
    Vocabulary,
    build_vocab,
    decode_tokens,
    encode_song,
    validate_grammar,
)
from .controls import Calibration, ControlSet, compute_control_set
from .masking import MaskedExample, MaskSpan, finetune_mask, mask_cells, pretrain_mask
from .metrics import MetricReport, compute_features, evaluate_corpus
from .midi_io import (
    QuantizedNote,
    QuantizedSong,
    QuantizedTrack,
    Role,
    parse_midi,
    quantize,
    write_midi,
)
from .model import ModelConfig, Seq2SeqTransformer, TrainConfig, load_checkpoint, save_checkpoint
from .sampler import sample_infill
from .tension import KeyEstimate, cloud_diameter, detect_key, tensile_strain

__version__ = "0.1.0"

__all__ = [
    "TokenSequence",
    "Vocabulary",
    "build_vocab",
    "decode_tokens",
    "encode_song",
    "validate_grammar",
    "Calibration",
    "ControlSet",
    "compute_control_set",
    "MaskedExample",
    "MaskSpan",
    "finetune_mask",
    "mask_cells",
    "pretrain_mask",
    "MetricReport",
    "compute_features",
    "evaluate_corpus",
    "QuantizedNote",
    "QuantizedSong",
    "QuantizedTrack",
    "Role",
    "parse_midi",
    "quantize",
    "write_midi",
    "ModelConfig",
    "Seq2SeqTransformer",
    "TrainConfig",
    "load_checkpoint",
    "save_checkpoint",
    "sample_infill",
    "KeyEstimate",
    "cloud_diameter",
    "detect_key",
    "tensile_strain",
    "__version__",
]
