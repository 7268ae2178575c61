"""Long-sequence symbolic music modelling on a small numpy autodiff core."""

from .attention import AttentionConfig, attention, band_mask_oracle, sliding_window_attention
from .events import VOCAB, decode_events, encode_events
from .generation import SamplerConfig, sample
from .midi import Note, NoteSequence, parse_midi, write_midi
from .model import LstmConfig, LstmModel, ModelConfig, MusicTransformer, build_model
from .training import TrainConfig, evaluate_nll, train

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "LstmConfig",
    "LstmModel",
    "ModelConfig",
    "MusicTransformer",
    "Note",
    "NoteSequence",
    "SamplerConfig",
    "TrainConfig",
    "VOCAB",
    "attention",
    "band_mask_oracle",
    "build_model",
    "decode_events",
    "encode_events",
    "evaluate_nll",
    "parse_midi",
    "sample",
    "sliding_window_attention",
    "train",
    "write_midi",
]
