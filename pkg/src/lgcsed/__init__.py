"""Semi-supervised sound event detection with CutMix local consistency,
mean-teacher training and multi-prototype contrastive regularization."""

from .frontend import MelClip, Waveform, log_mel, stft_power, waveform_to_logmel
from .dataset import EventSpec, CorpusManifest, frame_targets, generate_corpus
from .cutmix import TimeMask, cutmix_pred, cutmix_spec, pool_mask, sample_mask
from .models import CRNN, ForwardOutputs, ModelPair, NetworkConfig
from .losses import BatchLossReport, LossWeights, compose, l_clc, l_mt, l_pgc, l_sup, ramp
from .prototypes import FeatureBuffer, PrototypePool, collect, kmeans
from .anchors import AnchorSet, select
from .evaluation import DecodingConfig, decode, event_f1, frame_f1, scatter_trace_ratio
from .trainer import AblationFlags, RunConfig, Trainer

__all__ = [
    "MelClip", "Waveform", "log_mel", "stft_power", "waveform_to_logmel",
    "EventSpec", "CorpusManifest", "frame_targets", "generate_corpus",
    "TimeMask", "cutmix_pred", "cutmix_spec", "pool_mask", "sample_mask",
    "CRNN", "ForwardOutputs", "ModelPair", "NetworkConfig",
    "BatchLossReport", "LossWeights", "compose", "l_clc", "l_mt", "l_pgc",
    "l_sup", "ramp",
    "FeatureBuffer", "PrototypePool", "collect", "kmeans",
    "AnchorSet", "select",
    "DecodingConfig", "decode", "event_f1", "frame_f1", "scatter_trace_ratio",
    "AblationFlags", "RunConfig", "Trainer",
]
