"""CRNN encoder, sigmoid frame predictor and normalized projection head,
as a student/teacher pair with EMA linkage.

All randomness (weight init) is drawn from a caller-supplied numpy
generator so a run is a pure function of its seed; the network itself is
dropout- and batchnorm-free, so forward passes are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass
class NetworkConfig:
    n_mels: int = 128
    n_classes: int = 3
    # (filters, time_pool, freq_pool); frequency is only pooled 16x in total
    # so the recurrent layer still sees coarse spectral shape, which the
    # pattern-vs-pattern synthetic classes require.
    conv_blocks: tuple = ((16, 2, 4), (32, 2, 2), (32, 1, 2))
    rnn_hidden: int = 32
    projection_dim: int = 16
    dtype: str = "float64"

    @property
    def time_pool_total(self) -> int:
        total = 1
        for _, tp, _ in self.conv_blocks:
            total *= tp
        return total

    @property
    def feature_dim(self) -> int:
        return 2 * self.rnn_hidden  # bidirectional

    @property
    def torch_dtype(self) -> torch.dtype:
        return {"float32": torch.float32, "float64": torch.float64}[self.dtype]

    def pooled_frames(self, n_frames: int) -> int:
        t = n_frames
        for _, tp, _ in self.conv_blocks:
            t = t // tp
        return t


@dataclass
class ForwardOutputs:
    features: torch.Tensor     # (B, T', D)
    probs: torch.Tensor        # (B, T', M), sigmoid outputs
    projections: torch.Tensor  # (B, T', D'), L2-normalized rows


class CRNN(nn.Module):
    """Conv blocks -> BiGRU -> {dense+sigmoid predictor, 2-layer projector}."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        convs = []
        in_ch = 1
        freq = cfg.n_mels
        for filters, tpool, fpool in cfg.conv_blocks:
            # pool first so the 3x3 conv runs on the downsampled map
            convs.append(nn.AvgPool2d((tpool, fpool)))
            convs.append(nn.Conv2d(in_ch, filters, 3, padding=1))
            convs.append(nn.ReLU())
            in_ch = filters
            freq = freq // fpool
        self.convs = nn.Sequential(*convs)
        self.rnn = nn.GRU(
            input_size=in_ch * freq,
            hidden_size=cfg.rnn_hidden,
            batch_first=True,
            bidirectional=True,
        )
        d = cfg.feature_dim
        self.predictor = nn.Linear(d, cfg.n_classes)
        self.proj1 = nn.Linear(d, cfg.projection_dim)
        self.proj2 = nn.Linear(cfg.projection_dim, cfg.projection_dim)
        self.to(cfg.torch_dtype)

    def forward(self, x: torch.Tensor) -> ForwardOutputs:
        """x: (B, T, F) log-mel batch."""
        if x.dim() != 3 or x.shape[2] != self.cfg.n_mels:
            raise ValueError(f"expected (B, T, {self.cfg.n_mels}) input, got {tuple(x.shape)}")
        h = self.convs(x.unsqueeze(1))          # (B, C, T', F')
        h = h.permute(0, 2, 1, 3)               # (B, T', C, F')
        h = h.reshape(h.shape[0], h.shape[1], -1)
        q, _ = self.rnn(h)                      # (B, T', D)
        p = torch.sigmoid(self.predictor(q))
        v = self.proj2(F.relu(self.proj1(q)))
        v = F.normalize(v, dim=-1, eps=1e-12)
        return ForwardOutputs(features=q, probs=p, projections=v)


def init_params(model: nn.Module, rng: np.random.Generator) -> None:
    """Uniform(-1/sqrt(fan_in)) init drawn from a numpy generator."""
    for p in model.parameters():
        if p.dim() >= 2:
            fan_in = p.shape[1] * (p[0, 0].numel() if p.dim() > 2 else 1)
        else:
            fan_in = p.shape[0]
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        vals = rng.uniform(-bound, bound, size=tuple(p.shape))
        with torch.no_grad():
            p.copy_(torch.as_tensor(vals, dtype=p.dtype))


def flatten_params(model: nn.Module) -> np.ndarray:
    return np.concatenate([p.detach().cpu().numpy().ravel() for p in model.parameters()])


def load_flat_params(model: nn.Module, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    offset = 0
    with torch.no_grad():
        for p in model.parameters():
            n = p.numel()
            chunk = flat[offset:offset + n].reshape(tuple(p.shape))
            p.copy_(torch.as_tensor(chunk, dtype=p.dtype))
            offset += n
    if offset != flat.size:
        raise ValueError("flat parameter vector has wrong length")


def param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


@dataclass
class ModelPair:
    """Student and EMA teacher with identical architecture."""

    student: CRNN
    teacher: CRNN
    ema_decay: float = 0.999

    @classmethod
    def create(cls, cfg: NetworkConfig, rng: np.random.Generator,
               ema_decay: float = 0.999) -> "ModelPair":
        student = CRNN(cfg)
        init_params(student, rng)
        teacher = CRNN(cfg)
        load_flat_params(teacher, flatten_params(student))
        for p in teacher.parameters():
            p.requires_grad_(False)
        return cls(student=student, teacher=teacher, ema_decay=ema_decay)

    def ema_update(self, decay: float | None = None) -> None:
        """teacher <- decay * teacher + (1 - decay) * student, elementwise."""
        d = self.ema_decay if decay is None else decay
        if not 0.0 <= d < 1.0:
            raise ValueError("ema decay must be in [0, 1)")
        with torch.no_grad():
            for t, s in zip(self.teacher.parameters(), self.student.parameters()):
                t.mul_(d).add_(s, alpha=1.0 - d)
