"""Time-axis CutMix of spectrograms and of the matching pooled predictions.

One binary mask per clip pair: a single consecutive run of ones over the raw
frame axis, plus its majority-pooled version over the output frame axis.  The
same mask instance must drive both the input mix and the prediction mix
within a training step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CutMixError(ValueError):
    pass


@dataclass
class TimeMask:
    m: np.ndarray          # (T,) binary, single run of ones
    m_pooled: np.ndarray   # (T',) binary, majority-pooled
    partner: int | None = None  # index of the shuffled partner clip


def pool_mask(m: np.ndarray, n_out: int) -> np.ndarray:
    """Majority-pool a raw-frame mask onto output frames; 50% ties become 1."""
    m = np.asarray(m)
    if m.size % n_out != 0:
        raise CutMixError("pooled length must divide mask length")
    factor = m.size // n_out
    sums = m.reshape(n_out, factor).sum(axis=1)
    return (2 * sums >= factor).astype(m.dtype)


def sample_mask(
    n_frames: int,
    n_out_frames: int,
    rng: np.random.Generator,
    min_frac: float = 0.25,
    max_frac: float = 0.75,
    partner: int | None = None,
) -> TimeMask:
    """Uniform run start, run length uniform in [min_frac, max_frac] of T."""
    if n_frames % n_out_frames != 0:
        raise CutMixError("n_out_frames must divide n_frames")
    lo = max(1, int(round(min_frac * n_frames)))
    hi = max(lo, int(round(max_frac * n_frames)))
    run = int(rng.integers(lo, hi + 1))
    start = int(rng.integers(0, n_frames - run + 1))
    m = np.zeros(n_frames, dtype=np.int8)
    m[start:start + run] = 1
    return TimeMask(m=m, m_pooled=pool_mask(m, n_out_frames), partner=partner)


def cutmix_spec(x_i: np.ndarray, x_sigma: np.ndarray, mask: TimeMask) -> np.ndarray:
    """m * x_i + (1 - m) * x_sigma, the mask broadcast across frequency."""
    if x_i.shape != x_sigma.shape:
        raise CutMixError("spectrogram shapes differ")
    if x_i.shape[0] != mask.m.size:
        raise CutMixError("mask length does not match frame count")
    m = mask.m.astype(x_i.dtype)[:, None]
    return m * x_i + (1 - m) * x_sigma


def cutmix_pred(p_i: np.ndarray, p_sigma: np.ndarray, mask: TimeMask) -> np.ndarray:
    """Pooled-mask mix of prediction matrices; rows come whole from one side."""
    if p_i.shape != p_sigma.shape:
        raise CutMixError("prediction shapes differ")
    if p_i.shape[0] != mask.m_pooled.size:
        raise CutMixError("pooled mask length does not match prediction rows")
    m = mask.m_pooled.astype(p_i.dtype)[:, None]
    return m * p_i + (1 - m) * p_sigma


def shuffle_pairing(batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Random pairing sigma: a uniform shuffle of the batch copy."""
    return rng.permutation(batch_size)
