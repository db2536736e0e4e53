"""Training objectives: supervised BCE, mean-teacher consistency, CutMix
local consistency, prototype-guided contrastive loss, and their phase-1 /
phase-2 compositions with the exponential warm-up ramp.

Every loss is a mean (not a sum) so hyperparameters stay decoupled from
batch and clip sizes.  All functions accept torch tensors and return torch
scalars; teacher-side tensors are detached inside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

PROB_CLAMP = 1e-7


@dataclass
class LossWeights:
    r_max_steps: int = 1000
    alpha: float = 0.1        # weight of the contrastive term in phase 2
    gamma: float = 0.1        # softmax temperature
    tau_plus: float = 0.9     # teacher confidence gate
    tau_minus: float = 0.5    # student low-confidence gate

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= self.tau_minus < self.tau_plus <= 1.0:
            raise ValueError("need 0 <= tau_minus < tau_plus <= 1")


@dataclass
class BatchLossReport:
    l_sup: float = 0.0
    l_mt: float = 0.0
    l_clc: float = 0.0
    l_pgc: float = 0.0
    total: float = 0.0
    ramp: float = 0.0
    anchors_selected: int = 0
    anchor_fraction: float = 0.0

    def as_dict(self) -> dict:
        return {
            "l_sup": self.l_sup, "l_mt": self.l_mt, "l_clc": self.l_clc,
            "l_pgc": self.l_pgc, "total": self.total, "ramp": self.ramp,
            "anchors_selected": self.anchors_selected,
            "anchor_fraction": self.anchor_fraction,
        }


def ramp(step: int, r_max_steps: int) -> float:
    """Exponential warm-up exp(-5 (1 - min(step/r_max, 1))^2)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if r_max_steps <= 0:
        return 1.0
    x = min(step / r_max_steps, 1.0)
    return math.exp(-5.0 * (1.0 - x) ** 2)


def _bce(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))


def _check_binary(y: torch.Tensor) -> None:
    if y.numel() and not torch.all((y == 0) | (y == 1)):
        raise ValueError("targets must be binary")


def l_sup(
    p_strong: torch.Tensor | None,
    strong_targets: torch.Tensor | None,
    p_weak_clip: torch.Tensor | None = None,
    weak_targets: torch.Tensor | None = None,
) -> torch.Tensor:
    """Mean frame BCE on strong clips plus mean clip BCE on weak clips.

    `p_weak_clip` is the temporal max of frame probabilities per weak clip.
    Either part may be absent (None or empty).
    """
    terms = []
    if p_strong is not None and p_strong.numel():
        _check_binary(strong_targets)
        terms.append(_bce(p_strong, strong_targets).mean())
    if p_weak_clip is not None and p_weak_clip.numel():
        _check_binary(weak_targets)
        terms.append(_bce(p_weak_clip, weak_targets).mean())
    if not terms:
        return torch.zeros((), dtype=torch.float64)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def l_mt(p_student: torch.Tensor, p_teacher: torch.Tensor) -> torch.Tensor:
    """Mean squared difference between student and (detached) teacher."""
    if p_student.shape != p_teacher.shape:
        raise ValueError("prediction shapes differ")
    return ((p_student - p_teacher.detach()) ** 2).mean()


def l_clc(p_student_on_mixed: torch.Tensor, mixed_teacher_p: torch.Tensor) -> torch.Tensor:
    """Local consistency: student on CutMixed input vs CutMixed teacher
    pseudo-labels built with the same mask (mean squared difference)."""
    if p_student_on_mixed.shape != mixed_teacher_p.shape:
        raise ValueError("mask mismatch: student and target shapes differ")
    return ((p_student_on_mixed - mixed_teacher_p.detach()) ** 2).mean()


def frame_class_similarity(v: torch.Tensor, prototypes: torch.Tensor) -> torch.Tensor:
    """s_{k,i} = max_j <v_k, c_{i,j}> for v (K, D') against (M, C, D')."""
    m, c, d = prototypes.shape
    sims = v @ prototypes.reshape(m * c, d).T          # (K, M*C)
    return sims.reshape(v.shape[0], m, c).max(dim=2).values


def l_pgc(
    v_anchor: torch.Tensor,
    p_teacher_rows: torch.Tensor,
    prototypes: torch.Tensor,
    gamma: float,
    tau_plus: float,
) -> torch.Tensor:
    """Prototype-guided contrastive loss over anchor frames.

    -mean over active (k, i) of log softmax_i(s_k / gamma), where (k, i) is
    active iff the teacher probability exceeds tau_plus.  Returns exactly 0
    when no term is active.  Gradient flows only into `v_anchor`; the
    prototype tensor is detached here.
    """
    if v_anchor.numel() == 0:
        return torch.zeros((), dtype=prototypes.dtype)
    active = (p_teacher_rows.detach() > tau_plus)
    n_active = int(active.sum())
    if n_active == 0:
        return torch.zeros((), dtype=v_anchor.dtype)
    s = frame_class_similarity(v_anchor, prototypes.detach())
    log_probs = torch.log_softmax(s / gamma, dim=1)
    return -(log_probs * active.to(log_probs.dtype)).sum() / n_active


def compose(l_sup_val, l_mt_val, l_clc_val, l_pgc_val, r: float,
            alpha: float, phase: str):
    """Phase L1: l_sup + r (l_mt + l_clc).  Phase L2: L1 + alpha * l_pgc.

    Works on torch scalars (training) and plain floats (reports) alike.
    """
    if phase not in ("L1", "L2"):
        raise ValueError("phase must be 'L1' or 'L2'")
    total = l_sup_val + r * (l_mt_val + l_clc_val)
    if phase == "L2":
        total = total + alpha * l_pgc_val
    return total
