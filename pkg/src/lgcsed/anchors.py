"""Selective anchor sampling: which student frames join the contrastive loss.

A (frame, class) pair is active iff the frame's source clip (under the
CutMix mask) is weak or unlabeled, the teacher is confident (> tau_plus)
and the student is not (< tau_minus).  A frame is an anchor iff at least
one class is active for it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATUS_STRONG = 0
STATUS_WEAK = 1
STATUS_UNLABELED = 2

STATUS_CODES = {"strong": STATUS_STRONG, "weak": STATUS_WEAK, "unlabeled": STATUS_UNLABELED}


@dataclass
class AnchorSet:
    frame_mask: np.ndarray        # (K,) bool over flattened frames
    active: np.ndarray            # (K, M) bool, class-level indicators
    per_class_counts: np.ndarray  # (M,) active pair counts
    selection_fraction: float     # anchors / eligible (weak+unlabeled) frames

    @property
    def n_selected(self) -> int:
        return int(self.frame_mask.sum())


def select(
    p_teacher_mixed: np.ndarray,
    p_student_mixed: np.ndarray,
    frame_statuses: np.ndarray,
    tau_plus: float,
    tau_minus: float,
    use_student_gate: bool = True,
) -> AnchorSet:
    """SAS over flattened mixed-aligned tensors.

    `frame_statuses` carries the status code of whichever source clip
    supplies each output frame under the pooled mask.  With
    `use_student_gate=False` (ablation) every confident weak/unlabeled
    frame becomes an anchor.
    """
    if tau_minus >= tau_plus:
        raise ValueError("need tau_minus < tau_plus")
    p_t = np.asarray(p_teacher_mixed)
    p_s = np.asarray(p_student_mixed)
    if p_t.shape != p_s.shape:
        raise ValueError("teacher/student shapes differ")
    statuses = np.asarray(frame_statuses)
    if statuses.shape != p_t.shape[:-1]:
        raise ValueError("status vector does not match frame count")

    eligible = (statuses == STATUS_WEAK) | (statuses == STATUS_UNLABELED)
    active = eligible[..., None] & (p_t > tau_plus)
    if use_student_gate:
        active = active & (p_s < tau_minus)
    frame_mask = active.any(axis=-1)
    n_eligible = int(eligible.sum())
    fraction = float(frame_mask.sum()) / n_eligible if n_eligible else 0.0
    return AnchorSet(
        frame_mask=frame_mask,
        active=active,
        per_class_counts=active.sum(axis=tuple(range(active.ndim - 1))),
        selection_fraction=fraction,
    )


def mixed_frame_statuses(status_i: int, status_sigma: int,
                         m_pooled: np.ndarray) -> np.ndarray:
    """Per output frame: the status of whichever clip supplies the frame."""
    m = np.asarray(m_pooled)
    return np.where(m == 1, status_i, status_sigma).astype(np.int64)
