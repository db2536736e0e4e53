"""Decoding of frame probabilities into events and scoring: frame-level and
event-based macro F1 with onset/offset collars, plus the scatter-trace
ratio used to measure feature-space structure."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DecodingConfig:
    threshold: float = 0.5
    median_filter_len: int = 7   # output frames, odd
    min_event_len_s: float = 0.0
    min_gap_s: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.median_filter_len % 2 != 1:
            raise ValueError("median filter length must be odd")


def median_filter_binary(x: np.ndarray, length: int) -> np.ndarray:
    """Sliding median over a binary sequence, edges padded with edge values."""
    if length <= 1:
        return x.copy()
    half = length // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, length)
    return np.median(windows, axis=1).astype(x.dtype)


def _runs(binary: np.ndarray):
    """(start, end) index pairs of maximal runs of ones; end exclusive."""
    diff = np.diff(np.concatenate([[0], binary.astype(np.int8), [0]]))
    starts = np.nonzero(diff == 1)[0]
    ends = np.nonzero(diff == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


def decode(p: np.ndarray, cfg: DecodingConfig, frame_duration_s: float) -> list:
    """Probabilities (T', M) -> list of (class_id, onset_s, offset_s).

    Per class: threshold, median filter, merge short gaps, drop short
    events, convert frame indices to seconds.
    """
    events = []
    n_frames, n_classes = p.shape
    for c in range(n_classes):
        binary = (p[:, c] > cfg.threshold).astype(np.int8)
        binary = median_filter_binary(binary, cfg.median_filter_len)
        runs = _runs(binary)
        merged = []
        for start, end in runs:
            if merged and (start - merged[-1][1]) * frame_duration_s < cfg.min_gap_s:
                merged[-1] = (merged[-1][0], end)
            else:
                merged.append((start, end))
        for start, end in merged:
            if (end - start) * frame_duration_s < cfg.min_event_len_s:
                continue
            events.append((c, start * frame_duration_s, end * frame_duration_s))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


def _f1(tp: int, fp: int, fn: int) -> tuple:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def event_f1(pred: list, ref: list, collar_s: float = 0.2,
             offset_collar_frac: float = 0.2) -> dict:
    """Event-based macro F1 with greedy earliest-onset matching.

    Events are (class_id, onset_s, offset_s).  A pair matches when the
    onset difference is within `collar_s` and the offset difference is
    within max(collar_s, offset_collar_frac * reference duration).
    Classes absent from both sides are excluded from the macro average.
    """
    if collar_s <= 0:
        raise ValueError("collar must be positive")
    classes = sorted({e[0] for e in pred} | {e[0] for e in ref})
    per_class = {}
    f1s = []
    for c in classes:
        p_events = sorted([e for e in pred if e[0] == c], key=lambda e: e[1])
        r_events = sorted([e for e in ref if e[0] == c], key=lambda e: e[1])
        used = [False] * len(p_events)
        tp = 0
        for _, r_on, r_off in r_events:
            off_collar = max(collar_s, offset_collar_frac * (r_off - r_on))
            for idx, (_, p_on, p_off) in enumerate(p_events):
                if used[idx]:
                    continue
                if abs(p_on - r_on) <= collar_s and abs(p_off - r_off) <= off_collar:
                    used[idx] = True
                    tp += 1
                    break
        fp = len(p_events) - tp
        fn = len(r_events) - tp
        precision, recall, f1 = _f1(tp, fp, fn)
        per_class[c] = {"tp": tp, "fp": fp, "fn": fn,
                        "precision": precision, "recall": recall, "f1": f1}
        f1s.append(f1)
    macro = float(np.mean(f1s)) if f1s else 0.0
    return {"macro_f1": macro, "per_class": per_class}


def frame_f1(p: np.ndarray, targets: np.ndarray, threshold: float = 0.5) -> float:
    """Macro F1 of thresholded frame probabilities against binary targets.

    Classes with no positive frames on either side are excluded.
    """
    if p.shape != targets.shape:
        raise ValueError("shape mismatch")
    pred = p > threshold
    truth = targets > 0.5
    f1s = []
    for c in range(p.shape[-1]):
        pc, tc = pred[..., c], truth[..., c]
        tp = int(np.sum(pc & tc))
        fp = int(np.sum(pc & ~tc))
        fn = int(np.sum(~pc & tc))
        if tp + fp + fn == 0:
            continue
        f1s.append(_f1(tp, fp, fn)[2])
    return float(np.mean(f1s)) if f1s else 0.0


def scatter_trace_ratio(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """tr(between-class scatter) / tr(within-class scatter).

    Larger means more separated class clusters.  `labels` holds one class
    id per embedding row.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    mu = embeddings.mean(axis=0)
    tr_w, tr_b = 0.0, 0.0
    for c in np.unique(labels):
        rows = embeddings[labels == c]
        mu_c = rows.mean(axis=0)
        tr_w += float(np.sum((rows - mu_c) ** 2))
        tr_b += rows.shape[0] * float(np.sum((mu_c - mu) ** 2))
    return tr_b / max(tr_w, 1e-12)


def format_report(frame_macro: float, event_result: dict) -> str:
    lines = [
        f"frame macro F1: {frame_macro:.4f}",
        f"event macro F1: {event_result['macro_f1']:.4f}",
    ]
    for c, stats in sorted(event_result["per_class"].items()):
        lines.append(
            f"  class {c}: P={stats['precision']:.3f} R={stats['recall']:.3f} "
            f"F1={stats['f1']:.3f} (tp={stats['tp']} fp={stats['fp']} fn={stats['fn']})")
    return "\n".join(lines)
