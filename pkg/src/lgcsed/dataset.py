"""Synthetic corpus with strong / weak / unlabeled splits, plus DESED-style
TSV metadata ingestion and frame-target construction.

Synthetic classes share a wide frequency band and are distinguished by
spectro-temporal pattern (steady tone, upward chirp, amplitude-modulated
tone) over a pink-noise background, so a model must generalize across the
frequency axis while ground truth stays exact.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .frontend import Waveform, write_wav

log = logging.getLogger(__name__)

EVENT_KINDS = ("tone", "chirp", "noise_burst", "am_tone", "pulsed_tone")

# (kind, low Hz, high Hz) signature per class id.  The first bands overlap
# on purpose: those classes share a wide frequency range and differ only in
# spectro-temporal pattern, so per-class band energy is not enough and a
# small labeled set undersamples the frequency axis.
CLASS_BANKS = [
    ("tone", 400.0, 3200.0),
    ("chirp", 400.0, 3200.0),
    ("pulsed_tone", 400.0, 3200.0),
    ("noise_burst", 400.0, 3200.0),
    ("am_tone", 400.0, 3200.0),
    ("tone", 4000.0, 7000.0),
    ("chirp", 4000.0, 7000.0),
    ("pulsed_tone", 4000.0, 7000.0),
    ("noise_burst", 4000.0, 7000.0),
    ("am_tone", 4000.0, 7000.0),
]

MAX_CLASSES = len(CLASS_BANKS)


@dataclass
class EventSpec:
    class_id: int
    kind: str
    onset_s: float
    offset_s: float
    base_freq_hz: float
    snr_db: float
    sweep_ratio: float = 1.6  # chirp: end frequency / start frequency
    mod_rate_hz: float = 4.0  # am_tone: amplitude modulation rate

    def __post_init__(self):
        if not 0.0 <= self.onset_s < self.offset_s:
            raise ValueError("need 0 <= onset < offset")
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class ClipRecord:
    clip_id: str
    label_status: str  # strong | weak | unlabeled
    truth_events: list  # list[EventSpec] or (filename, onset, offset, label) triples

    @property
    def annotation(self):
        """What training is allowed to see for this clip."""
        if self.label_status == "strong":
            return list(self.truth_events)
        if self.label_status == "weak":
            return sorted({e.class_id for e in self.truth_events})
        return None


@dataclass
class CorpusManifest:
    clips: list
    n_classes: int
    clip_len_s: float
    sample_rate_hz: int
    seed: int | None = None
    class_names: list = field(default_factory=list)

    def split_counts(self) -> dict:
        counts = {"strong": 0, "weak": 0, "unlabeled": 0}
        for c in self.clips:
            counts[c.label_status] += 1
        return counts


def _pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Pink-ish noise by 1/sqrt(f) spectral shaping of white noise."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    shaping = np.ones_like(freqs)
    shaping[1:] = 1.0 / np.sqrt(freqs[1:])
    shaping[0] = 0.0
    pink = np.fft.irfft(spec * shaping, n)
    return pink / (np.std(pink) + 1e-12)


def _bandpass_noise(n: int, lo_hz: float, hi_hz: float, sr: int,
                    rng: np.random.Generator) -> np.ndarray:
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / sr)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    out = np.fft.irfft(spec, n)
    return out / (np.std(out) + 1e-12)


def _fade(n: int, sr: int, ramp_s: float = 0.01) -> np.ndarray:
    env = np.ones(n)
    r = min(max(int(ramp_s * sr), 1), n // 2)
    env[:r] = np.linspace(0.0, 1.0, r)
    env[-r:] = np.linspace(1.0, 0.0, r)
    return env


def render_event(spec: EventSpec, clip_len_s: float, sr: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Render one event into a full-length buffer at unit RMS inside its span."""
    n_total = int(round(clip_len_s * sr))
    i0 = int(round(spec.onset_s * sr))
    i1 = min(int(round(spec.offset_s * sr)), n_total)
    n = i1 - i0
    if n <= 0:
        return np.zeros(n_total)
    t = np.arange(n) / sr
    f = spec.base_freq_hz
    if spec.kind == "tone":
        sig = np.sin(2.0 * np.pi * f * t)
    elif spec.kind == "chirp":
        # Linear sweep from f to sweep_ratio * f over the event.
        rate = (spec.sweep_ratio - 1.0) * f / (n / sr)
        sig = np.sin(2.0 * np.pi * (f * t + 0.5 * rate * t**2))
    elif spec.kind == "am_tone":
        depth = 0.5 + 0.5 * np.sin(2.0 * np.pi * spec.mod_rate_hz * t)
        sig = np.sin(2.0 * np.pi * f * t) * depth
    elif spec.kind == "pulsed_tone":
        # on/off gating at mod_rate_hz: trains of short bursts
        gate = (np.sin(2.0 * np.pi * spec.mod_rate_hz * t) > 0.0).astype(float)
        sig = np.sin(2.0 * np.pi * f * t) * gate
    else:  # noise_burst
        sig = _bandpass_noise(n, 0.8 * f, 1.25 * f, sr, rng)
    sig = sig * _fade(n, sr)
    sig = sig / (np.std(sig) + 1e-12)
    out = np.zeros(n_total)
    out[i0:i1] = sig
    return out


def synthesize_clip(events: list, clip_len_s: float, sr: int,
                    rng: np.random.Generator,
                    background_rms: float = 0.05) -> Waveform:
    n = int(round(clip_len_s * sr))
    x = background_rms * _pink_noise(n, rng)
    for ev in events:
        gain = background_rms * 10.0 ** (ev.snr_db / 20.0)
        x = x + gain * render_event(ev, clip_len_s, sr, rng)
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x = x * (0.95 / peak)
    return Waveform(x, sr)


def _sample_events(n_classes: int, clip_len_s: float, rng: np.random.Generator,
                   snr_db_range=(6.0, 14.0), max_events: int = 3) -> list:
    events = []
    # 0..max_events, weighted so most clips carry at least one event
    counts = np.arange(max_events + 1)
    weights = np.array([0.15, 0.35, 0.30, 0.20])[:max_events + 1]
    n_events = int(rng.choice(counts, p=weights / weights.sum()))
    for _ in range(n_events):
        class_id = int(rng.integers(0, n_classes))
        kind, lo, hi = CLASS_BANKS[class_id]
        dur_hi = min(2.5, 0.8 * clip_len_s)
        dur = float(rng.uniform(min(0.6, 0.5 * dur_hi), dur_hi))
        onset = float(rng.uniform(0.0, clip_len_s - dur))
        sweep_ratio = float(rng.uniform(2.5, 4.0))
        if kind == "chirp":
            # keep the sweep end below Nyquist with some margin
            hi = min(hi, 7400.0 / sweep_ratio)
        # log-uniform base frequency: even coverage across octaves
        base_freq = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        events.append(EventSpec(
            class_id=class_id,
            kind=kind,
            onset_s=onset,
            offset_s=onset + dur,
            base_freq_hz=base_freq,
            snr_db=float(rng.uniform(*snr_db_range)),
            sweep_ratio=sweep_ratio,
            mod_rate_hz=float(rng.uniform(2.0, 5.0)),
        ))
    events.sort(key=lambda e: e.onset_s)
    return events


def generate_corpus(
    n_strong: int,
    n_weak: int,
    n_unlabeled: int,
    n_classes: int,
    seed: int,
    clip_len_s: float = 10.0,
    sample_rate_hz: int = 16_000,
    snr_db_range=(6.0, 14.0),
):
    """Build a reproducible synthetic corpus.

    Returns (manifest, waveforms) with waveforms keyed by clip id; the
    manifest keeps full ground truth for every clip while `annotation`
    exposes only what each split may see.
    """
    if n_classes < 1 or n_classes > MAX_CLASSES:
        raise ValueError(f"n_classes must be in 1..{MAX_CLASSES}")
    rng = np.random.Generator(np.random.PCG64(seed))
    clips, waveforms = [], {}
    specs = [("strong", n_strong), ("weak", n_weak), ("unlabeled", n_unlabeled)]
    for status, count in specs:
        for i in range(count):
            clip_id = f"{status}_{i:04d}"
            events = _sample_events(n_classes, clip_len_s, rng, snr_db_range)
            waveforms[clip_id] = synthesize_clip(events, clip_len_s, sample_rate_hz, rng)
            clips.append(ClipRecord(clip_id, status, events))
    manifest = CorpusManifest(
        clips=clips,
        n_classes=n_classes,
        clip_len_s=clip_len_s,
        sample_rate_hz=sample_rate_hz,
        seed=seed,
        class_names=[f"class_{i}" for i in range(n_classes)],
    )
    return manifest, waveforms


def export_corpus(manifest: CorpusManifest, waveforms: dict, out_dir) -> None:
    """Write WAV files plus a line-delimited manifest (id, split, annotation)."""
    import json
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as fh:
        for clip in manifest.clips:
            write_wav(os.path.join(out_dir, clip.clip_id + ".wav"), waveforms[clip.clip_id])
            if clip.label_status == "strong":
                ann = [[e.class_id, e.onset_s, e.offset_s] for e in clip.truth_events]
            elif clip.label_status == "weak":
                ann = clip.annotation
            else:
                ann = None
            fh.write(json.dumps({
                "clip_id": clip.clip_id,
                "split": clip.label_status,
                "annotation": ann,
            }) + "\n")


def frame_targets(events: list, n_out_frames: int, clip_len_s: float,
                  n_classes: int) -> np.ndarray:
    """Binary (T' x M) targets: frame t is positive for class c iff an event
    of class c overlaps at least half of frame t's time span."""
    targets = np.zeros((n_out_frames, n_classes), dtype=np.float64)
    if not events:
        return targets
    span = clip_len_s / n_out_frames
    starts = np.arange(n_out_frames) * span
    ends = starts + span
    for ev in events:
        if ev.offset_s > clip_len_s + 1e-9 or ev.onset_s < -1e-9:
            raise ValueError("event outside clip bounds")
        overlap = np.minimum(ends, ev.offset_s) - np.maximum(starts, ev.onset_s)
        targets[overlap >= 0.5 * span, ev.class_id] = 1.0
    return targets


def weak_targets(annotation, n_classes: int) -> np.ndarray:
    out = np.zeros(n_classes, dtype=np.float64)
    for c in annotation or []:
        out[int(c)] = 1.0
    return out


class MetadataError(ValueError):
    pass


def load_desed_metadata(tsv_path, class_names: list) -> CorpusManifest:
    """Parse DESED-style TSV metadata.

    Strong rows: `filename<TAB>onset<TAB>offset<TAB>event_label`.
    Weak rows: `filename<TAB>label1,label2`.  A header row is skipped.
    """
    name_to_id = {n: i for i, n in enumerate(class_names)}
    strong_by_file: dict = {}
    weak_by_file: dict = {}
    n_rows = 0
    with open(tsv_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if lineno == 1 and cols[0].lower() in ("filename", "file"):
                continue
            n_rows += 1
            if len(cols) == 4:
                fname, onset, offset, label = cols
                if label not in name_to_id:
                    raise MetadataError(f"line {lineno}: unknown label {label!r}")
                try:
                    onset_f, offset_f = float(onset), float(offset)
                except ValueError:
                    raise MetadataError(f"line {lineno}: non-numeric onset/offset")
                if not 0.0 <= onset_f < offset_f:
                    raise MetadataError(f"line {lineno}: need 0 <= onset < offset")
                strong_by_file.setdefault(fname, []).append(
                    (name_to_id[label], onset_f, offset_f))
            elif len(cols) == 2:
                fname, labels = cols
                ids = set()
                for label in labels.split(","):
                    label = label.strip()
                    if label not in name_to_id:
                        raise MetadataError(f"line {lineno}: unknown label {label!r}")
                    ids.add(name_to_id[label])
                weak_by_file.setdefault(fname, set()).update(ids)
            else:
                raise MetadataError(f"line {lineno}: expected 2 or 4 tab-separated columns")
    if n_rows == 0:
        warnings.warn(f"empty metadata file {tsv_path}")

    clips = []
    for fname, rows in strong_by_file.items():
        events = [EventSpec(cid, "tone", on, off, 0.0, 0.0) for cid, on, off in rows]
        # kind/freq are placeholders; real audio comes from the WAV itself
        clips.append(ClipRecord(fname, "strong", events))
    for fname, ids in weak_by_file.items():
        events = [EventSpec(cid, "tone", 0.0, 1e-3 + 0.0, 0.0, 0.0) for cid in sorted(ids)]
        clips.append(ClipRecord(fname, "weak", events))
    return CorpusManifest(
        clips=clips,
        n_classes=len(class_names),
        clip_len_s=10.0,
        sample_rate_hz=16_000,
        class_names=list(class_names),
    )
