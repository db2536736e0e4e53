"""Log-mel spectrogram frontend.

Raw mono waveforms are framed with centered zero padding, Hann-windowed,
transformed with an FFT and pooled onto an area-normalized triangular mel
filterbank.  A 10 s clip at 16 kHz with window 2048 / hop 256 yields 626
frames of 128 log mel-band magnitudes.
"""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SAMPLE_RATE = 16_000
DEFAULT_WINDOW_LEN = 2048
DEFAULT_HOP_LEN = 256
DEFAULT_N_MELS = 128
LOG_FLOOR = 1e-10


class FrontendError(ValueError):
    pass


@dataclass
class Waveform:
    """A mono clip: float samples in [-1, 1] plus sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise FrontendError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise FrontendError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise FrontendError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class MelClip:
    """Log-mel feature matrix plus the clip's annotation status.

    `annotations` holds an event list (strong), a class set (weak) or is
    empty (unlabeled).
    """

    frames: np.ndarray  # T x F
    label_status: str = "unlabeled"  # strong | weak | unlabeled
    annotations: object = field(default_factory=list)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise FrontendError("frames must be a T x F matrix")
        if not np.all(np.isfinite(self.frames)):
            raise FrontendError("frames contain non-finite entries")
        if self.label_status not in ("strong", "weak", "unlabeled"):
            raise FrontendError(f"unknown label status {self.label_status!r}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def mel_bands(self) -> int:
        return self.frames.shape[1]


def hann_window(n: int) -> np.ndarray:
    # Periodic Hann, as commonly used for STFT analysis.
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def stft_power(
    w: Waveform,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop_len: int = DEFAULT_HOP_LEN,
) -> np.ndarray:
    """Power spectrogram of Hann-windowed frames, centered framing.

    The waveform is zero-padded by window_len/2 at both ends, so frame t
    is centered on sample t*hop_len and T = floor(len/hop) + 1.
    """
    if window_len % 2 != 0:
        raise FrontendError("window_len must be even")
    if hop_len > window_len or hop_len <= 0:
        raise FrontendError("hop_len must be in (0, window_len]")
    x = w.samples
    if x.size < hop_len:
        raise FrontendError("clip too short")

    half = window_len // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(half)])
    n_frames = x.size // hop_len + 1
    idx = np.arange(window_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
    frames = padded[idx] * hann_window(window_len)[None, :]
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real**2 + spec.imag**2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int,
    n_fft_bins: int,
    sample_rate_hz: int,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> np.ndarray:
    """Triangular mel filterbank, each triangle normalized to unit area.

    Returns an (n_mels, n_fft_bins) matrix mapping power bins to bands.
    """
    if fmax_hz is None:
        fmax_hz = sample_rate_hz / 2.0
    if n_mels < 1:
        raise FrontendError("n_mels must be >= 1")
    if not (0.0 <= fmin_hz < fmax_hz <= sample_rate_hz / 2.0):
        raise FrontendError("need 0 <= fmin < fmax <= nyquist")

    window_len = 2 * (n_fft_bins - 1)
    bin_freqs = np.arange(n_fft_bins) * sample_rate_hz / window_len
    mel_pts = np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((n_mels, n_fft_bins))
    for i in range(n_mels):
        lo, mid, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
        fb[i] *= 2.0 / max(hi - lo, 1e-12)  # unit area
    return fb


def log_mel(
    power: np.ndarray,
    n_mels: int = DEFAULT_N_MELS,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
) -> np.ndarray:
    """log(filterbank @ power + eps) over every frame."""
    power = np.asarray(power, dtype=np.float64)
    if not np.all(np.isfinite(power)):
        raise FrontendError("power matrix contains non-finite entries")
    fb = mel_filterbank(n_mels, power.shape[1], sample_rate_hz, fmin_hz, fmax_hz)
    return np.log(power @ fb.T + LOG_FLOOR)


def waveform_to_logmel(
    w: Waveform,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop_len: int = DEFAULT_HOP_LEN,
    n_mels: int = DEFAULT_N_MELS,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> np.ndarray:
    power = stft_power(w, window_len, hop_len)
    return log_mel(power, n_mels, fmin_hz, fmax_hz, w.sample_rate_hz)


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate:
        return np.asarray(samples, dtype=np.float64)
    duration = samples.size / src_rate
    n_out = max(1, int(round(duration * dst_rate)))
    t_out = np.arange(n_out) / dst_rate
    t_src = np.arange(samples.size) / src_rate
    return np.interp(t_out, t_src, samples)


def read_wav(path, target_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Read 16-bit PCM mono WAV, resampling by linear interpolation."""
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise FrontendError("only 16-bit PCM WAV supported")
        if wf.getnchannels() != 1:
            raise FrontendError("only mono WAV supported")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    samples = resample_linear(samples, rate, target_rate_hz)
    return Waveform(samples, target_rate_hz)


def write_wav(path, w: Waveform) -> None:
    clipped = np.clip(w.samples, -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate_hz)
        wf.writeframes(struct.pack(f"<{ints.size}h", *ints.tolist()))
