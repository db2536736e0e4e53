import numpy as np
import pytest

from lgcsed.frontend import (
    FrontendError,
    Waveform,
    hann_window,
    log_mel,
    mel_filterbank,
    read_wav,
    resample_linear,
    stft_power,
    write_wav,
)

SR = 16_000


def test_ten_second_clip_yields_626_frames():
    w = Waveform(np.random.default_rng(0).uniform(-0.5, 0.5, 10 * SR), SR)
    assert stft_power(w).shape == (626, 1025)


def test_zero_waveform_gives_zero_power():
    w = Waveform(np.zeros(SR), SR)
    assert np.all(stft_power(w) == 0.0)


def naive_dft_power(frame: np.ndarray) -> np.ndarray:
    """O(N^2) DFT oracle on one windowed frame."""
    n = frame.size
    k = np.arange(n // 2 + 1)
    angles = -2j * np.pi * np.outer(k, np.arange(n)) / n
    spec = np.exp(angles) @ frame
    return np.abs(spec) ** 2


def test_sine_against_naive_dft_oracle():
    window_len, hop = 256, 64
    # bin-center frequency: bin 16 of a 256-point DFT
    freq = 16 * SR / window_len
    t = np.arange(2 * window_len) / SR
    w = Waveform(0.5 * np.sin(2 * np.pi * freq * t), SR)
    power = stft_power(w, window_len, hop)

    win = hann_window(window_len)
    half = window_len // 2
    padded = np.concatenate([np.zeros(half), w.samples, np.zeros(half)])
    for frame_idx in range(power.shape[0]):
        frame = padded[frame_idx * hop:frame_idx * hop + window_len] * win
        expected = naive_dft_power(frame)
        assert np.max(np.abs(power[frame_idx] - expected)) <= 1e-6
    # dominant bin in a fully interior frame
    interior = power[4]
    assert np.argmax(interior) == 16


def test_shift_covariance_at_hop_granularity():
    rng = np.random.default_rng(1)
    hop, window_len = 64, 256
    x = rng.uniform(-0.5, 0.5, 2048)
    delayed = np.concatenate([np.zeros(hop), x])
    p1 = stft_power(Waveform(x, SR), window_len, hop)
    p2 = stft_power(Waveform(delayed, SR), window_len, hop)
    # interior rows: skip edges affected by the zero padding
    k = window_len // hop
    for t in range(k, p1.shape[0] - k):
        assert np.max(np.abs(p2[t + 1] - p1[t])) <= 1e-9


@pytest.mark.parametrize("n_samples", [SR, SR + 100, 3 * SR + 7, 10 * SR])
def test_frame_count_formula(n_samples):
    w = Waveform(np.ones(n_samples) * 0.1, SR)
    assert stft_power(w).shape[0] == n_samples // 256 + 1


def test_too_short_clip_rejected():
    with pytest.raises(FrontendError, match="clip too short"):
        stft_power(Waveform(np.ones(100), SR), 2048, 256)


def test_log_mel_shape_and_floor():
    power = np.zeros((626, 1025))
    out = log_mel(power, 128, sample_rate_hz=SR)
    assert out.shape == (626, 128)
    assert np.allclose(out, np.log(1e-10))


def test_log_mel_monotone_in_power_scale():
    rng = np.random.default_rng(2)
    power = rng.uniform(0, 2.0, (10, 1025))
    base = log_mel(power, 64, sample_rate_hz=SR)
    scaled = log_mel(3.0 * power, 64, sample_rate_hz=SR)
    assert np.all(scaled >= base)


def test_impulse_power_hits_only_covering_mel_bands():
    n_bins = 1025
    bin_idx = 300
    power = np.zeros((1, n_bins))
    power[0, bin_idx] = 2.5
    fb = mel_filterbank(64, n_bins, SR)
    out = log_mel(power, 64, sample_rate_hz=SR)
    floor = np.log(1e-10)
    expected = np.log(fb[:, bin_idx] * 2.5 + 1e-10)
    assert np.allclose(out[0], expected)
    covering = fb[:, bin_idx] > 0
    assert np.all(out[0, ~covering] == floor)
    assert np.all(out[0, covering] > floor)
    assert 1 <= covering.sum() <= 2  # triangles overlap by at most one neighbor


def test_mel_filterbank_validation():
    with pytest.raises(FrontendError):
        mel_filterbank(0, 1025, SR)
    with pytest.raises(FrontendError):
        mel_filterbank(10, 1025, SR, fmin_hz=5000, fmax_hz=4000)


def test_log_mel_rejects_non_finite():
    power = np.full((2, 1025), np.nan)
    with pytest.raises(FrontendError):
        log_mel(power, 16, sample_rate_hz=SR)


def test_wav_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    w = Waveform(rng.uniform(-0.8, 0.8, SR), SR)
    path = tmp_path / "clip.wav"
    write_wav(path, w)
    back = read_wav(path)
    assert back.sample_rate_hz == SR
    assert np.max(np.abs(back.samples - w.samples)) <= 1.0 / 32767


def test_read_wav_resamples(tmp_path):
    rng = np.random.default_rng(4)
    w = Waveform(rng.uniform(-0.5, 0.5, 8000), 8000)
    path = tmp_path / "clip8k.wav"
    write_wav(path, w)
    back = read_wav(path, target_rate_hz=SR)
    assert back.sample_rate_hz == SR
    assert abs(back.samples.size - SR) <= 2


def test_resample_identity():
    x = np.arange(10.0)
    assert np.array_equal(resample_linear(x, SR, SR), x)


def test_waveform_validation():
    with pytest.raises(FrontendError):
        Waveform(np.array([]))
    with pytest.raises(FrontendError):
        Waveform(np.array([np.inf, 0.0]))
