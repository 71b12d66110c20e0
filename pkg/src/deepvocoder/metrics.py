"""Objective quality measures: log-spectral distortion, frequency-weighted
segmental SNR, and short-time objective intelligibility."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import resample_poly

from .dsp import FrameConfig, frame_signal
from .errors import InsufficientDataError

_EPS = np.finfo(np.float64).eps

# fwsegSNR reference parameters: mel-spaced bands, magnitude-power weighting,
# per-frame clamping range in dB.
FWSEG_BANDS = 25
FWSEG_GAMMA = 0.2
FWSEG_CLAMP = (-10.0, 35.0)
_FWSEG_EPS = 1e-10

# STOI internals (fixed by the metric's definition).
_STOI_FS = 10000
_STOI_FRAME = 256
_STOI_NFFT = 512
_STOI_HOP = 128
_STOI_BANDS = 15
_STOI_MIN_FREQ = 150.0
_STOI_SEG = 30          # frames per 384 ms analysis segment
_STOI_BETA = -15.0      # lower SDR bound in dB
_STOI_DYN_RANGE = 40.0  # silence-removal dynamic range in dB


@dataclass
class MetricReport:
    """Per-utterance metric values with their mean and standard deviation."""

    mean: float
    std: float
    values: list = field(default_factory=list)

    @classmethod
    def from_values(cls, values) -> "MetricReport":
        arr = np.asarray(values, dtype=np.float64)
        return cls(mean=float(arr.mean()), std=float(arr.std()), values=arr.tolist())


def log_spectral_distortion(ref_frames, test_frames) -> float:
    """RMS over frames of the per-frame RMS log-magnitude difference, in dB.

    Inputs are natural-log magnitude frames; the difference is scaled by
    20/ln(10) so the result reads as decibels.
    """
    ref = np.atleast_2d(np.asarray(ref_frames, dtype=np.float64))
    test = np.atleast_2d(np.asarray(test_frames, dtype=np.float64))
    if ref.shape != test.shape:
        raise ValueError(f"frame shapes differ: {ref.shape} vs {test.shape}")
    scale = 20.0 / np.log(10.0)
    per_frame = np.sqrt(np.mean((scale * (ref - test)) ** 2, axis=1))
    return float(np.sqrt(np.mean(per_frame ** 2)))


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _mel_band_index(cfg: FrameConfig) -> np.ndarray:
    """Band number of each FFT bin: FWSEG_BANDS bands equally spaced on the
    mel scale from 0 to the Nyquist frequency."""
    edges = _mel_inv(np.linspace(0.0, _mel(cfg.sample_rate / 2.0), FWSEG_BANDS + 1))
    bin_freqs = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size
    return np.clip(np.digitize(bin_freqs, edges[1:-1]), 0, FWSEG_BANDS - 1)


def fwseg_snr(ref_samples, test_samples, cfg: FrameConfig = None) -> float:
    """Frequency-weighted segmental SNR in dB.

    Per frame, band magnitudes over mel-spaced bands are compared; bands are
    weighted by (reference band magnitude)**gamma, the weighted SNR is
    clamped to [-10, 35] dB, and frames are averaged.  Frames with no
    reference energy carry no information and are skipped.
    """
    cfg = cfg or FrameConfig()
    ref = np.asarray(ref_samples, dtype=np.float64)
    test = np.asarray(test_samples, dtype=np.float64)
    if ref.shape != test.shape:
        raise ValueError(f"signal lengths differ: {ref.shape} vs {test.shape}")

    band_of = _mel_band_index(cfg)
    ref_mag = np.abs(np.fft.rfft(frame_signal(ref, cfg).frames, n=cfg.fft_size, axis=1))
    test_mag = np.abs(np.fft.rfft(frame_signal(test, cfg).frames, n=cfg.fft_size, axis=1))

    def band_energy(mag):
        out = np.zeros((mag.shape[0], FWSEG_BANDS))
        np.add.at(out.T, band_of, (mag ** 2).T)
        return np.sqrt(out)

    x = band_energy(ref_mag)
    xh = band_energy(test_mag)
    weights = x ** FWSEG_GAMMA
    # Numerator floored to keep the log finite; zero-magnitude bands have
    # zero weight anyway.
    snr = 10.0 * np.log10(np.maximum(x ** 2, _FWSEG_EPS) / ((x - xh) ** 2 + _FWSEG_EPS))
    weight_sums = weights.sum(axis=1)
    active = weight_sums > 0.0
    if not np.any(active):
        raise InsufficientDataError("reference signal has no energy in any frame")
    frame_snr = (weights[active] * snr[active]).sum(axis=1) / weight_sums[active]
    return float(np.mean(np.clip(frame_snr, *FWSEG_CLAMP)))


def _third_octave_matrix(fs: int, nfft: int, n_bands: int, min_freq: float):
    """Boolean matrix selecting the FFT bins of each one-third octave band."""
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(n_bands, dtype=np.float64)
    cf = 2.0 ** (k / 3.0) * min_freq
    low = np.sqrt(cf * 2.0 ** ((k - 1) / 3.0) * min_freq)
    high = np.sqrt(cf * 2.0 ** ((k + 1) / 3.0) * min_freq)
    obm = np.zeros((n_bands, f.size))
    for i in range(n_bands):
        lo = int(np.argmin(np.square(f - low[i])))
        hi = int(np.argmin(np.square(f - high[i])))
        obm[i, lo:hi] = 1.0
    return obm


def _remove_silent_frames(x, y, dyn_range, frame_len, hop):
    """Drop frames more than dyn_range dB below the loudest reference frame,
    judged on the reference, then rebuild both signals by overlap-add."""
    w = np.hanning(frame_len + 2)[1:-1]
    starts = range(0, x.size - frame_len + 1, hop)
    x_frames = np.array([w * x[i : i + frame_len] for i in starts])
    y_frames = np.array([w * y[i : i + frame_len] for i in starts])
    if x_frames.size == 0:
        return np.zeros(0), np.zeros(0)
    energies = 20.0 * np.log10(np.linalg.norm(x_frames, axis=1) + _EPS)
    mask = energies > energies.max() - dyn_range
    x_frames, y_frames = x_frames[mask], y_frames[mask]
    if x_frames.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    out_len = (x_frames.shape[0] - 1) * hop + frame_len
    x_out, y_out = np.zeros(out_len), np.zeros(out_len)
    for i in range(x_frames.shape[0]):
        x_out[i * hop : i * hop + frame_len] += x_frames[i]
        y_out[i * hop : i * hop + frame_len] += y_frames[i]
    return x_out, y_out


def _stoi_band_envelopes(x):
    starts = range(0, x.size - _STOI_FRAME + 1, _STOI_HOP)
    w = np.hanning(_STOI_FRAME + 2)[1:-1]
    frames = np.array([w * x[i : i + _STOI_FRAME] for i in starts])
    spec = np.fft.rfft(frames, n=_STOI_NFFT, axis=1)
    obm = _third_octave_matrix(_STOI_FS, _STOI_NFFT, _STOI_BANDS, _STOI_MIN_FREQ)
    return np.sqrt((np.abs(spec) ** 2) @ obm.T)  # (frames, bands)


def stoi_score(ref_samples, test_samples, sample_rate: int) -> float:
    """Short-time objective intelligibility.

    Both signals are resampled to 10 kHz; silent reference frames are
    removed; one-third octave band envelopes over 384 ms segments are
    normalized, clipped at -15 dB SDR, and correlated with the reference.
    The mean band/segment correlation is returned (typically in [0, 1]).
    """
    ref = np.asarray(ref_samples, dtype=np.float64)
    test = np.asarray(test_samples, dtype=np.float64)
    if ref.shape != test.shape:
        raise ValueError(f"signal lengths differ: {ref.shape} vs {test.shape}")
    if sample_rate != _STOI_FS:
        from fractions import Fraction

        frac = Fraction(_STOI_FS, int(sample_rate))
        ref = resample_poly(ref, frac.numerator, frac.denominator)
        test = resample_poly(test, frac.numerator, frac.denominator)

    ref, test = _remove_silent_frames(ref, test, _STOI_DYN_RANGE, _STOI_FRAME, _STOI_HOP)
    if ref.size < _STOI_FRAME:
        raise InsufficientDataError("not enough active speech after silence removal")

    x = _stoi_band_envelopes(ref)
    y = _stoi_band_envelopes(test)
    if x.shape[0] < _STOI_SEG:
        raise InsufficientDataError(
            f"need at least {_STOI_SEG} active frames (384 ms), got {x.shape[0]}"
        )

    # Sliding 384 ms segments: (segments, bands, 30 frames).
    x_seg = np.array([x[m - _STOI_SEG : m].T for m in range(_STOI_SEG, x.shape[0] + 1)])
    y_seg = np.array([y[m - _STOI_SEG : m].T for m in range(_STOI_SEG, y.shape[0] + 1)])

    norm = np.linalg.norm(x_seg, axis=2, keepdims=True) / (
        np.linalg.norm(y_seg, axis=2, keepdims=True) + _EPS
    )
    clip_gain = 1.0 + 10.0 ** (-_STOI_BETA / 20.0)
    y_prime = np.minimum(y_seg * norm, x_seg * clip_gain)

    x_c = x_seg - x_seg.mean(axis=2, keepdims=True)
    y_c = y_prime - y_prime.mean(axis=2, keepdims=True)
    x_c /= np.linalg.norm(x_c, axis=2, keepdims=True) + _EPS
    y_c /= np.linalg.norm(y_c, axis=2, keepdims=True) + _EPS
    return float(np.sum(x_c * y_c) / (y_c.shape[0] * _STOI_BANDS))
