"""Spectral analysis front end: framing, log-magnitude spectra, Griffin-Lim inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floor for the squared-window overlap-add denominator.  With the default
# Hamming window (min 0.08) and full frame coverage it never activates.
_OLA_FLOOR = 1e-8


def make_hamming_window(length: int) -> np.ndarray:
    """Symmetric Hamming window, w[n] = 0.54 - 0.46*cos(2*pi*n/(L-1))."""
    if length < 2:
        raise ValueError(f"window length must be >= 2, got {length}")
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


@dataclass
class FrameConfig:
    """Framing and spectral-analysis constants shared by the whole codec.

    Defaults are 32 ms frames (256 samples) with a 15 ms shift (120 samples)
    at 8 kHz, analyzed with a 256-point FFT and a symmetric Hamming window.
    """

    sample_rate: int = 8000
    frame_len: int = 256
    frame_shift: int = 120
    fft_size: int = 256
    window: np.ndarray = None
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 1 <= self.frame_shift <= self.frame_len <= self.fft_size:
            raise ValueError(
                "need 1 <= frame_shift <= frame_len <= fft_size, got "
                f"shift={self.frame_shift} len={self.frame_len} fft={self.fft_size}"
            )
        if self.window is None:
            self.window = make_hamming_window(self.frame_len)
        self.window = np.asarray(self.window, dtype=np.float64)
        if self.window.shape != (self.frame_len,):
            raise ValueError("window length must equal frame_len")
        if not np.all(np.isfinite(self.window)):
            raise ValueError("window values must be finite")
        if np.any(self.window <= 0.0) or np.any(self.window > 1.0):
            raise ValueError("window values must lie in (0, 1]")
        if not self.log_floor > 0.0:
            raise ValueError("log_floor must be positive")

    @property
    def n_bins(self) -> int:
        """Number of retained spectral bins (fft_size/2 + 1)."""
        return self.fft_size // 2 + 1


@dataclass
class FrameSequence:
    """Windowed frames (M, frame_len) plus the pre-padding sample count."""

    frames: np.ndarray
    original_len: int


def num_frames(n_samples: int, cfg: FrameConfig) -> int:
    """Frame count M = ceil(max(n - L, 0) / R) + 1; the tail frame is zero-padded."""
    tail = max(n_samples - cfg.frame_len, 0)
    return -(-tail // cfg.frame_shift) + 1


def frame_signal(samples, cfg: FrameConfig) -> FrameSequence:
    """Slice a signal into overlapping windowed frames.

    Frame m covers samples [m*R, m*R + L); the signal is zero-padded so the
    final partial frame is kept rather than dropped.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-D array")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    m = num_frames(samples.size, cfg)
    padded = np.zeros((m - 1) * cfg.frame_shift + cfg.frame_len)
    padded[: samples.size] = samples
    offsets = cfg.frame_shift * np.arange(m)
    frames = padded[offsets[:, None] + np.arange(cfg.frame_len)] * cfg.window
    return FrameSequence(frames=frames, original_len=samples.size)


def log_magnitude(frame, cfg: FrameConfig) -> np.ndarray:
    """Natural-log magnitude spectrum of a frame (or a stack of frames).

    Frames shorter than fft_size are zero-padded; only the first
    fft_size/2 + 1 bins are kept, and magnitudes are floored at
    cfg.log_floor before the log.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > cfg.fft_size:
        raise ValueError("frame longer than fft_size")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame values must be finite")
    spectrum = np.fft.rfft(frame, n=cfg.fft_size, axis=-1)
    return np.log(np.maximum(np.abs(spectrum), cfg.log_floor))


def _overlap_add(time_frames: np.ndarray, cfg: FrameConfig, norm: np.ndarray) -> np.ndarray:
    m, _ = time_frames.shape
    out = np.zeros((m - 1) * cfg.frame_shift + cfg.frame_len)
    for i in range(m):
        start = i * cfg.frame_shift
        out[start : start + cfg.frame_len] += cfg.window * time_frames[i]
    return out / norm


def griffin_lim_invert(frames, cfg: FrameConfig, iters: int = 100,
                       return_inconsistency: bool = False):
    """Reconstruct a time signal from log-magnitude spectra by iterative
    phase estimation.

    Each iteration attaches the current phase to the target magnitudes,
    inverts every frame (the half spectrum is expanded to its conjugate-
    symmetric full spectrum), performs a least-squares overlap-add with
    squared-window normalization, then re-analyzes the result to update the
    phase.  The squared magnitude inconsistency sum((|STFT(x)| - A)^2) is
    non-increasing across iterations.

    Returns the signal of length (M-1)*R + L; with return_inconsistency=True
    also returns the per-iteration inconsistency values.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if frames.shape[1] != cfg.n_bins:
        raise ValueError(f"frames must have {cfg.n_bins} bins, got {frames.shape[1]}")
    if iters < 1:
        raise ValueError("iters must be >= 1")

    target = np.exp(frames)
    m = frames.shape[0]
    norm = np.zeros((m - 1) * cfg.frame_shift + cfg.frame_len)
    for i in range(m):
        start = i * cfg.frame_shift
        norm[start : start + cfg.frame_len] += cfg.window ** 2
    norm = np.maximum(norm, _OLA_FLOOR)

    phase = np.zeros_like(target)
    inconsistency = np.empty(iters)
    signal = None
    for it in range(iters):
        time_frames = np.fft.irfft(target * np.exp(1j * phase), n=cfg.fft_size, axis=1)
        signal = _overlap_add(time_frames[:, : cfg.frame_len], cfg, norm)
        spectra = np.fft.rfft(frame_signal(signal, cfg).frames, n=cfg.fft_size, axis=1)
        phase = np.angle(spectra)
        inconsistency[it] = np.sum((np.abs(spectra) - target) ** 2)

    if return_inconsistency:
        return signal, inconsistency
    return signal
