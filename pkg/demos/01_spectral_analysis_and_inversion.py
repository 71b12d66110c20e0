"""Spectral front end walkthrough.

A waveform is sliced into Hamming-windowed 32 ms frames with a 15 ms shift,
each frame becomes a 129-point log-magnitude spectrum, and Griffin-Lim
iterations recover a waveform from the magnitudes alone (the phase is
discarded and re-estimated).  Watch the inconsistency measure fall.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from synthetic import synth_vowel, write_wav

from deepvocoder import FrameConfig, frame_signal, griffin_lim_invert, log_magnitude

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

cfg = FrameConfig()
print(f"framing: {cfg.frame_len} samples per frame, shift {cfg.frame_shift}, "
      f"{cfg.n_bins} spectral bins at {cfg.sample_rate} Hz")

# --- analyze a one-second vowel ---------------------------------------------
x = synth_vowel(duration=1.0, f0=150.0, seed=7)
frames = frame_signal(x, cfg)
spectra = log_magnitude(frames.frames, cfg)
print(f"analyzed {x.size} samples into {spectra.shape[0]} frames")
peak_bin = int(np.argmax(spectra.mean(axis=0)))
print(f"strongest average bin: {peak_bin} ({peak_bin * cfg.sample_rate / cfg.fft_size:.0f} Hz)")

# --- invert with Griffin-Lim -------------------------------------------------
for iters in (1, 5, 50):
    recon, trace = griffin_lim_invert(spectra, cfg, iters=iters, return_inconsistency=True)
    mags = np.exp(log_magnitude(frame_signal(recon, cfg).frames, cfg))
    err = np.linalg.norm(mags - np.exp(spectra)) / np.linalg.norm(np.exp(spectra))
    print(f"iters={iters:3d}  inconsistency {trace[-1]:10.4f}  relative spectral error {err:.4f}")

recon = griffin_lim_invert(spectra, cfg, iters=100)[: x.size]
write_wav(out_dir / "original.wav", x)
write_wav(out_dir / "griffin_lim.wav", np.clip(recon, -1, 1))
print(f"wrote {out_dir}/original.wav and {out_dir}/griffin_lim.wav")
