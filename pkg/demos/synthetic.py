"""Synthetic vowel-like signals shared by the demo scripts: harmonic stacks
shaped by formant resonances with syllable-rate amplitude modulation."""

import numpy as np


def synth_vowel(duration=1.0, sr=8000, f0=110.0,
                formants=((700.0, 80.0), (1200.0, 100.0), (2600.0, 120.0)),
                am_rate=3.0, noise=0.002, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration * sr))) / sr
    signal = np.zeros_like(t)
    k = 1
    while k * f0 < 0.95 * sr / 2:
        freq = k * f0
        gain = 0.05
        for center, width in formants:
            gain += np.exp(-0.5 * ((freq - center) / width) ** 2)
        signal += gain * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        k += 1
    signal *= 0.55 + 0.45 * np.sin(2 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi))
    signal += noise * rng.standard_normal(t.size)
    return 0.5 * signal / np.max(np.abs(signal))


def vowel_corpus(n_utterances, duration=1.2, sr=8000, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_utterances):
        f0 = rng.uniform(90.0, 220.0)
        formants = tuple(
            (rng.uniform(lo, hi), rng.uniform(60.0, 140.0))
            for lo, hi in ((300.0, 900.0), (900.0, 2000.0), (2000.0, 3400.0))
        )
        out.append(synth_vowel(duration, sr, f0, formants,
                               am_rate=rng.uniform(2.0, 5.0), seed=seed + 1000 + i))
    return out


def write_wav(path, samples, rate=8000):
    from scipy.io import wavfile

    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), rate, pcm)
