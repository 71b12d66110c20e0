"""Why search the codebook through the decoder?

Three quantizers at the same bit budget, judged on the spectra they decode
back to:

  sq    one threshold bit per latent dimension (reconstruct 0.25 / 0.75)
  svq   nearest codeword per split, chosen in latent space (open loop)
  abs   keep the J nearest per split, decode every combination, keep the
        one with minimum log-spectral error (closed loop)

Run 02_autoencoder_and_codebooks.py first to produce the trained artifacts.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from synthetic import vowel_corpus

from deepvocoder import (FrameConfig, SearchConfig, assemble_superframes, dequantize,
                         frame_signal, load_codebook, load_model, log_magnitude,
                         log_spectral_distortion, quantize_abs_svq, quantize_sq_binary,
                         quantize_svq, sq_dequantize)

out_dir = pathlib.Path(__file__).parent / "output"
if not (out_dir / "tiny.dvae").exists():
    sys.exit("run 02_autoencoder_and_codebooks.py first")

cfg = FrameConfig()
model = load_model(out_dir / "tiny.dvae")
codebook = load_codebook(out_dir / "tiny.dvcb")
T = model.input_dim // cfg.n_bins
print(f"model {model.layer_dims}, codebook {codebook.D} splits x "
      f"{[s.shape[0] for s in codebook.splits]} codewords")

# fresh utterances the model never saw
test = vowel_corpus(6, duration=1.2, seed=999)

rows = {"sq": [], "svq": [], "abs(J=2)": [], "abs(J=3)": []}
for x in test:
    spectra = log_magnitude(frame_signal(x, cfg).frames, cfg)
    superframes = assemble_superframes(spectra, T)
    m = spectra.shape[0]
    decoded = {name: [] for name in rows}
    for y in superframes:
        z = model.encode(y)
        decoded["sq"].append(model.decode(sq_dequantize(quantize_sq_binary(z))))
        decoded["svq"].append(model.decode(dequantize(quantize_svq(z, codebook), codebook)))
        for j in (2, 3):
            idx, _ = quantize_abs_svq(y, z, codebook, model, SearchConfig(J=j))
            decoded[f"abs(J={j})"].append(model.decode(dequantize(idx, codebook)))
    for name, frames in decoded.items():
        got = np.vstack(frames).reshape(-1, cfg.n_bins)[:m]
        rows[name].append(log_spectral_distortion(spectra, got))

print("\nmean log-spectral distortion over held-out utterances (lower is better):")
for name, values in rows.items():
    print(f"  {name:9s} {np.mean(values):6.3f} dB")
print("\nthe closed loop can only help: the open-loop choice is always one of")
print("its candidates, and larger J searches a superset")
