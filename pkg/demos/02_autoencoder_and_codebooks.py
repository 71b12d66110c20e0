"""Train the compression model at desk scale.

Pairs of consecutive spectra (super-frames, 258 values) are squeezed through
a sigmoid autoencoder down to 16 latent values in [0,1], then LBG codebooks
are grown over the latent corpus by binary splitting.  The trained artifacts
are saved in the portable DVAE / DVCB formats for the other demos.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from synthetic import vowel_corpus

from deepvocoder import (FrameConfig, LbgConfig, SplitCodebook, TrainConfig,
                         assemble_superframes, finetune_backprop, frame_signal, init_model,
                         log_magnitude, log_spectral_distortion, save_codebook, save_model,
                         train_lbg)

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

cfg = FrameConfig()
T, K, D, BITS = 2, 16, 2, (8, 8)

# --- corpus of joint log-magnitude spectra -----------------------------------
utterances = vowel_corpus(36, duration=1.2, seed=0)
data = np.vstack([
    assemble_superframes(log_magnitude(frame_signal(x, cfg).frames, cfg), T)
    for x in utterances
])
print(f"corpus: {data.shape[0]} super-frames of dim {data.shape[1]}")

# --- autoencoder -------------------------------------------------------------
feat_min, feat_max = data.min(axis=0), data.max(axis=0)
flat = feat_max - feat_min < 1e-6
feat_max[flat] = feat_min[flat] + 1e-6
model = init_model([258, 128, K, 128, 258], rng_seed=0,
                   feat_min=feat_min, feat_max=feat_max)
train = TrainConfig(minibatch=128, finetune_lr_initial=10.0, finetune_lr_decrement=0.0,
                    finetune_epochs=1200, finetune_momentum=0.9, rng_seed=0,
                    skip_pretrain=True)
model, trace = finetune_backprop(model, model.normalize(data), train)
print(f"fine-tuning loss: {trace[0]:.5f} -> {trace[-1]:.5f} over {trace.size} epochs")

recon = model.decode(model.encode(data))
lsd = log_spectral_distortion(data.reshape(-1, cfg.n_bins), recon.reshape(-1, cfg.n_bins))
print(f"unquantized reconstruction: {lsd:.2f} dB log-spectral distortion")

# --- LBG codebooks over the latents ------------------------------------------
latents = model.encode(data)
subdim = K // D
splits = []
for d in range(D):
    book = train_lbg(latents[:, d * subdim:(d + 1) * subdim], BITS[d], LbgConfig())
    splits.append(np.clip(book, 0.0, 1.0))  # reseeded cells may overshoot [0,1]
    print(f"split {d}: {book.shape[0]} codewords over dims "
          f"{d * subdim}..{(d + 1) * subdim - 1}")
codebook = SplitCodebook(splits, BITS)

save_model(model, out_dir / "tiny.dvae")
save_codebook(codebook, out_dir / "tiny.dvcb")
print(f"wrote {out_dir}/tiny.dvae and {out_dir}/tiny.dvcb")
