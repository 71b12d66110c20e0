"""Deep autoencoder over log-spectral super-frames.

The encoder half maps a normalized super-frame to a low-dimensional latent
vector in [0,1]^K; the decoder half maps it back.  Training is greedy CD-1
RBM pre-training followed by minibatch MSE backpropagation with classical
momentum.  Models serialize to a little-endian "DVAE" binary file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import FormatError, TrainingDiverged

SIGMOID = "sigmoid"
LINEAR = "linear"
_ACT_TO_TAG = {SIGMOID: 0, LINEAR: 1}
_TAG_TO_ACT = {v: k for k, v in _ACT_TO_TAG.items()}

MODEL_MAGIC = b"DVAE"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters for RBM pre-training and backprop fine-tuning."""

    minibatch: int = 512
    pretrain_lr: float = 1e-3
    pretrain_momentum: float = 0.99
    pretrain_epochs: int = 300
    finetune_lr_initial: float = 1e-3
    finetune_lr_decrement: float = 1e-4
    finetune_lr_floor: float = 1e-5
    finetune_momentum: float = 0.9
    finetune_epochs: int = 1000
    rng_seed: int = 0
    skip_pretrain: bool = False

    def __post_init__(self):
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if self.pretrain_lr <= 0 or self.finetune_lr_initial < 0:
            raise ValueError("learning rates must be positive")
        if not (0 <= self.pretrain_momentum < 1 and 0 <= self.finetune_momentum < 1):
            raise ValueError("momenta must lie in [0, 1)")

    def learning_rate(self, epoch: int) -> float:
        """Fine-tuning rate for an epoch: initial minus a per-epoch decrement,
        floored so long runs keep progressing (the floor never exceeds the
        initial rate, so a zero initial rate stays zero)."""
        floor = min(self.finetune_lr_floor, self.finetune_lr_initial)
        return max(self.finetune_lr_initial - epoch * self.finetune_lr_decrement, floor)


class DaeModel:
    """Palindromic multilayer autoencoder with per-dimension input normalization.

    weights[l] has shape (layer_dims[l+1], layer_dims[l]) so a batch forward
    step is x @ W.T + b.  The coding layer sits at the middle of layer_dims;
    with sigmoid activations its output is the latent vector in [0,1]^K.
    """

    def __init__(self, layer_dims, weights, biases, activations=None,
                 feat_min=None, feat_max=None):
        self.layer_dims = [int(d) for d in layer_dims]
        n = len(self.layer_dims)
        if n < 3 or n % 2 == 0:
            raise ValueError("layer_dims must have an odd length >= 3")
        if self.layer_dims != self.layer_dims[::-1]:
            raise ValueError(f"layer_dims must be palindromic, got {self.layer_dims}")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError("layer dimensions must be positive")
        if self.latent_dim >= self.input_dim:
            raise ValueError("coding layer must be narrower than the input")

        if activations is None:
            activations = [SIGMOID] * (n - 1)
        if len(activations) != n - 1 or any(a not in _ACT_TO_TAG for a in activations):
            raise ValueError("need one activation tag (sigmoid|linear) per weight layer")
        self.activations = list(activations)

        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        if len(self.weights) != n - 1 or len(self.biases) != n - 1:
            raise ValueError("need one weight matrix and bias per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != want:
                raise ValueError(f"weights[{l}] shape {w.shape} != {want}")
            if b.shape != (self.layer_dims[l + 1],):
                raise ValueError(f"biases[{l}] has wrong length")

        if feat_min is None:
            feat_min = np.zeros(self.input_dim)
        if feat_max is None:
            feat_max = np.ones(self.input_dim)
        self.feat_min = np.array(feat_min, dtype=np.float64)
        self.feat_max = np.array(feat_max, dtype=np.float64)
        if self.feat_min.shape != (self.input_dim,) or self.feat_max.shape != (self.input_dim,):
            raise ValueError("feat_min/feat_max must match the input dimension")
        if not np.all(self.feat_max > self.feat_min):
            raise ValueError("feat_max must exceed feat_min in every dimension")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def latent_dim(self) -> int:
        return self.layer_dims[self.coding_layer_index]

    @property
    def coding_layer_index(self) -> int:
        return len(self.layer_dims) // 2

    def _apply(self, x, layer):
        z = x @ self.weights[layer].T + self.biases[layer]
        return expit(z) if self.activations[layer] == SIGMOID else z

    def normalize(self, x):
        """Affine map of raw features onto [0,1] per dimension, clamped."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {x.shape[-1]}")
        span = self.feat_max - self.feat_min
        return np.clip((x - self.feat_min) / span, 0.0, 1.0)

    def denormalize(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {y.shape[-1]}")
        return self.feat_min + y * (self.feat_max - self.feat_min)

    def encode(self, x):
        """Raw super-frame(s) -> latent vector(s) in [0,1]^K."""
        a = self.normalize(x)
        for layer in range(self.coding_layer_index):
            a = self._apply(a, layer)
        return a

    def decode(self, z):
        """Latent vector(s) -> raw super-frame(s)."""
        a = np.asarray(z, dtype=np.float64)
        if a.shape[-1] != self.latent_dim:
            raise ValueError(f"expected {self.latent_dim} latent values, got {a.shape[-1]}")
        for layer in range(self.coding_layer_index, len(self.weights)):
            a = self._apply(a, layer)
        return self.denormalize(a)

    def forward_normalized(self, x):
        """Full normalized-domain pass: activations of every layer, input first."""
        acts = [np.asarray(x, dtype=np.float64)]
        for layer in range(len(self.weights)):
            acts.append(self._apply(acts[-1], layer))
        return acts


def init_model(layer_dims, rng_seed=0, feat_min=None, feat_max=None) -> DaeModel:
    """Seeded uniform init in [-a, a], a = sqrt(6/(fan_in+fan_out)), biases zero."""
    rng = np.random.default_rng(rng_seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DaeModel(layer_dims, weights, biases, feat_min=feat_min, feat_max=feat_max)


def pretrain_rbm_stack(dataset, cfg: TrainConfig, layer_dims,
                       feat_min=None, feat_max=None) -> DaeModel:
    """Greedy layer-wise CD-1 pre-training of the encoder stack.

    Bernoulli-Bernoulli RBMs are trained on [0,1] data treated as
    probabilities; each RBM's weights initialize one encoder layer and their
    transpose the mirrored decoder layer (hidden biases go to the encoder,
    visible biases to the decoder).  With cfg.skip_pretrain the model falls
    back to the seeded uniform init.

    Random draws come from a single generator seeded with cfg.rng_seed, in a
    fixed order: per-RBM weight init, then per epoch one shuffle permutation,
    then per minibatch one uniform array for hidden-state sampling.
    """
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("dataset must be a non-empty 2-D array")
    if data.shape[1] != layer_dims[0]:
        raise ValueError("dataset width must match the input layer")

    if cfg.skip_pretrain:
        return init_model(layer_dims, cfg.rng_seed, feat_min, feat_max)

    rng = np.random.default_rng(cfg.rng_seed)
    mid = len(layer_dims) // 2
    enc_weights, enc_biases, dec_biases = [], [], []
    for n_vis, n_hid in zip(layer_dims[:mid], layer_dims[1 : mid + 1]):
        w = 0.01 * rng.standard_normal((n_hid, n_vis))
        b_vis = np.zeros(n_vis)
        b_hid = np.zeros(n_hid)
        vel_w = np.zeros_like(w)
        vel_bv = np.zeros_like(b_vis)
        vel_bh = np.zeros_like(b_hid)
        for _epoch in range(cfg.pretrain_epochs):
            perm = rng.permutation(data.shape[0])
            for start in range(0, perm.size, cfg.minibatch):
                v0 = data[perm[start : start + cfg.minibatch]]
                h0 = expit(v0 @ w.T + b_hid)
                h_sample = (rng.random(h0.shape) < h0).astype(np.float64)
                v1 = expit(h_sample @ w + b_vis)
                h1 = expit(v1 @ w.T + b_hid)
                n = v0.shape[0]
                vel_w = cfg.pretrain_momentum * vel_w + cfg.pretrain_lr * (h0.T @ v0 - h1.T @ v1) / n
                vel_bv = cfg.pretrain_momentum * vel_bv + cfg.pretrain_lr * np.mean(v0 - v1, axis=0)
                vel_bh = cfg.pretrain_momentum * vel_bh + cfg.pretrain_lr * np.mean(h0 - h1, axis=0)
                w += vel_w
                b_vis += vel_bv
                b_hid += vel_bh
        enc_weights.append(w)
        enc_biases.append(b_hid)
        dec_biases.append(b_vis)
        data = expit(data @ w.T + b_hid)

    weights = enc_weights + [w.T.copy() for w in reversed(enc_weights)]
    biases = enc_biases + [b.copy() for b in reversed(dec_biases)]
    return DaeModel(layer_dims, weights, biases, feat_min=feat_min, feat_max=feat_max)


def reconstruction_loss(model: DaeModel, batch) -> float:
    """Mean squared error between normalized-domain input and network output."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    out = model.forward_normalized(x)[-1]
    return float(np.mean((out - x) ** 2))


def loss_and_gradients(model: DaeModel, batch):
    """MSE loss plus its gradients w.r.t. every weight matrix and bias."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    acts = model.forward_normalized(x)
    diff = acts[-1] - x
    loss = float(np.mean(diff ** 2))
    delta = (2.0 / diff.size) * diff
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for layer in reversed(range(len(model.weights))):
        a_out = acts[layer + 1]
        if model.activations[layer] == SIGMOID:
            delta = delta * a_out * (1.0 - a_out)
        grad_w[layer] = delta.T @ acts[layer]
        grad_b[layer] = delta.sum(axis=0)
        delta = delta @ model.weights[layer]
    return loss, grad_w, grad_b


def finetune_backprop(model: DaeModel, dataset, cfg: TrainConfig):
    """Minibatch gradient descent with classical momentum on normalized data.

    Updates the model in place and returns (model, per-epoch loss trace).
    Epoch losses are sample-weighted means of the minibatch losses seen
    during the epoch.  Raises TrainingDiverged if the loss goes non-finite.
    """
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("dataset must be a non-empty 2-D array")
    if data.shape[1] != model.input_dim:
        raise ValueError("dataset width must match the model input")

    rng = np.random.default_rng(cfg.rng_seed)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    trace = np.empty(cfg.finetune_epochs)
    n = data.shape[0]
    for epoch in range(cfg.finetune_epochs):
        lr = cfg.learning_rate(epoch)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.minibatch):
            batch = data[perm[start : start + cfg.minibatch]]
            loss, grad_w, grad_b = loss_and_gradients(model, batch)
            total += loss * batch.shape[0]
            for l in range(len(model.weights)):
                vel_w[l] = cfg.finetune_momentum * vel_w[l] - lr * grad_w[l]
                vel_b[l] = cfg.finetune_momentum * vel_b[l] - lr * grad_b[l]
                model.weights[l] += vel_w[l]
                model.biases[l] += vel_b[l]
        trace[epoch] = total / n
        if not np.isfinite(trace[epoch]):
            raise TrainingDiverged(epoch)
    return model, trace


def model_to_bytes(model: DaeModel) -> bytes:
    """Serialize to the "DVAE" binary format.

    Layout, all little-endian: magic "DVAE", version u8, layer count u8,
    layer dims u32[count], activation tags u8[count-1], feat_min and
    feat_max as f32[input_dim], then per layer the weight matrix (f32,
    row-major, rows = output units) followed by the bias vector (f32).
    Parameters are stored as 32-bit floats, so a model round-trips exactly
    once its values are 32-bit representable.
    """
    parts = [
        MODEL_MAGIC,
        struct.pack("<BB", MODEL_VERSION, len(model.layer_dims)),
        np.asarray(model.layer_dims, dtype="<u4").tobytes(),
        np.asarray([_ACT_TO_TAG[a] for a in model.activations], dtype="u1").tobytes(),
        np.asarray(model.feat_min, dtype="<f4").tobytes(),
        np.asarray(model.feat_max, dtype="<f4").tobytes(),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.asarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def save_model(model: DaeModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def model_from_bytes(blob: bytes) -> DaeModel:
    """Parse a "DVAE" blob; raises FormatError on any structural problem."""
    if len(blob) < 6:
        raise FormatError("model file truncated before header")
    if blob[:4] != MODEL_MAGIC:
        raise FormatError(f"bad model magic {blob[:4]!r}, expected {MODEL_MAGIC!r}")
    version, n_layers = struct.unpack_from("<BB", blob, 4)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    pos = 6
    need = 4 * n_layers + (n_layers - 1)
    if len(blob) < pos + need:
        raise FormatError("model file truncated in layer table")
    dims = np.frombuffer(blob, dtype="<u4", count=n_layers, offset=pos).tolist()
    pos += 4 * n_layers
    tags = np.frombuffer(blob, dtype="u1", count=n_layers - 1, offset=pos)
    pos += n_layers - 1
    if any(int(t) not in _TAG_TO_ACT for t in tags):
        raise FormatError("unknown activation tag in model file")
    activations = [_TAG_TO_ACT[int(t)] for t in tags]

    input_dim = dims[0]
    expected = pos + 4 * 2 * input_dim
    for lo, hi in zip(dims[:-1], dims[1:]):
        expected += 4 * (hi * lo + hi)
    if len(blob) != expected:
        raise FormatError(
            f"model payload length {len(blob)} does not match layer dims (expected {expected})"
        )

    def take(count, shape):
        nonlocal pos
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
        pos += 4 * count
        return arr.astype(np.float64).reshape(shape)

    feat_min = take(input_dim, (input_dim,))
    feat_max = take(input_dim, (input_dim,))
    weights, biases = [], []
    for lo, hi in zip(dims[:-1], dims[1:]):
        weights.append(take(hi * lo, (hi, lo)))
        biases.append(take(hi, (hi,)))
    try:
        return DaeModel(dims, weights, biases, activations, feat_min, feat_max)
    except ValueError as exc:
        raise FormatError(f"inconsistent model file: {exc}") from exc


def load_model(path) -> DaeModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
