"""Split vector quantization of latent vectors.

Covers LBG codebook training (binary splitting plus Lloyd iterations),
open-loop split VQ, the one-bit-per-dimension scalar quantization baseline,
and the closed-loop analysis-by-synthesis search that scores candidate
codewords by decoding them back to log-magnitude spectra.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError

CODEBOOK_MAGIC = b"DVCB"
CODEBOOK_VERSION = 1

# Cap on closed-loop candidate evaluations (J^D) per super-frame.
ABS_SEARCH_CAP = 10 ** 6


@dataclass
class SearchConfig:
    """Closed-loop search breadth: candidates retained per split."""

    J: int = 3

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")


@dataclass
class LbgConfig:
    """LBG training knobs.  The algorithm itself is deterministic (binary
    splitting from the global centroid); rng_seed is kept for interface
    stability but unused."""

    split_perturbation: float = 1e-3
    max_iters: int = 100
    rel_tol: float = 1e-5
    rng_seed: int = 0

    def __post_init__(self):
        if self.split_perturbation <= 0:
            raise ValueError("split_perturbation must be positive")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SplitCodebook:
    """D sub-codebooks over contiguous slices of the latent vector.

    splits[d] has shape (2**bits[d], K/D); entries live in [0,1] like the
    latent vectors they quantize.
    """

    splits: list
    bits: tuple

    def __post_init__(self):
        self.splits = [np.asarray(s, dtype=np.float64) for s in self.splits]
        self.bits = tuple(int(b) for b in self.bits)
        if len(self.splits) == 0 or len(self.splits) != len(self.bits):
            raise ValueError("need one bit width per sub-codebook")
        subdim = self.splits[0].shape[1]
        for d, (s, b) in enumerate(zip(self.splits, self.bits)):
            if s.ndim != 2 or s.shape != (1 << b, subdim):
                raise ValueError(
                    f"sub-codebook {d} must have shape {(1 << b, subdim)}, got {s.shape}"
                )
            if not np.all(np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0:
                raise ValueError(f"sub-codebook {d} entries must be finite and in [0,1]")

    @property
    def D(self) -> int:
        return len(self.splits)

    @property
    def K(self) -> int:
        return self.D * self.splits[0].shape[1]

    @property
    def subdim(self) -> int:
        return self.splits[0].shape[1]

    def split_vector(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.K,):
            raise ValueError(f"latent vector must have length {self.K}, got {z.shape}")
        return z.reshape(self.D, self.subdim)


def lloyd(vectors, codebook, cfg: LbgConfig):
    """Lloyd iterations from a given codebook.

    Returns (codebook, per-iteration mean distortion).  Distortion is
    measured after each assignment step and is non-increasing.  Cells left
    empty by an assignment are re-seeded from the most populated cell's
    centroid plus the split perturbation.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    codebook = np.array(codebook, dtype=np.float64)
    n_cells = codebook.shape[0]
    v_sq = (vectors ** 2).sum(axis=1)
    history = []
    prev = np.inf
    for _ in range(cfg.max_iters):
        # |v - c|^2 via the gram expansion keeps memory at (n, cells)
        d2 = v_sq[:, None] + (codebook ** 2).sum(axis=1) - 2.0 * (vectors @ codebook.T)
        np.maximum(d2, 0.0, out=d2)
        assign = np.argmin(d2, axis=1)
        dist = float(d2[np.arange(vectors.shape[0]), assign].mean())
        history.append(dist)

        counts = np.bincount(assign, minlength=n_cells)
        sums = np.zeros_like(codebook)
        np.add.at(sums, assign, vectors)
        occupied = counts > 0
        codebook[occupied] = sums[occupied] / counts[occupied, None]
        for cell in np.flatnonzero(~occupied):
            codebook[cell] = codebook[np.argmax(counts)] + cfg.split_perturbation

        if dist == 0.0 or (np.isfinite(prev) and prev > 0 and (prev - dist) / prev < cfg.rel_tol):
            break
        prev = dist
    return codebook, np.asarray(history)


def train_lbg(vectors, bits: int, cfg: LbgConfig = None) -> np.ndarray:
    """Binary-splitting LBG: grow a codebook of 2**bits codewords.

    Starts from the global centroid; each level doubles the codebook by
    perturbing every centroid by +/- split_perturbation, then runs Lloyd
    iterations to convergence.
    """
    cfg = cfg or LbgConfig()
    vectors = np.asarray(vectors, dtype=np.float64)
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if vectors.ndim != 2 or vectors.shape[0] < (1 << bits):
        raise ValueError(f"need at least {1 << bits} training vectors")

    codebook = vectors.mean(axis=0, keepdims=True)
    while codebook.shape[0] < (1 << bits):
        codebook = np.vstack([codebook + cfg.split_perturbation,
                              codebook - cfg.split_perturbation])
        codebook, _ = lloyd(vectors, codebook, cfg)
    return codebook


def nearest_codewords(subvec, sub_codebook, j: int) -> np.ndarray:
    """Indices of the J nearest codewords by squared Euclidean distance,
    ascending, ties broken toward the lower index."""
    if j < 1:
        raise ValueError("J must be >= 1")
    sub_codebook = np.asarray(sub_codebook, dtype=np.float64)
    if j > sub_codebook.shape[0]:
        raise ValueError(f"J={j} exceeds codebook size {sub_codebook.shape[0]}")
    d2 = ((sub_codebook - np.asarray(subvec, dtype=np.float64)) ** 2).sum(axis=1)
    return np.argsort(d2, kind="stable")[:j]


def quantize_svq(z, cb: SplitCodebook) -> np.ndarray:
    """Open-loop split VQ: per split, the nearest codeword in latent space."""
    subs = cb.split_vector(z)
    return np.array(
        [int(np.argmin(((cb.splits[d] - subs[d]) ** 2).sum(axis=1))) for d in range(cb.D)]
    )


def quantize_abs_svq(y_target, z, cb: SplitCodebook, model, search: SearchConfig = None):
    """Closed-loop analysis-by-synthesis split VQ.

    Keeps the J nearest sub-codewords per split, decodes every one of the
    J^D combinations back to a log-magnitude super-frame, and returns the
    combination whose reconstruction has minimum mean squared error against
    y_target, plus that distortion.  Combinations are scanned in
    lexicographic rank order, so ties resolve to the smallest rank tuple and
    J=1 reduces exactly to quantize_svq.
    """
    search = search or SearchConfig()
    y_target = np.asarray(y_target, dtype=np.float64)
    subs = cb.split_vector(z)
    j = search.J
    if j ** cb.D > ABS_SEARCH_CAP:
        raise ConfigError(f"J^D = {j}^{cb.D} exceeds the search cap {ABS_SEARCH_CAP}")

    candidates = [nearest_codewords(subs[d], cb.splits[d], j) for d in range(cb.D)]
    # (J^D, D) rank tuples; C-order ravel makes the rows lexicographic.
    ranks = np.indices((j,) * cb.D).reshape(cb.D, -1).T
    assembled = np.concatenate(
        [cb.splits[d][candidates[d][ranks[:, d]]] for d in range(cb.D)], axis=1
    )
    reconstructions = model.decode(assembled)
    distortions = np.mean((reconstructions - y_target) ** 2, axis=1)
    best = int(np.argmin(distortions))
    indices = np.array([int(candidates[d][ranks[best, d]]) for d in range(cb.D)])
    # Re-evaluate the winner alone: batched matmul rounding depends on the
    # batch shape, and the reported distortion must not.
    achieved = float(np.mean((model.decode(assembled[best]) - y_target) ** 2))
    return indices, achieved


def dequantize(indices, cb: SplitCodebook) -> np.ndarray:
    """Concatenate the selected codewords back into a latent vector."""
    indices = np.asarray(indices)
    if indices.shape != (cb.D,):
        raise ValueError(f"need {cb.D} indices, got {indices.shape}")
    parts = []
    for d, idx in enumerate(indices):
        if not 0 <= idx < (1 << cb.bits[d]):
            raise ValueError(f"index {idx} out of range for split {d}")
        parts.append(cb.splits[d][int(idx)])
    return np.concatenate(parts)


def quantize_sq_binary(z) -> np.ndarray:
    """One-bit scalar quantization: bit i = 1 iff z[i] >= 0.5."""
    z = np.asarray(z, dtype=np.float64)
    if z.min() < 0.0 or z.max() > 1.0:
        raise ValueError("latent values must lie in [0,1]")
    return (z >= 0.5).astype(np.uint8)


def sq_dequantize(bits) -> np.ndarray:
    """Inverse of the binary baseline: cell midpoints 0.25 / 0.75."""
    bits = np.asarray(bits)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    return 0.25 + 0.5 * bits.astype(np.float64)


def codebook_to_bytes(cb: SplitCodebook) -> bytes:
    """Serialize to the "DVCB" binary format: magic, version u8, K u16, D u8,
    bits u8[D], then the sub-codebooks as row-major little-endian f32."""
    parts = [CODEBOOK_MAGIC, struct.pack("<BHB", CODEBOOK_VERSION, cb.K, cb.D),
             bytes(cb.bits)]
    for split in cb.splits:
        parts.append(np.ascontiguousarray(split, dtype="<f4").tobytes())
    return b"".join(parts)


def save_codebook(cb: SplitCodebook, path) -> None:
    with open(path, "wb") as fh:
        fh.write(codebook_to_bytes(cb))


def codebook_from_bytes(blob: bytes) -> SplitCodebook:
    if len(blob) < 8:
        raise FormatError("codebook file truncated before header")
    if blob[:4] != CODEBOOK_MAGIC:
        raise FormatError(f"bad codebook magic {blob[:4]!r}, expected {CODEBOOK_MAGIC!r}")
    version, k, d = struct.unpack_from("<BHB", blob, 4)
    if version != CODEBOOK_VERSION:
        raise FormatError(f"unsupported codebook version {version}")
    pos = 8
    if len(blob) < pos + d:
        raise FormatError("codebook file truncated in bits table")
    bits = tuple(blob[pos : pos + d])
    pos += d
    if d == 0 or k % d != 0:
        raise FormatError(f"invalid codebook geometry K={k}, D={d}")
    subdim = k // d
    expected = pos + sum(4 * (1 << b) * subdim for b in bits)
    if len(blob) != expected:
        raise FormatError(
            f"codebook payload length {len(blob)} does not match header (expected {expected})"
        )
    splits = []
    for b in bits:
        count = (1 << b) * subdim
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
        splits.append(arr.astype(np.float64).reshape(1 << b, subdim))
        pos += 4 * count
    try:
        return SplitCodebook(splits, bits)
    except ValueError as exc:
        raise FormatError(f"inconsistent codebook file: {exc}") from exc


def load_codebook(path) -> SplitCodebook:
    with open(path, "rb") as fh:
        return codebook_from_bytes(fh.read())
