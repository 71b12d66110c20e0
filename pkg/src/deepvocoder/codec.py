"""End-to-end pipeline: super-frame assembly, encode, and decode."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import bitstream
from .bitstream import EncodedFile
from .dae import DaeModel
from .dsp import FrameConfig, frame_signal, griffin_lim_invert, log_magnitude, num_frames
from .errors import ConfigError, FormatError
from .vq import SearchConfig, SplitCodebook, dequantize, quantize_abs_svq


@dataclass(frozen=True)
class CodecMode:
    """Fixed rate point: frames per super-frame, latent width, bit allocation."""

    rate: int
    T: int
    K: int
    D: int
    bits: tuple

    def __post_init__(self):
        if self.K % self.D != 0:
            raise ValueError("D must divide K")
        if len(self.bits) != self.D:
            raise ValueError("need one bit width per split")
        if sum(self.bits) % self.T != 0:
            raise ValueError("total bits must spread evenly over T frames")

    @property
    def total_bits(self) -> int:
        """Payload bits per super-frame."""
        return sum(self.bits)

    @property
    def bits_per_frame(self) -> int:
        return self.total_bits // self.T


MODE_2400 = CodecMode(rate=2400, T=2, K=72, D=6, bits=(12,) * 6)
MODE_1200 = CodecMode(rate=1200, T=3, K=54, D=6, bits=(9,) * 6)

_MODES = {0: MODE_2400, 1: MODE_1200}
_TAGS = {mode: tag for tag, mode in _MODES.items()}


def mode_for_rate(rate: int) -> CodecMode:
    for mode in _MODES.values():
        if mode.rate == rate:
            return mode
    raise ConfigError(f"unsupported rate {rate}; choose 2400 or 1200")


def mode_for_tag(tag: int) -> CodecMode:
    if tag not in _MODES:
        raise FormatError(f"unknown rate mode tag {tag}")
    return _MODES[tag]


def mode_tag(mode: CodecMode) -> int:
    if mode not in _TAGS:
        raise ConfigError(f"mode {mode.rate} bit/s has no container tag")
    return _TAGS[mode]


def assemble_superframes(frames, t: int) -> np.ndarray:
    """Concatenate T consecutive spectral frames into joint vectors.

    If the frame count is not a multiple of T, the final super-frame is
    filled by repeating the last frame; the decoder discards the surplus
    using the original frame count.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if t < 1:
        raise ValueError("T must be >= 1")
    if frames.shape[0] == 0:
        raise ValueError("no frames to assemble")
    m = frames.shape[0]
    remainder = m % t
    if remainder:
        fill = np.repeat(frames[-1:], t - remainder, axis=0)
        frames = np.vstack([frames, fill])
    return frames.reshape(-1, t * frames.shape[1])


def _check_setup(model: DaeModel, codebook: SplitCodebook, mode: CodecMode,
                 cfg: FrameConfig) -> None:
    want_in = cfg.n_bins * mode.T
    if model.input_dim != want_in:
        raise ConfigError(
            f"model input dim {model.input_dim} does not match mode "
            f"{mode.rate} bit/s ({want_in} = {cfg.n_bins}x{mode.T})"
        )
    if model.latent_dim != mode.K:
        raise ConfigError(f"model latent dim {model.latent_dim} != mode K {mode.K}")
    if codebook.K != mode.K or codebook.D != mode.D or codebook.bits != mode.bits:
        raise ConfigError(
            f"codebook geometry (K={codebook.K}, D={codebook.D}, bits={codebook.bits}) "
            f"does not match mode (K={mode.K}, D={mode.D}, bits={mode.bits})"
        )


def encode_stream(samples, model: DaeModel, codebook: SplitCodebook, mode: CodecMode,
                  search: SearchConfig = None, cfg: FrameConfig = None,
                  model_crc: int = 0, codebook_crc: int = 0) -> EncodedFile:
    """Encode a waveform into a "DVOC" container.

    Pipeline: frame, log-magnitude analysis, super-frame assembly, DAE
    encoding, closed-loop AbS split VQ against each super-frame's own
    spectra, then MSB-first index packing.
    """
    cfg = cfg or FrameConfig()
    search = search or SearchConfig()
    _check_setup(model, codebook, mode, cfg)

    seq = frame_signal(samples, cfg)
    spectra = log_magnitude(seq.frames, cfg)
    superframes = assemble_superframes(spectra, mode.T)
    tuples = []
    for y in superframes:
        z = model.encode(y)
        indices, _ = quantize_abs_svq(y, z, codebook, model, search)
        tuples.append(tuple(int(i) for i in indices))
    payload = bitstream.pack_indices(tuples, mode.bits)
    return EncodedFile(
        mode_tag=mode_tag(mode),
        sample_rate=cfg.sample_rate,
        original_len=seq.original_len,
        superframe_count=len(tuples),
        model_hash=model_crc,
        codebook_hash=codebook_crc,
        payload=payload,
    )


def decode_stream(enc: EncodedFile, model: DaeModel, codebook: SplitCodebook,
                  gl_iters: int = 100, cfg: FrameConfig = None,
                  model_crc: int = None, codebook_crc: int = None) -> np.ndarray:
    """Decode a container back to samples in [-1, 1].

    Hash mismatches against the supplied CRCs are warnings, not errors, so
    mixed model/codebook experiments remain possible.
    """
    cfg = cfg or FrameConfig()
    mode = mode_for_tag(enc.mode_tag)
    _check_setup(model, codebook, mode, cfg)
    if model_crc is not None and model_crc != enc.model_hash:
        warnings.warn(
            f"model hash {model_crc:#010x} does not match stream ({enc.model_hash:#010x})"
        )
    if codebook_crc is not None and codebook_crc != enc.codebook_hash:
        warnings.warn(
            f"codebook hash {codebook_crc:#010x} does not match stream ({enc.codebook_hash:#010x})"
        )

    tuples = bitstream.unpack_indices(enc.payload, enc.superframe_count, mode.bits)
    m = num_frames(enc.original_len, cfg)
    if enc.superframe_count * mode.T < m:
        raise FormatError(
            f"container holds {enc.superframe_count} super-frames but "
            f"{enc.original_len} samples span {m} frames"
        )
    latents = np.stack([dequantize(t, codebook) for t in tuples])
    frames = model.decode(latents).reshape(-1, cfg.n_bins)[:m]
    samples = griffin_lim_invert(frames, cfg, iters=gl_iters)
    return np.clip(samples[: enc.original_len], -1.0, 1.0)
