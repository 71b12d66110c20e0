"""Low bit rate speech codec built on an autoencoder spectral model.

Log-magnitude spectra of super-frames are compressed to a short latent
vector, quantized with analysis-by-synthesis split vector quantization at
2400 or 1200 bit/s, and resynthesized with Griffin-Lim phase estimation.
"""

from .bitstream import (EncodedFile, pack_indices, read_container, unpack_indices,
                        write_container)
from .codec import (MODE_1200, MODE_2400, CodecMode, assemble_superframes, decode_stream,
                    encode_stream, mode_for_rate, mode_for_tag, mode_tag)
from .dae import (DaeModel, TrainConfig, finetune_backprop, init_model, load_model,
                  loss_and_gradients, model_from_bytes, model_to_bytes, pretrain_rbm_stack,
                  reconstruction_loss, save_model)
from .dsp import (FrameConfig, FrameSequence, frame_signal, griffin_lim_invert, log_magnitude,
                  make_hamming_window, num_frames)
from .errors import ConfigError, FormatError, InsufficientDataError, TrainingDiverged
from .metrics import MetricReport, fwseg_snr, log_spectral_distortion, stoi_score
from .vq import (LbgConfig, SearchConfig, SplitCodebook, codebook_from_bytes,
                 codebook_to_bytes, dequantize, lloyd, load_codebook, nearest_codewords,
                 quantize_abs_svq, quantize_sq_binary, quantize_svq, save_codebook,
                 sq_dequantize, train_lbg)

__version__ = "0.1.0"
