from .losses import RDRecord, decode_image, encode_latent, rate_bits, rate_map, rd_loss, run_codec
from .model import STRIDE, CodecConfig, CodecModel, half_width, preset
