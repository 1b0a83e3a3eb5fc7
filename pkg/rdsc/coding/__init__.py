from .bitstream import (
    HEADER_SIZE,
    SLACK_BITS,
    Bitstream,
    Header,
    compress,
    decode_stream,
    decompress,
    encode_stream,
    make_header,
    measured_bpp,
    min_stream_bits,
)
from .pmf import LatentCode, PmfTable, build_pmf_table, quantize_pmf, to_latent_code
