"""Randomized-transform compression with a safety net.

Every arm encodes a (possibly transformed) image through the real entropy coder
and is charged its measured bits plus lambda times the MSE of its reconstruction
against the original. The identity arm is always evaluated, so the selected arm
never does worse than plain compression. An arm whose smallest possible stream
already loses to the best arm so far is priced by that bound and not range coded.
"""
import logging
import math
import time
from typing import NamedTuple

import numpy as np
import psutil

from rdsc.codec.losses import RDRecord, decode_image, make_record, padded_dims, pad_to_stride
from rdsc.codec.model import CodecModel
from rdsc.coding import (
    Bitstream,
    Header,
    build_pmf_table,
    decompress,
    encode_stream,
    make_header,
    measured_bpp,
    min_stream_bits,
    to_latent_code,
)
from rdsc.errors import BitstreamError
from rdsc.image import from_batch, to_batch
from rdsc.tensor import Tensor, round_half_away
from rdsc.transforms import (
    IDENTITY,
    TransformDescriptor,
    apply,
    invert_tensor,
    sample,
    transformed_dims,
)


LOG = logging.getLogger(__name__)


class Arm(NamedTuple):
    desc: TransformDescriptor
    # None for an arm priced by its lower bound
    bitstream: Bitstream | None
    # HxWxC reconstruction in original geometry
    x_hat: np.ndarray
    distortion: float
    loss: float


class EncodeOutcome(NamedTuple):
    bitstream: Bitstream
    theta: int
    # rd loss of every arm in evaluation order, identity first; a lower bound for arms never coded
    losses: tuple[float, ...]
    chosen: int
    encode_ms: float
    cpu_ms: float
    record: RDRecord
    x_hat: np.ndarray


def reconstruct(model: CodecModel, symbols: np.ndarray, header: Header) -> np.ndarray:
    """Decoder side of every arm: integer latent -> HxWxC image of the original dims."""
    desc = TransformDescriptor.unpack(header.theta)
    orig = header.orig_dims
    dims = transformed_dims(desc, *orig)
    if padded_dims(*dims) != tuple(header.padded_dims):
        raise BitstreamError(
            f'padded dims {header.padded_dims} do not match {desc.describe()} applied to {orig}'
        )
    with model.frozen():
        y_hat = Tensor(symbols[None].astype(np.float32))
        x_hat = decode_image(model, y_hat, dims)
        if header.theta != 0:
            x_hat = invert_tensor(desc, x_hat, orig)
    return from_batch(x_hat.data)


def evaluate_arm(
        model: CodecModel,
        pixels: np.ndarray,
        desc: TransformDescriptor,
        lam: float | None = None,
        budget: float = math.inf
) -> Arm:
    """Encode and reconstruct one arm.

    The arm is range coded unless even its smallest possible stream gives a loss
    above `budget`, in which case that lower bound is returned as its loss.
    """
    lam = model.lam if lam is None else lam
    h, w = pixels.shape[:2]
    xt = pixels if desc.is_identity() else apply(desc, pixels)
    with model.frozen():
        y = model.encode(pad_to_stride(Tensor(to_batch(xt))))
    code = to_latent_code(round_half_away(y.data))
    header = make_header(
        model,
        code,
        orig_dims=(h, w),
        padded_dims=padded_dims(*xt.shape[:2]),
        theta=desc.pack()
    )
    x_hat = reconstruct(model, code.symbols, header)
    d = pixels.astype(np.float64) - x_hat.astype(np.float64)
    distortion = float(np.mean(d * d))

    table = build_pmf_table(model, header.symbol_range)
    bound = min_stream_bits(code, table) / (h * w) + lam * distortion
    if bound > budget:
        return Arm(desc=desc, bitstream=None, x_hat=x_hat, distortion=distortion, loss=bound)

    bs = encode_stream(code, table, header)
    return Arm(
        desc=desc,
        bitstream=bs,
        x_hat=x_hat,
        distortion=distortion,
        loss=measured_bpp(bs) + lam * distortion
    )


class EncodeClock:
    def __init__(self):
        self._proc = psutil.Process()
        self._wall = time.perf_counter()
        self._cpu = self._proc.cpu_times().user

    def elapsed(self) -> tuple[float, float]:
        return (
            (time.perf_counter() - self._wall) * 1000,
            (self._proc.cpu_times().user - self._cpu) * 1000
        )


def _outcome(pixels: np.ndarray, arms: list[Arm], chosen: int, clock: EncodeClock, lam: float) -> EncodeOutcome:
    encode_ms, cpu_ms = clock.elapsed()
    arm = arms[chosen]
    record = make_record(
        measured_bpp(arm.bitstream),
        arm.distortion,
        lam,
        to_batch(pixels),
        to_batch(arm.x_hat)
    )
    return EncodeOutcome(
        bitstream=arm.bitstream,
        theta=arm.bitstream.theta,
        losses=tuple(a.loss for a in arms),
        chosen=chosen,
        encode_ms=encode_ms,
        cpu_ms=cpu_ms,
        record=record,
        x_hat=arm.x_hat
    )


def encode_plain(model: CodecModel, pixels: np.ndarray, lam: float | None = None) -> EncodeOutcome:
    return encode_k_way(model, pixels, np.random.default_rng(0), 1, lam)


def encode_oneway_random(
        model: CodecModel,
        pixels: np.ndarray,
        rng: np.random.Generator,
        lam: float | None = None
) -> EncodeOutcome:
    """Always encode through one randomly drawn transform (identity included)."""
    lam = model.lam if lam is None else lam
    clock = EncodeClock()
    arm = evaluate_arm(model, pixels, sample(rng), lam)
    return _outcome(pixels, [arm], 0, clock, lam)


def encode_k_way(
        model: CodecModel,
        pixels: np.ndarray,
        rng: np.random.Generator,
        k: int,
        lam: float | None = None
) -> EncodeOutcome:
    """Identity plus k-1 sampled transforms, keep the arm with the lowest rd loss.

    Arms are drawn sequentially from `rng`, so the arms for k are a prefix of the arms for
    any larger k under the same seed. Ties go to the later (transformed) arm.
    """
    assert k >= 1, k
    lam = model.lam if lam is None else lam
    clock = EncodeClock()
    descs = [IDENTITY] + [sample(rng, exclude_identity=True) for _ in range(k - 1)]
    arms = []
    chosen = 0
    for i, desc in enumerate(descs):
        budget = arms[chosen].loss if arms else math.inf
        arm = evaluate_arm(model, pixels, desc, lam, budget)
        arms.append(arm)
        if arm.loss <= arms[chosen].loss:
            chosen = i
    LOG.debug('arms evaluated', extra={
        'losses': [a.loss for a in arms],
        'chosen': chosen,
        'coded': sum(a.bitstream is not None for a in arms),
        'theta': arms[chosen].bitstream.theta
    })
    return _outcome(pixels, arms, chosen, clock, lam)


def encode_two_way(
        model: CodecModel,
        pixels: np.ndarray,
        rng: np.random.Generator,
        lam: float | None = None
) -> EncodeOutcome:
    return encode_k_way(model, pixels, rng, 2, lam)


def decode_any(bs: Bitstream, model: CodecModel) -> np.ndarray:
    """Decode a bitstream of any encoding mode, undoing the recorded transform if there is one."""
    code = decompress(bs, model)
    return reconstruct(model, code.symbols, bs.header)
