import math
from typing import Literal, NamedTuple

import numpy as np

from rdsc.codec.model import STRIDE, CodecModel
from rdsc.errors import ShapeError
from rdsc.image import from_batch
from rdsc.tensor import (
    Tensor,
    add,
    clip,
    constant,
    crop2d,
    expand_channels,
    mse,
    pad2d,
    record,
    round_ste,
    scale,
    sigmoid64,
    sum,
)


Mode = Literal['train_noise', 'eval_round']


# every symbol costs at most 16 bits
PMF_FLOOR = 2.0 ** -16


class RDRecord(NamedTuple):
    rate_bpp: float
    distortion: float
    rd_loss: float
    psnr_db: float
    ms_ssim: float


def logistic_mass(v, mu, sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mass of the unit bin around v under Logistic(mu, sigma).

    Returns (p, u_hi, u_lo). The tail side is always evaluated through the
    sigmoid of negative arguments, so far-off bins keep full relative precision.
    """
    v = np.asarray(v, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    u_hi = (v + 0.5 - mu) / sigma
    u_lo = (v - 0.5 - mu) / sigma
    upper = sigmoid64(u_hi) - sigmoid64(u_lo)
    lower = sigmoid64(-u_lo) - sigmoid64(-u_hi)
    p = np.where(u_lo > 0, lower, upper)
    return p, u_hi, u_lo


def logistic_bits(v: Tensor, mu: Tensor, sigma: Tensor) -> Tensor:
    """Elementwise -log2 of the floored discretized-logistic mass, all three inputs of one shape."""
    if not (v.shape == mu.shape == sigma.shape):
        raise ShapeError(f'logistic_bits: {v.shape}, {mu.shape}, {sigma.shape}')
    p, u_hi, u_lo = logistic_mass(v.data, mu.data, sigma.data)
    floored = p <= PMF_FLOOR
    bits = -np.log2(np.maximum(p, PMF_FLOOR))

    def backward(g: np.ndarray):
        s = sigma.data.astype(np.float64)
        d_hi = sigmoid64(u_hi) * sigmoid64(-u_hi)
        d_lo = sigmoid64(u_lo) * sigmoid64(-u_lo)
        # d bits / d p, zero where the floor is active
        k = np.where(floored, 0.0, -1 / (np.maximum(p, PMF_FLOOR) * math.log(2)))
        dv = k * (d_hi - d_lo) / s
        dsigma = k * (u_lo * d_lo - u_hi * d_hi) / s
        g = g.astype(np.float64)
        return g * dv, -g * dv, g * dsigma

    return record('logistic_bits', bits, (v, mu, sigma), backward)


def check_padded(x: Tensor) -> None:
    if x.data.ndim != 4:
        raise ShapeError(f'expected an NxCxHxW batch, got {x.shape}')
    h, w = x.shape[2:]
    if h % STRIDE or w % STRIDE or h == 0 or w == 0:
        raise ShapeError(f'{h}x{w} input is not padded to a multiple of {STRIDE}')


def padded_dims(height: int, width: int) -> tuple[int, int]:
    return -(-height // STRIDE) * STRIDE, -(-width // STRIDE) * STRIDE


def pad_to_stride(x: Tensor) -> Tensor:
    """Zero pad bottom and right edges up to the encoder stride."""
    h, w = x.shape[-2:]
    ph, pw = padded_dims(h, w)
    if (ph, pw) == (h, w):
        return x
    return pad2d(x, 0, ph - h, 0, pw - w)


def encode_latent(
        model: CodecModel,
        x: Tensor,
        mode: Mode,
        rng: np.random.Generator | None = None
) -> tuple[Tensor, Tensor]:
    check_padded(x)
    y = model.encode(x)
    if mode == 'eval_round':
        return y, round_ste(y)
    if mode == 'train_noise':
        assert rng is not None, 'train_noise mode needs an rng'
        noise = rng.uniform(-0.5, 0.5, y.shape)
        return y, add(y, constant(noise))
    raise ValueError(f'unknown quantization mode - {mode}')


def rate_map(model: CodecModel, y_hat: Tensor) -> Tensor:
    """Bits spent on every latent element."""
    mu, sigma = model.entropy_params()
    return logistic_bits(
        y_hat,
        expand_channels(mu, y_hat.shape),
        expand_channels(sigma, y_hat.shape)
    )


def rate_bits(model: CodecModel, y_hat: Tensor) -> Tensor:
    return sum(rate_map(model, y_hat))


def decode_image(model: CodecModel, y_hat: Tensor, orig_dims: tuple[int, int]) -> Tensor:
    cy = model.config.cy
    if y_hat.data.ndim != 4 or y_hat.shape[1] != cy:
        raise ShapeError(f'latent of shape {y_hat.shape} does not fit a codec with {cy} latent channels')
    x_hat = clip(model.decode(y_hat), 0, 1)
    h, w = orig_dims
    if x_hat.shape[2] < h or x_hat.shape[3] < w:
        raise ShapeError(f'decoded canvas {x_hat.shape[2:]} is smaller than {h}x{w}')
    if x_hat.shape[2:] == (h, w):
        return x_hat
    return crop2d(x_hat, 0, 0, h, w)


class CodecPass(NamedTuple):
    y: Tensor
    y_hat: Tensor
    bits: Tensor
    x_hat: Tensor


def run_codec(
        model: CodecModel,
        x: Tensor,
        mode: Mode,
        rng: np.random.Generator | None = None
) -> CodecPass:
    """Full forward pass on an unpadded NxCxHxW batch; x_hat is cropped back to H x W."""
    orig_dims = x.shape[2], x.shape[3]
    y, y_hat = encode_latent(model, pad_to_stride(x), mode, rng)
    bits = rate_bits(model, y_hat)
    x_hat = decode_image(model, y_hat, orig_dims)
    return CodecPass(y, y_hat, bits, x_hat)


def rd_loss(
        model: CodecModel,
        x: Tensor,
        mode: Mode = 'eval_round',
        rng: np.random.Generator | None = None,
        lam: float | None = None,
        quality: bool = False
) -> tuple[RDRecord, Tensor]:
    lam = model.lam if lam is None else lam
    n, _, h, w = x.shape
    out = run_codec(model, x, mode, rng)
    rate = scale(out.bits, 1 / (n * h * w))
    dist = mse(x, out.x_hat)
    loss = add(rate, scale(dist, lam))
    rec = make_record(rate.item(), dist.item(), lam, x.data, out.x_hat.data, quality)
    return rec, loss


def make_record(
        rate_bpp: float,
        distortion: float,
        lam: float,
        x: np.ndarray,
        x_hat: np.ndarray,
        quality: bool = True
) -> RDRecord:
    from rdsc.metrics import PSNR_CAP, ms_ssim, psnr_from_mse
    psnr_db = min(psnr_from_mse(distortion), PSNR_CAP)
    if quality and x.shape[0] == 1:
        ssim = ms_ssim(from_batch(x), from_batch(x_hat))
    else:
        ssim = float('nan')
    return RDRecord(
        rate_bpp=rate_bpp,
        distortion=distortion,
        rd_loss=rate_bpp + lam * distortion,
        psnr_db=psnr_db,
        ms_ssim=ssim
    )
