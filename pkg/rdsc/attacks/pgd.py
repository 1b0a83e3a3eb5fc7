import logging
from typing import Callable

import numpy as np

from rdsc.attacks.config import AttackConfig
from rdsc.attacks.losses import attack_loss, feature_disruption_loss
from rdsc.codec.losses import pad_to_stride
from rdsc.codec.model import CodecModel
from rdsc.errors import NonFiniteError
from rdsc.image import from_batch, to_batch
from rdsc.tensor import Tensor, backward, constant, scale
from rdsc.transforms import IDENTITY, sample


LOG = logging.getLogger(__name__)


# (x_adv leaf, step) -> objective value, gradients accumulated into x_adv.grad
GradStep = Callable[[Tensor, int], float]


def project(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(x, lo, hi).astype(np.float32)


def ball(x_clean: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of the l-inf epsilon ball around x_clean intersected with [0, 1]."""
    eps = np.float32(epsilon)
    return np.maximum(x_clean - eps, 0).astype(np.float32), np.minimum(x_clean + eps, 1).astype(np.float32)


def projected_ascent(model: CodecModel, x_clean: np.ndarray, cfg: AttackConfig, step_fn: GradStep) -> np.ndarray:
    """Signed gradient ascent from x_clean, projected after every step. Batches are 1xCxHxW."""
    x = x_clean.astype(np.float32, copy=True)
    if cfg.epsilon == 0:
        return x
    lo, hi = ball(x_clean, cfg.epsilon)
    alpha = np.float32(cfg.alpha)
    with model.frozen():
        for t in range(cfg.iters):
            xt = Tensor(x, requires_grad=True)
            value = step_fn(xt, t)
            g = xt.grad
            if g is None or not np.isfinite(g).all():
                raise NonFiniteError(f'attack gradient is not finite at step {t}')
            x = project(x + alpha * np.sign(g), lo, hi)
            LOG.debug('attack step', extra={'step': t, 'loss': value, 'epsilon': cfg.epsilon})
    return x


def _as_batch(pixels: np.ndarray) -> np.ndarray:
    return to_batch(pixels) if pixels.ndim == 3 else pixels.astype(np.float32)


def _like_input(batch: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    return from_batch(batch) if pixels.ndim == 3 else batch


def pgd(model: CodecModel, x_clean: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Attack an HxWxC image (or a 1xCxHxW batch) towards a larger codec objective."""
    xc = _as_batch(x_clean)

    def step(xt: Tensor, t: int) -> float:
        loss = attack_loss(model, xt, xc, cfg.target)
        backward(loss)
        return loss.item()

    return _like_input(projected_ascent(model, xc, cfg, step), x_clean)


def eot_attack(model: CodecModel, x_clean: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """PGD on the loss averaged over the identity and `eot_samples` random transforms.

    Transforms are drawn afresh at every step from an rng seeded with `cfg.seed`.
    """
    m = cfg.eot_samples
    if m == 0:
        return pgd(model, x_clean, cfg)

    xc = _as_batch(x_clean)
    rng = np.random.default_rng(cfg.seed)

    def step(xt: Tensor, t: int) -> float:
        total = 0.0
        for desc in [IDENTITY] + [sample(rng, exclude_identity=True) for _ in range(m)]:
            loss = scale(attack_loss(model, xt, xc, cfg.target, desc), 1 / (m + 1))
            backward(loss)
            total += loss.item()
        return total

    return _like_input(projected_ascent(model, xc, cfg, step), x_clean)


def fda_lite(model: CodecModel, x_clean: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Feature disruption: drive encoder activations away from their clean values and statistics."""
    xc = _as_batch(x_clean)
    clean_features = [f.data for f in model.encoder_features(pad_to_stride(constant(xc)))]

    def step(xt: Tensor, t: int) -> float:
        loss = feature_disruption_loss(model, pad_to_stride(xt), clean_features)
        backward(loss)
        return loss.item()

    return _like_input(projected_ascent(model, xc, cfg, step), x_clean)


def run_attack(model: CodecModel, x_clean: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    if cfg.kind == 'vanilla':
        return pgd(model, x_clean, cfg)
    if cfg.kind == 'eot':
        return eot_attack(model, x_clean, cfg)
    if cfg.kind == 'fda':
        return fda_lite(model, x_clean, cfg)
    raise ValueError(f'unknown attack kind - {cfg.kind}')
