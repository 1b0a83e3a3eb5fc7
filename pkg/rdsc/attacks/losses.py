import numpy as np

from rdsc.attacks.config import Target
from rdsc.codec.losses import run_codec
from rdsc.codec.model import CodecModel
from rdsc.tensor import Tensor, add, center_spatial, constant, mean, mse, scale, square, sub
from rdsc.transforms import IDENTITY, TransformDescriptor, apply_tensor, invert_tensor


def attack_loss(
        model: CodecModel,
        x_adv: Tensor,
        x_clean: np.ndarray,
        target: Target,
        desc: TransformDescriptor = IDENTITY,
        lam: float | None = None
) -> Tensor:
    """Adversary's objective on a 1xCxHxW batch, optionally through a transform and its inverse.

    Rate is charged per source pixel, distortion is the per-pixel MSE against the clean image.
    """
    if x_adv.shape != x_clean.shape:
        raise ValueError(f'adversarial {x_adv.shape} and clean {x_clean.shape} shapes differ')
    lam = model.lam if lam is None else lam
    h, w = x_adv.shape[2:]
    out = run_codec(model, apply_tensor(desc, x_adv), 'eval_round')
    rate = scale(out.bits, 1 / (h * w))
    if target == 'rate':
        return rate
    x_hat = invert_tensor(desc, out.x_hat, (h, w))
    dist = mse(constant(x_clean), x_hat)
    if target == 'distortion':
        return dist
    if target == 'rd':
        return add(rate, scale(dist, lam))
    raise ValueError(f'unknown attack target - {target}')


def feature_disruption_loss(model: CodecModel, x_adv: Tensor, clean_features: list[np.ndarray]) -> Tensor:
    """Push every encoder feature map away from its clean value while flattening its spatial structure."""
    features = model.encoder_features(x_adv)
    assert len(features) == len(clean_features)
    total = None
    for f, clean in zip(features, clean_features):
        away = mean(square(sub(f, constant(clean))))
        structure = mean(square(center_spatial(f)))
        term = sub(away, structure)
        total = term if total is None else add(total, term)
    return total
