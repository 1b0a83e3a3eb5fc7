import logging
import math
import time
from typing import Literal, NamedTuple, Sequence

import numpy as np

from rdsc.codec.losses import rd_loss, run_codec
from rdsc.codec.model import STRIDE, CodecModel
from rdsc.errors import DatasetError, NonFiniteError
from rdsc.image import Image
from rdsc.tensor import Tensor, backward, constant, scale
from rdsc.tensor.optim import Adam, AdamOptions
from rdsc.util.counters import Progress


LOG = logging.getLogger(__name__)


Adversarial = Literal['off', 'fgsm_random_init']


class TrainOptions(NamedTuple):
    epochs: int = 20
    lr: float = 1e-3
    # the entropy model gets its own optimizer
    entropy_lr: float = 1e-2
    # 0 means one pass over the images
    steps_per_epoch: int = 0
    # both learning rates drop tenfold for the epochs after this fraction
    decay_at: float = 0.8
    batch_size: int = 8
    crop: int = 32
    seed: int = 0
    adversarial: Adversarial = 'off'
    epsilon: float = 4 / 255


def random_start(x: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform point of the epsilon ball around x, clipped to [0, 1]."""
    noise = rng.uniform(-epsilon, epsilon, x.shape).astype(np.float32)
    return np.clip(np.clip(x + noise, x - epsilon, x + epsilon), 0, 1)


def fgsm_random_init(model: CodecModel, x: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """One sign step on the rate term from a random start, step 1.25 * epsilon."""
    x0 = Tensor(random_start(x, epsilon, rng), requires_grad=True)
    with model.frozen():
        out = run_codec(model, x0, 'eval_round')
        backward(scale(out.bits, 1 / x0.size))
    step = np.float32(1.25 * epsilon) * np.sign(x0.grad)
    return np.clip(np.clip(x0.data + step, x - epsilon, x + epsilon), 0, 1)


def _crop_size(images: Sequence[Image], crop: int) -> int:
    smallest = min(min(img.dims) for img in images)
    size = min(crop, smallest) // STRIDE * STRIDE
    if size < STRIDE:
        raise DatasetError(f'images must be at least {STRIDE}x{STRIDE}, smallest side is {smallest}')
    return size


def _sample_batch(images: Sequence[Image], order: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    crops = []
    for i in order:
        px = images[i].pixels
        top = int(rng.integers(0, px.shape[0] - size + 1))
        left = int(rng.integers(0, px.shape[1] - size + 1))
        crops.append(px[top:top + size, left:left + size].transpose(2, 0, 1))
    return np.stack(crops).astype(np.float32)


def split_parameters(model: CodecModel) -> tuple[list[Tensor], list[Tensor]]:
    """(transform parameters, entropy model parameters)"""
    main = [p for name, p in model.params.items() if not name.startswith('entropy.')]
    entropy = [p for name, p in model.params.items() if name.startswith('entropy.')]
    return main, entropy


def _batches(n: int, options: TrainOptions, rng: np.random.Generator) -> list[np.ndarray]:
    """Image indices of every step of one epoch, cycling through fresh permutations."""
    steps = options.steps_per_epoch or math.ceil(n / options.batch_size)
    need = steps * options.batch_size
    order = np.concatenate([rng.permutation(n) for _ in range(math.ceil(need / n))])
    if not options.steps_per_epoch:
        order = order[:n]
    return [order[beg:beg + options.batch_size] for beg in range(0, len(order), options.batch_size)][:steps]


def train(model: CodecModel, images: Sequence[Image], options: TrainOptions = TrainOptions()) -> CodecModel:
    if not images:
        raise DatasetError('no images to train on')

    rng = np.random.default_rng(options.seed)
    size = _crop_size(images, options.crop)
    main, entropy = split_parameters(model)
    optimizers = [
        Adam(main, AdamOptions(lr=options.lr)),
        Adam(entropy, AdamOptions(lr=options.entropy_lr))
    ]
    decay_epoch = math.ceil(options.epochs * options.decay_at)
    progress = Progress(window_size=10, window_granularity_seconds=1)
    progress.set_current_value(0)
    last_report = time.time()
    step = 0

    LOG.info('training codec', extra={
        'images': len(images),
        'epochs': options.epochs,
        'crop': size,
        'adversarial': options.adversarial,
        'lam': model.lam
    })

    for epoch in range(options.epochs):
        if epoch == decay_epoch and epoch > 0:
            for opt in optimizers:
                opt.options = opt.options._replace(lr=opt.options.lr / 10)
            LOG.debug('learning rate decayed', extra={'epoch': epoch})
        losses = []
        for batch in _batches(len(images), options, rng):
            x = _sample_batch(images, batch, size, rng)
            if options.adversarial == 'fgsm_random_init':
                x = np.concatenate([x, fgsm_random_init(model, x, options.epsilon, rng)])

            try:
                rec, loss = rd_loss(model, constant(x), 'train_noise', rng)
                if not math.isfinite(rec.rd_loss):
                    raise NonFiniteError('rate-distortion loss is not finite')
                for opt in optimizers:
                    opt.zero_grad()
                backward(loss)
                for opt in optimizers:
                    opt.step()
            except NonFiniteError as e:
                e.add_note(f'training diverged at epoch {epoch}, step {step}, lr {options.lr}')
                raise
            finally:
                model.invalidate()

            losses.append(rec.rd_loss)
            step += 1

            current_time = time.time()
            progress.set_current_value(step, current_time)
            if current_time - last_report > 5:
                LOG.info(f'step {step}, rd loss: {rec.rd_loss:.4f}, progress: {progress.speed():.2f} steps/sec')
                last_report = current_time

        LOG.debug('epoch done', extra={'epoch': epoch, 'rd_loss': float(np.mean(losses))})

    LOG.info('training finished', extra={'steps': step, 'model_id': f'{model.model_id:016x}'})
    return model
