import numpy as np
import pytest

from rdsc.attacks import AttackConfig, attack_loss, eot_attack, fda_lite, pgd, run_attack
from rdsc.errors import InvalidConfig
from rdsc.image import to_batch
from rdsc.tensor import Tensor
from rdsc.transforms import TransformDescriptor


EPS = 8 / 255


def assert_in_ball(x_adv: np.ndarray, x: np.ndarray, eps: float) -> None:
    assert x_adv.shape == x.shape
    assert x_adv.dtype == np.float32
    assert np.all(np.abs(x_adv - x) <= np.float32(eps) + 1e-6)
    assert x_adv.min() >= 0 and x_adv.max() <= 1


def rate_of(model, pixels: np.ndarray) -> float:
    x = to_batch(pixels)
    return attack_loss(model, Tensor(x), x, 'rate').item()


@pytest.mark.parametrize('kind,target', [
    ('vanilla', 'rate'),
    ('vanilla', 'distortion'),
    ('vanilla', 'rd'),
    ('eot', 'rate'),
    ('fda', 'rate'),
])
def test_attacks_stay_in_the_ball(trained_codec, small_images, kind, target):
    x = small_images[0].pixels
    cfg = AttackConfig(epsilon=EPS, alpha=2 / 255, iters=3, target=target, eot_samples=2, kind=kind)
    assert_in_ball(run_attack(trained_codec, x, cfg), x, EPS)


def test_saturated_pixels_stay_in_range(trained_codec):
    x = np.zeros((32, 32, 3), dtype=np.float32)
    x[:, 16:] = 1
    x_adv = pgd(trained_codec, x, AttackConfig(epsilon=EPS, alpha=EPS, iters=2))
    assert_in_ball(x_adv, x, EPS)


def test_zero_epsilon_is_identity(trained_codec, small_images):
    x = small_images[1].pixels
    for kind in ('vanilla', 'eot', 'fda'):
        cfg = AttackConfig(epsilon=0, alpha=0, iters=5, eot_samples=3, kind=kind)
        assert np.array_equal(run_attack(trained_codec, x, cfg), x)


def test_eot_without_samples_is_pgd(trained_codec, small_images):
    x = small_images[2].pixels
    cfg = AttackConfig(epsilon=EPS, alpha=2 / 255, iters=3, eot_samples=0, kind='eot')
    assert np.array_equal(eot_attack(trained_codec, x, cfg), pgd(trained_codec, x, cfg))


def test_attacks_are_reproducible(trained_codec, small_images):
    x = small_images[3].pixels
    cfg = AttackConfig(epsilon=EPS, alpha=2 / 255, iters=2, eot_samples=2, seed=17, kind='eot')
    assert np.array_equal(eot_attack(trained_codec, x, cfg), eot_attack(trained_codec, x, cfg))


def test_attack_accepts_batches(trained_codec, small_images):
    x = to_batch(small_images[4].pixels)
    cfg = AttackConfig(epsilon=EPS, alpha=2 / 255, iters=2)
    x_adv = pgd(trained_codec, x, cfg)
    assert x_adv.shape == x.shape
    assert np.array_equal(x_adv[0].transpose(1, 2, 0), pgd(trained_codec, small_images[4].pixels, cfg))


def test_rate_attack_raises_the_rate(trained_codec, small_images):
    x = small_images[5].pixels
    x_adv = pgd(trained_codec, x, AttackConfig(epsilon=EPS, alpha=2 / 255, iters=10, target='rate'))
    assert rate_of(trained_codec, x_adv) > rate_of(trained_codec, x)


def test_attack_leaves_parameters_alone(trained_codec, small_images):
    before = trained_codec.model_id
    pgd(trained_codec, small_images[0].pixels, AttackConfig(epsilon=EPS, alpha=2 / 255, iters=2))
    assert all(p.requires_grad for p in trained_codec.parameters())
    trained_codec.invalidate()
    assert trained_codec.model_id == before


def test_rd_objective_combines_rate_and_distortion(trained_codec, small_images):
    x = to_batch(small_images[1].pixels)
    x_adv = np.clip(x + np.float32(0.02), 0, 1)
    desc = TransformDescriptor(dihedral=2, tx=3)
    rate = attack_loss(trained_codec, Tensor(x_adv), x, 'rate', desc).item()
    dist = attack_loss(trained_codec, Tensor(x_adv), x, 'distortion', desc).item()
    rd = attack_loss(trained_codec, Tensor(x_adv), x, 'rd', desc, lam=250.0).item()
    assert rd == pytest.approx(rate + 250.0 * dist, rel=1e-5)


def test_attack_loss_shape_mismatch(trained_codec):
    with pytest.raises(ValueError):
        attack_loss(trained_codec, Tensor(np.zeros((1, 3, 8, 8))), np.zeros((1, 3, 8, 12)), 'rate')


def test_fda_moves_the_input(trained_codec, small_images):
    x = small_images[0].pixels
    x_adv = fda_lite(trained_codec, x, AttackConfig(epsilon=EPS, alpha=2 / 255, iters=2, kind='fda'))
    assert_in_ball(x_adv, x, EPS)
    assert not np.array_equal(x_adv, x)


@pytest.mark.parametrize('kwargs', [
    dict(epsilon=1.5),
    dict(epsilon=0.01, alpha=0.02),
    dict(iters=0),
    dict(eot_samples=-1),
    dict(target='psnr'),
    dict(kind='cw'),
])
def test_invalid_attack_configs(kwargs):
    with pytest.raises(InvalidConfig):
        AttackConfig(**kwargs)


def test_attack_config_to_dict():
    d = AttackConfig(kind='eot', eot_samples=4).to_dict()
    assert d['kind'] == 'eot' and d['eot_samples'] == 4
    assert AttackConfig(**d) == AttackConfig(kind='eot', eot_samples=4)
