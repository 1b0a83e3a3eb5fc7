import math

import numpy as np
import pytest

from rdsc.codec import RDRecord
from rdsc.metrics import EvalSummary, histogram, ms_ssim, ms_ssim_scales, psnr, psnr_from_mse


def test_psnr_values():
    x = np.zeros((8, 8, 3), dtype=np.float32)
    assert psnr(x, x + np.float32(0.1)) == pytest.approx(20.0, abs=1e-4)
    assert psnr(x, x + np.float32(0.01)) == pytest.approx(40.0, abs=1e-3)
    assert psnr(x, x) == math.inf
    assert psnr_from_mse(0.0) == math.inf


def test_ms_ssim_of_identical_images(corpus):
    x = corpus[0].pixels
    assert ms_ssim(x, x) == pytest.approx(1.0, abs=1e-9)


def test_ms_ssim_is_symmetric_and_falls_with_noise(corpus):
    x = corpus[1].pixels
    rng = np.random.default_rng(0)
    slight = np.clip(x + rng.normal(0, 0.02, x.shape), 0, 1).astype(np.float32)
    heavy = np.clip(x + rng.normal(0, 0.2, x.shape), 0, 1).astype(np.float32)
    assert ms_ssim(x, slight) == pytest.approx(ms_ssim(slight, x), rel=1e-12)
    assert 1 > ms_ssim(x, slight) > ms_ssim(x, heavy) >= 0


@pytest.mark.parametrize('side,scales', [(10, 0), (11, 1), (21, 2), (64, 3), (128, 4), (161, 5), (256, 5)])
def test_ms_ssim_scales(side, scales):
    assert ms_ssim_scales(side, side + 7) == scales


def test_ms_ssim_rejects_tiny_images():
    x = np.zeros((8, 8, 3), dtype=np.float32)
    with pytest.raises(ValueError):
        ms_ssim(x, x)


def test_histogram():
    h = histogram([0.0, 0.1, 0.2, 0.9, 1.0], bins=2, value_range=(0, 1))
    assert h.counts.tolist() == [3, 2]
    assert h.edges.tolist() == [0, 0.5, 1]
    assert h.counts.sum() == 5


def record(rate: float, dist: float, lam: float = 100.0) -> RDRecord:
    return RDRecord(
        rate_bpp=rate,
        distortion=dist,
        rd_loss=rate + lam * dist,
        psnr_db=psnr_from_mse(dist),
        ms_ssim=0.9
    )


def test_eval_summary():
    s = EvalSummary('low:vanilla/none@0.0157')
    s.add('a', record(0.5, 0.001), 3.0)
    s.add('b', record(1.5, 0.003), 5.0)
    s.add('c', record(1.0, 0.002), 4.0)
    agg = s.aggregates
    assert len(s) == 3
    assert agg['mean_rate_bpp'] == pytest.approx(1.0)
    assert agg['median_rd_loss'] == pytest.approx(1.2)
    assert agg['mean_encode_ms'] == pytest.approx(4.0)
    assert s.mean('distortion') == pytest.approx(0.002)
    assert s.histogram('rate_bpp', bins=2).counts.tolist() == [1, 2]


def test_single_record_example():
    rec = record(0.5, 0.001)
    assert rec.rd_loss == pytest.approx(0.6)
    assert rec.psnr_db == pytest.approx(30.0)


def test_empty_summary_has_no_aggregates():
    with pytest.raises(AssertionError):
        EvalSummary('empty').aggregates
