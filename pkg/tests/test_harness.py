import json
import math
import os

import numpy as np
import PIL.Image
import pytest

from rdsc.attacks import AttackConfig
from rdsc.codec import RDRecord
from rdsc.errors import DatasetError, InvalidConfig
from rdsc.harness.config import ExperimentConfig, load_config, parse_config, parse_defense
from rdsc.harness.dataset import fit, ingest_dataset, read_image, write_image
from rdsc.harness.metrics import ExperimentMetricsCollector, ExperimentStats
from rdsc.harness.pool import map_ordered
from rdsc.harness.report import (
    Failure,
    Report,
    ReportRow,
    TimingRow,
    condition_label,
    emit_report,
    histograms_table,
    load_report,
    round_sig,
    summarize,
    summary_table,
)
from rdsc.harness.seeds import int_seed, rng_for
from rdsc.harness.synthetic import image_size, synthetic_corpus, synthetic_image
from rdsc.image import from_bytes, to_bytes


def test_config_defaults():
    config = parse_config({})
    assert config == ExperimentConfig()
    assert config.attacks == [AttackConfig()]
    assert 'workers' not in config.identity() and 'output_dir' not in config.identity()


def test_config_nested_attacks():
    config = parse_config({
        'name': 'eot-check',
        'attacks': [{'kind': 'eot', 'eot_samples': 4, 'epsilon': 0.03, 'alpha': 0.01}],
        'defenses': ['none', 'k_way:8'],
    })
    assert config.attacks == [AttackConfig(kind='eot', eot_samples=4, epsilon=0.03, alpha=0.01)]
    assert config.defenses == ['none', 'k_way:8']


def test_config_train_steps():
    assert parse_config({}).train_steps == 0
    config = parse_config({'train_steps': 25, 'train_epochs': 4})
    assert (config.train_epochs, config.train_steps) == (4, 25)


@pytest.mark.parametrize('data', [
    {'colour': 'red'},
    {'experiment': 'ablation'},
    {'defenses': ['k_way:0']},
    {'defenses': ['three_way']},
    {'presets': ['medium']},
    {'repeats': 0},
    {'seed': -1},
    {'name': 'a/b'},
    {'metrics': ['lpips']},
    {'attacks': [{'iters': 0}]},
    {'attacks': [{'kind': 'eot', 'bogus': 1}]},
    {'attacks': [{'epsilon': 0.01, 'alpha': 0.1}]},
    {'train_epochs': 1.5},
    {'train_steps': -1},
])
def test_invalid_configs(data):
    with pytest.raises(InvalidConfig):
        parse_config(data)


def test_load_config(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'name': 'x', 'repeats': 3}))
    assert parse_config(load_config(str(path))).repeats == 3
    path.write_text('[1, 2]')
    with pytest.raises(InvalidConfig):
        load_config(str(path))
    path.write_text('{"name": ')
    with pytest.raises(InvalidConfig):
        load_config(str(path))


@pytest.mark.parametrize('mode,parsed', [
    ('none', ('none', 1)),
    ('two_way', ('k_way', 2)),
    ('naive_random', ('naive_random', 1)),
    ('k_way:1', ('k_way', 1)),
    ('k_way:16', ('k_way', 16)),
])
def test_parse_defense(mode, parsed):
    assert parse_defense(mode) == parsed


@pytest.mark.parametrize('mode', ['k_way', 'k_way:', 'k_way:-2', 'k_way:x', 'random'])
def test_parse_bad_defense(mode):
    with pytest.raises(ValueError):
        parse_defense(mode)


def test_seed_streams():
    a = rng_for(3, 'defense', 'img-1', 0).integers(0, 1 << 30, 4)
    b = rng_for(3, 'defense', 'img-1', 0).integers(0, 1 << 30, 4)
    c = rng_for(3, 'defense', 'img-2', 0).integers(0, 1 << 30, 4)
    d = rng_for(4, 'defense', 'img-1', 0).integers(0, 1 << 30, 4)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()
    assert a.tolist() != d.tolist()
    assert 0 <= int_seed(0, 'attack', 7) < 1 << 32
    with pytest.raises(AssertionError):
        rng_for(0, -1)


def test_synthetic_corpus():
    images = synthetic_corpus(7)
    assert [img.id for img in images] == [f'synthetic-{i:03d}' for i in range(7)]
    assert images[5].dims == (128, 128) and images[0].dims == (64, 64)
    assert image_size(11) == 128
    again = synthetic_image(3)
    assert np.array_equal(again.pixels, images[3].pixels)
    for img in images:
        assert img.pixels.dtype == np.float32
        assert img.pixels.min() >= 0 and img.pixels.max() <= 1
        assert np.array_equal(from_bytes(to_bytes(img.pixels)), img.pixels)


def test_synthetic_png_round_trip(tmp_path):
    img = synthetic_image(1)
    path = str(tmp_path / 'one.png')
    write_image(path, img.pixels)
    assert np.array_equal(read_image(path), img.pixels)


def write_png(path, data: np.ndarray) -> None:
    PIL.Image.fromarray(data).save(path)


def test_ingest_directory(tmp_path):
    white = np.full((20, 24, 3), 255, dtype=np.uint8)
    gray = np.full((24, 20), 128, dtype=np.uint8)
    write_png(tmp_path / 'b.png', white)
    write_png(tmp_path / 'a.png', gray)
    (tmp_path / 'c.png').write_bytes(b'not an image')
    (tmp_path / 'notes.txt').write_text('ignored')

    ds = ingest_dataset(str(tmp_path))
    assert [img.id for img in ds.images] == ['a', 'b']
    assert ds.images[0].pixels.shape == (24, 20, 3)
    assert np.all(ds.images[1].pixels == 1.0)
    assert [s.file for s in ds.skipped] == ['c.png']

    sized = ingest_dataset(str(tmp_path), image_size=16)
    assert all(img.dims == (16, 16) for img in sized.images)


def test_ingest_errors(tmp_path):
    with pytest.raises(DatasetError):
        ingest_dataset(str(tmp_path))
    with pytest.raises(DatasetError):
        ingest_dataset(str(tmp_path / 'missing'))
    for bad in ('synthetic:0', 'synthetic:x', 'synthetic:'):
        with pytest.raises(DatasetError):
            ingest_dataset(bad)


def test_ingest_limit_is_a_sorted_subset():
    full = ingest_dataset('synthetic:10')
    a = ingest_dataset('synthetic:10', limit=4, split_seed=0)
    b = ingest_dataset('synthetic:10', limit=4, split_seed=0)
    ids = [img.id for img in a.images]
    assert ids == [img.id for img in b.images]
    assert ids == sorted(ids)
    assert set(ids) <= {img.id for img in full.images}
    assert len(ids) == 4


def test_fit_center_crops():
    px = np.zeros((40, 20, 3), dtype=np.float32)
    px[10:30] = 1
    out = fit(px, 20)
    assert out.shape == (20, 20, 3)
    assert np.all(out == 1)
    assert fit(synthetic_image(0).pixels, 32).shape == (32, 32, 3)


def square(ctx, x):
    return ctx * x * x


def test_map_ordered_inline():
    assert list(map_ordered(square, 2, [3, 1, 2])) == [18, 2, 8]
    assert list(map_ordered(square, 2, [])) == []


def test_metrics_collector():
    stats = ExperimentStats('defense')
    stats.condition = 'vanilla/two_way'
    stats.on_image(current_time=100.0)
    stats.on_image(failed=True, current_time=102.0)
    families = {m.name: m for m in ExperimentMetricsCollector(stats).collect()}
    assert families['rdsc_images_processed'].samples[0].value == 2
    assert families['rdsc_images_failed'].samples[0].value == 1
    assert families['rdsc_experiment'].samples[0].labels == {
        'experiment': 'defense',
        'condition': 'vanilla/two_way'
    }


def record(rate: float, dist: float, ssim: float = 0.9) -> RDRecord:
    return RDRecord(rate, dist, rate + 100 * dist, 10 * math.log10(1 / dist), ssim)


def sample_report() -> Report:
    rows = []
    timing = []
    for i, (clean, attacked) in enumerate([(0.5, 1.5), (0.7, 2.0), (0.6, 1.0)]):
        image = f'img-{i}'
        for attack, defense, eps, rate in (
            ('clean', 'none', 0.0, clean),
            ('vanilla', 'none', 0.0157, attacked),
            ('vanilla', 'two_way', 0.0157, min(clean, attacked) + 0.01),
        ):
            row = ReportRow.of(image, 'low', attack, defense, eps, record(rate, 0.001 * (i + 1)))
            rows.append(row)
            timing.append(TimingRow(image, 'low', row.condition, row.epsilon, 10.0 + i, 9.0))
    return Report(
        name='sample',
        experiment='defense',
        config=ExperimentConfig(name='sample', metrics=['bpp', 'rd_loss'], histogram_bins=4).identity(),
        rows=rows,
        timing=timing,
        failures=[Failure('img-9', 'low', 'ShapeError: bad')]
    )


def test_round_sig():
    assert round_sig(1 / 3) == 0.333333
    assert round_sig(123456789.0) == 123457000.0
    assert math.isnan(round_sig(float('nan')))
    assert round_sig(math.inf) == math.inf


def test_rows_are_rounded_when_created():
    row = ReportRow.of('a', 'low', 'clean', 'none', 4 / 255, record(1 / 3, 1 / 7000))
    assert row.condition == 'clean/none'
    assert row.bpp == 0.333333
    assert row.epsilon == 0.0156863
    assert ReportRow.of('a', 'low', 'clean', 'one_way', 0, record(1, 0.1), condition='shift').condition == 'shift'


def test_summary_table():
    table = summary_table(sample_report()).to_pylist()
    assert [r['condition'] for r in table] == ['clean/none', 'vanilla/none', 'vanilla/two_way']
    assert table[0]['images'] == 3
    assert table[0]['mean_bpp'] == pytest.approx(0.6)
    assert table[1]['median_bpp'] == pytest.approx(1.5)
    assert 'mean_psnr_db' not in table[0]


def test_summarize_groups_by_model_condition_epsilon():
    summaries = summarize(sample_report())
    assert [s.condition for s in summaries] == [
        'low:clean/none@0',
        'low:vanilla/none@0.0157',
        'low:vanilla/two_way@0.0157',
    ]
    assert summaries[1].mean('rate_bpp') == pytest.approx(1.5)
    assert summaries[0].aggregates['mean_encode_ms'] == pytest.approx(11.0)
    assert condition_label('high', 'eot/none', 8 / 255) == 'high:eot/none@0.0313725'


def test_histograms_share_ranges():
    table = histograms_table(sample_report()).to_pylist()
    bpp = [r for r in table if r['metric'] == 'bpp']
    assert {r['metric'] for r in table} == {'bpp', 'rd_loss'}
    assert len(bpp) == 3 * 4
    assert len({(r['lo'], r['hi']) for r in bpp if r['bin'] == 0}) == 1
    assert sum(r['count'] for r in bpp) == 9


def test_emit_report(tmp_path):
    report = sample_report()
    dest = emit_report(report, str(tmp_path))
    assert dest == str(tmp_path / 'sample')
    assert sorted(os.listdir(dest)) == [
        'histograms.csv',
        'report.csv',
        'report.json',
        'summary.csv',
        'timing.csv',
        'timing_summary.csv',
    ]
    with open(os.path.join(dest, 'report.csv')) as f:
        lines = f.read().splitlines()
    assert len(lines) == len(report.rows) + 1
    assert lines[0].replace('"', '') == (
        'image_id,model,condition,attack,defense,epsilon,bpp,distortion,psnr_db,ms_ssim,rd_loss'
    )

    data = json.loads((tmp_path / 'sample' / 'report.json').read_text())
    assert data['failures'] == [{'image_id': 'img-9', 'model': 'low', 'error': 'ShapeError: bad'}]
    assert len(data['summary']) == 3


def without_timing(aggregates: dict) -> dict:
    return {k: v for k, v in aggregates.items() if k != 'mean_encode_ms'}


def test_report_json_round_trip(tmp_path):
    report = sample_report()
    emit_report(report, str(tmp_path / 'first'))
    loaded = load_report(str(tmp_path / 'first' / 'sample' / 'report.json'))
    assert loaded.rows == report.rows
    assert loaded.config == report.config
    assert [without_timing(s.aggregates) for s in summarize(loaded)] == \
        [without_timing(s.aggregates) for s in summarize(report)]

    emit_report(loaded, str(tmp_path / 'second'))
    for name in ('report.csv', 'summary.csv', 'histograms.csv'):
        first = (tmp_path / 'first' / 'sample' / name).read_bytes()
        second = (tmp_path / 'second' / 'sample' / name).read_bytes()
        assert first == second, name


def test_report_nan_is_null(tmp_path):
    report = sample_report()
    report.rows[0] = report.rows[0]._replace(ms_ssim=float('nan'))
    dest = emit_report(report, str(tmp_path))
    data = json.loads(open(os.path.join(dest, 'report.json')).read())
    assert data['rows'][0]['ms_ssim'] is None
    assert math.isnan(load_report(os.path.join(dest, 'report.json')).rows[0].ms_ssim)


def test_emit_replaces_an_earlier_run(tmp_path):
    report = sample_report()
    emit_report(report, str(tmp_path))
    report.rows = report.rows[:3]
    report.timing = []
    dest = emit_report(report, str(tmp_path))
    assert 'timing.csv' not in os.listdir(dest)
    assert len(load_report(os.path.join(dest, 'report.json')).rows) == 3
    assert [n for n in os.listdir(tmp_path) if n.startswith('temp-')] == []


def test_failed_emit_keeps_the_earlier_run(tmp_path, monkeypatch):
    report = sample_report()
    dest = emit_report(report, str(tmp_path))
    before = (tmp_path / 'sample' / 'report.csv').read_bytes()

    def broken(_report):
        raise RuntimeError('summary failed')

    monkeypatch.setattr('rdsc.harness.report.summary_table', broken)
    report.rows = report.rows[:3]
    with pytest.raises(RuntimeError):
        emit_report(report, str(tmp_path))
    assert (tmp_path / 'sample' / 'report.csv').read_bytes() == before
    assert len(load_report(os.path.join(dest, 'report.json')).rows) == len(sample_report().rows)
    assert sorted(os.listdir(tmp_path)) == ['sample']


def test_empty_report_is_an_error(tmp_path):
    with pytest.raises(ValueError):
        emit_report(Report('empty', 'defense', {}), str(tmp_path))
