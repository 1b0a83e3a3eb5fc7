"""Experiment drivers.

Each driver maps a per-image function over the dataset (inline or on a process pool)
and merges the per-image results in dataset order. Seeds of every random stream are
derived from the global seed and names only, see `rdsc.harness.seeds`.
"""
import dataclasses
import logging
import os
import time
from typing import Callable, NamedTuple

import numpy as np

from rdsc.attacks import AttackConfig, run_attack
from rdsc.codec import checkpoint
from rdsc.codec.losses import RDRecord, make_record
from rdsc.codec.model import CodecModel, preset
from rdsc.codec.train import TrainOptions, train
from rdsc.coding import measured_bpp
from rdsc.defense import (
    EncodeClock,
    EncodeOutcome,
    encode_k_way,
    encode_oneway_random,
    encode_plain,
    evaluate_arm,
)
from rdsc.harness.config import ExperimentConfig, parse_defense
from rdsc.harness.dataset import Dataset, ingest_dataset
from rdsc.harness.metrics import ExperimentStats
from rdsc.harness.pool import map_ordered
from rdsc.harness.report import Failure, Report, ReportRow, TimingRow
from rdsc.harness.seeds import int_seed, rng_for
from rdsc.image import Image, to_batch
from rdsc.transforms import TransformDescriptor, apply_study, invert_study, sample_study
from rdsc.transforms.descriptor import SHIFT_STEPS, STRETCH_STEPS


LOG = logging.getLogger(__name__)


class Variant(NamedTuple):
    name: str
    model: CodecModel


class ExperimentContext(NamedTuple):
    config: ExperimentConfig
    variants: list[Variant]
    # adversarially fine-tuned counterpart of the first variant
    advt: CodecModel | None = None


class ImageResult(NamedTuple):
    rows: list[ReportRow]
    timing: list[TimingRow]
    failures: list[Failure]


def load_dataset(config: ExperimentConfig) -> Dataset:
    return ingest_dataset(config.dataset, config.image_size, config.split_seed, config.limit)


def _train_preset(name: str, images: list[Image], config: ExperimentConfig) -> CodecModel:
    model = CodecModel.create(preset(name), rng_for(config.seed, 'init', name))
    options = TrainOptions(
        epochs=config.train_epochs,
        steps_per_epoch=config.train_steps,
        seed=int_seed(config.seed, 'train', name)
    )
    return train(model, images, options)


def build_context(config: ExperimentConfig, images: list[Image]) -> ExperimentContext:
    if config.checkpoints:
        variants = [
            Variant(os.path.splitext(os.path.basename(path))[0], checkpoint.load(path))
            for path in config.checkpoints
        ]
    else:
        variants = [Variant(name, _train_preset(name, images, config)) for name in config.presets]

    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise ValueError(f'model variant names must be unique, got {names}')

    advt = None
    if config.advt_checkpoint:
        advt = checkpoint.load(config.advt_checkpoint)
    elif config.advt_train and config.experiment == 'defense':
        advt = checkpoint.loads(checkpoint.dumps(variants[0].model))
        options = TrainOptions(
            epochs=config.train_epochs,
            steps_per_epoch=config.train_steps,
            seed=int_seed(config.seed, 'train', 'advt'),
            adversarial='fgsm_random_init',
            epsilon=max(a.epsilon for a in config.attacks) if config.attacks else TrainOptions().epsilon
        )
        train(advt, images, options)

    for v in variants:
        LOG.info(f'model variant {v.name}', extra={
            'model_id': f'{v.model.model_id:016x}',
            'params': v.model.parameter_count(),
            'lam': v.model.lam
        })
    return ExperimentContext(config, variants, advt)


def attack_labels(attacks: list[AttackConfig]) -> list[str]:
    labels = []
    for i, a in enumerate(attacks):
        label = a.kind if a.target == 'rate' else f'{a.kind}-{a.target}'
        if label in labels:
            label = f'{label}#{i}'
        labels.append(label)
    return labels


def _attack_for(config: ExperimentConfig, attack: AttackConfig, image_id: str, label: str, **changes) -> AttackConfig:
    seed = int_seed(config.seed, 'attack', attack.seed, label, image_id)
    return dataclasses.replace(attack, seed=seed, **changes)


def _lam(config: ExperimentConfig, model: CodecModel) -> float:
    return model.lam if config.lam is None else config.lam


def _mean_record(records: list[RDRecord]) -> RDRecord:
    return RDRecord(*(float(v) for v in np.mean(np.array(records, dtype=np.float64), axis=0)))


def _timing(image_id: str, model: str, row: ReportRow, encode_ms: float, cpu_ms: float) -> TimingRow:
    return TimingRow(image_id, model, row.condition, row.epsilon, encode_ms, cpu_ms)


def _for_each_variant(
        ctx: ExperimentContext,
        image: Image,
        fn: Callable[[Variant, list[ReportRow], list[TimingRow]], None]
) -> ImageResult:
    """Run `fn` per model variant. A failing variant contributes no rows for this image."""
    rows: list[ReportRow] = []
    timing: list[TimingRow] = []
    failures: list[Failure] = []
    for variant in ctx.variants:
        r: list[ReportRow] = []
        t: list[TimingRow] = []
        try:
            fn(variant, r, t)
        except Exception as ex:
            ex.add_note(f'image: {image.id}, model: {variant.name}')
            LOG.error('failed to process image', exc_info=ex, extra={'image': image.id, 'model': variant.name})
            failures.append(Failure(image.id, variant.name, f'{type(ex).__name__}: {ex}'))
            continue
        rows.extend(r)
        timing.extend(t)
    return ImageResult(rows, timing, failures)


def _clean_row(model: CodecModel, name: str, image: Image, lam: float, rows: list, timing: list) -> EncodeOutcome:
    out = encode_plain(model, image.pixels, lam)
    row = ReportRow.of(image.id, name, 'clean', 'none', 0.0, out.record)
    rows.append(row)
    timing.append(_timing(image.id, name, row, out.encode_ms, out.cpu_ms))
    return out


def sweep_image(ctx: ExperimentContext, image: Image) -> ImageResult:
    config = ctx.config
    labels = attack_labels(config.attacks)

    def run(variant: Variant, rows: list[ReportRow], timing: list[TimingRow]) -> None:
        model = variant.model
        lam = _lam(config, model)
        _clean_row(model, variant.name, image, lam, rows, timing)
        for attack, label in zip(config.attacks, labels):
            for eps in config.epsilons or [attack.epsilon]:
                if config.epsilons:
                    cfg = _attack_for(config, attack, image.id, label, epsilon=eps, alpha=eps * config.alpha_ratio)
                else:
                    cfg = _attack_for(config, attack, image.id, label)
                x_adv = run_attack(model, image.pixels, cfg)
                out = encode_plain(model, x_adv, lam)
                row = ReportRow.of(image.id, variant.name, label, 'none', cfg.epsilon, out.record)
                rows.append(row)
                timing.append(_timing(image.id, variant.name, row, out.encode_ms, out.cpu_ms))
                LOG.debug('attacked', extra={
                    'image': image.id,
                    'model': variant.name,
                    'attack': label,
                    'epsilon': cfg.epsilon,
                    'bpp': out.record.rate_bpp
                })

    return _for_each_variant(ctx, image, run)


def defended_encode(
        model: CodecModel,
        pixels: np.ndarray,
        mode: str,
        repeats: int,
        seed: int,
        *keys: str | int,
        lam: float | None = None
) -> tuple[RDRecord, float, float]:
    """Encode under a defense mode -> (record, mean encode ms, mean cpu ms).

    Stochastic modes are repeated with per-repeat streams and averaged. The arm stream of
    `k_way` does not depend on K, so arms of a smaller K are a prefix of a larger one.
    """
    kind, k = parse_defense(mode)
    if kind == 'none' or (kind == 'k_way' and k == 1):
        out = encode_plain(model, pixels, lam)
        return out.record, out.encode_ms, out.cpu_ms

    outcomes = []
    for r in range(repeats):
        if kind == 'naive_random':
            out = encode_oneway_random(model, pixels, rng_for(seed, 'naive', *keys, r), lam)
        else:
            out = encode_k_way(model, pixels, rng_for(seed, 'arms', *keys, r), k, lam)
        outcomes.append(out)
    return (
        _mean_record([o.record for o in outcomes]),
        float(np.mean([o.encode_ms for o in outcomes])),
        float(np.mean([o.cpu_ms for o in outcomes]))
    )


def defense_image(ctx: ExperimentContext, image: Image) -> ImageResult:
    config = ctx.config
    labels = attack_labels(config.attacks)

    def run(variant: Variant, rows: list[ReportRow], timing: list[TimingRow]) -> None:
        model = variant.model
        lam = _lam(config, model)
        inputs = [('clean', image.pixels, 0.0)]
        for attack, label in zip(config.attacks, labels):
            cfg = _attack_for(config, attack, image.id, label)
            inputs.append((label, run_attack(model, image.pixels, cfg), cfg.epsilon))

        for label, pixels, eps in inputs:
            for mode in config.defenses:
                record, encode_ms, cpu_ms = defended_encode(
                    model,
                    pixels,
                    mode,
                    config.repeats,
                    config.seed,
                    variant.name,
                    image.id,
                    label,
                    lam=lam
                )
                row = ReportRow.of(image.id, variant.name, label, mode, eps, record)
                rows.append(row)
                timing.append(_timing(image.id, variant.name, row, encode_ms, cpu_ms))

        if ctx.advt is not None and variant is ctx.variants[0]:
            _advt_rows(ctx, image, lam, labels, rows, timing)

    return _for_each_variant(ctx, image, run)


def _advt_rows(
        ctx: ExperimentContext,
        image: Image,
        lam: float,
        labels: list[str],
        rows: list[ReportRow],
        timing: list[TimingRow]
) -> None:
    """Adversarially fine-tuned model, no defense, clean and vanilla attacked inputs"""
    config = ctx.config
    model = ctx.advt
    _clean_row(model, 'advt', image, lam, rows, timing)
    for attack, label in zip(config.attacks, labels):
        if attack.kind != 'vanilla':
            continue
        x_adv = run_attack(model, image.pixels, _attack_for(config, attack, image.id, label))
        out = encode_plain(model, x_adv, lam)
        row = ReportRow.of(image.id, 'advt', label, 'none', attack.epsilon, out.record)
        rows.append(row)
        timing.append(_timing(image.id, 'advt', row, out.encode_ms, out.cpu_ms))


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def study_descriptor(family: str, rng: np.random.Generator) -> TransformDescriptor:
    if family == 'shift':
        tx, ty = rng.integers(0, SHIFT_STEPS, 2)
        return TransformDescriptor(tx=int(tx), ty=int(ty))
    if family == 'stretch':
        sx, sy = rng.integers(0, STRETCH_STEPS, 2)
        return TransformDescriptor(sx=int(sx), sy=int(sy))
    raise ValueError(f'{family} is not a descriptor family')


def study_image(ctx: ExperimentContext, image: Image) -> ImageResult:
    """Clean image encoded one-way through one sampled transform per family, against plain encoding."""
    config = ctx.config
    h, w = image.dims

    def run(variant: Variant, rows: list[ReportRow], timing: list[TimingRow]) -> None:
        model = variant.model
        lam = _lam(config, model)
        out = encode_plain(model, image.pixels, lam)
        row = ReportRow.of(image.id, variant.name, 'clean', 'none', 0.0, out.record, condition='plain')
        rows.append(row)
        timing.append(_timing(image.id, variant.name, row, out.encode_ms, out.cpu_ms))

        for family in config.study_families:
            rng = rng_for(config.seed, 'study', family, image.id)
            clock = EncodeClock()
            if family in ('shift', 'stretch'):
                arm = evaluate_arm(model, image.pixels, study_descriptor(family, rng), lam)
                bpp = measured_bpp(arm.bitstream)
                x_hat = arm.x_hat
            else:
                t = sample_study(family, rng)
                encoded = encode_plain(model, apply_study(t, image.pixels), lam)
                bpp = measured_bpp(encoded.bitstream, (h, w))
                x_hat = invert_study(t, encoded.x_hat)
            encode_ms, cpu_ms = clock.elapsed()
            record = make_record(bpp, _mse(image.pixels, x_hat), lam, to_batch(image.pixels), to_batch(x_hat))
            row = ReportRow.of(image.id, variant.name, 'clean', 'one_way', 0.0, record, condition=family)
            rows.append(row)
            timing.append(_timing(image.id, variant.name, row, encode_ms, cpu_ms))

    return _for_each_variant(ctx, image, run)


IMAGE_FUNCTIONS: dict[str, Callable[[ExperimentContext, Image], ImageResult]] = {
    'sweep': sweep_image,
    'defense': defense_image,
    'study': study_image,
}


def _drive(
        ctx: ExperimentContext,
        dataset: Dataset,
        stats: ExperimentStats | None = None
) -> Report:
    config = ctx.config
    fn = IMAGE_FUNCTIONS[config.experiment]
    stats = stats or ExperimentStats(config.experiment)
    report = Report(
        name=config.name,
        experiment=config.experiment,
        config=config.identity(),
        skipped=list(dataset.skipped)
    )

    LOG.info(f'running {config.experiment} experiment {config.name}', extra={
        'images': len(dataset.images),
        'variants': [v.name for v in ctx.variants],
        'workers': config.workers
    })

    last_report = time.time()
    for result in map_ordered(fn, ctx, dataset.images, config.workers):
        report.rows.extend(result.rows)
        report.timing.extend(result.timing)
        report.failures.extend(result.failures)

        current_time = time.time()
        if result.rows:
            stats.condition = result.rows[-1].condition
        stats.on_image(failed=bool(result.failures), current_time=current_time)
        if current_time - last_report > 5:
            LOG.info(
                f'{stats.processed}/{len(dataset.images)} images, '
                f'progress: {stats.speed():.2f} images/sec'
            )
            last_report = current_time

    LOG.info(f'{config.experiment} experiment finished', extra={
        'rows': len(report.rows),
        'failures': len(report.failures)
    })
    return report


def _prepare(
        config: ExperimentConfig,
        dataset: Dataset | None,
        ctx: ExperimentContext | None
) -> tuple[ExperimentContext, Dataset]:
    dataset = dataset or load_dataset(config)
    if ctx is None:
        ctx = build_context(config, dataset.images)
    elif ctx.config is not config:
        ctx = ctx._replace(config=config)
    return ctx, dataset


def run_vulnerability_sweep(
        config: ExperimentConfig,
        dataset: Dataset | None = None,
        ctx: ExperimentContext | None = None,
        stats: ExperimentStats | None = None
) -> Report:
    """Clean and attacked rate-distortion points per model variant and epsilon."""
    ctx, dataset = _prepare(dataclasses.replace(config, experiment='sweep'), dataset, ctx)
    return _drive(ctx, dataset, stats)


def run_defense_eval(
        config: ExperimentConfig,
        dataset: Dataset | None = None,
        ctx: ExperimentContext | None = None,
        stats: ExperimentStats | None = None
) -> Report:
    """Clean and attacked inputs under every configured defense mode."""
    ctx, dataset = _prepare(dataclasses.replace(config, experiment='defense'), dataset, ctx)
    return _drive(ctx, dataset, stats)


def run_transform_study(
        config: ExperimentConfig,
        dataset: Dataset | None = None,
        ctx: ExperimentContext | None = None,
        stats: ExperimentStats | None = None
) -> Report:
    """How much plain one-way randomization costs on clean images."""
    ctx, dataset = _prepare(dataclasses.replace(config, experiment='study'), dataset, ctx)
    return _drive(ctx, dataset, stats)


RUNNERS = {
    'sweep': run_vulnerability_sweep,
    'defense': run_defense_eval,
    'study': run_transform_study,
}


def run_experiment(config: ExperimentConfig, stats: ExperimentStats | None = None) -> Report:
    return RUNNERS[config.experiment](config, stats=stats)
