import argparse
import logging
import os
import sys
from functools import cache
from typing import Any

import numpy as np

from rdsc.attacks import ATTACK_KINDS, TARGETS, AttackConfig, run_attack
from rdsc.codec import checkpoint
from rdsc.codec.model import CodecModel, preset
from rdsc.codec.train import TrainOptions, train
from rdsc.coding import Bitstream
from rdsc.defense import decode_any, encode_k_way, encode_oneway_random, encode_plain
from rdsc.harness.config import ExperimentConfig, load_config, parse_config
from rdsc.harness.dataset import ingest_dataset, read_image, write_image
from rdsc.harness.experiments import run_experiment
from rdsc.harness.metrics import ExperimentStats, start_metrics_server
from rdsc.harness.report import emit_report, load_report, summary_table
from rdsc.harness.seeds import rng_for


LOG = logging.getLogger(__name__)


# eval flag -> experiment config field
EVAL_FLAGS = {
    'name': 'name',
    'experiment': 'experiment',
    'checkpoint': 'checkpoints',
    'preset': 'presets',
    'train_epochs': 'train_epochs',
    'train_steps': 'train_steps',
    'advt_checkpoint': 'advt_checkpoint',
    'advt_train': 'advt_train',
    'dataset': 'dataset',
    'image_size': 'image_size',
    'split_seed': 'split_seed',
    'limit': 'limit',
    'epsilons': 'epsilons',
    'alpha_ratio': 'alpha_ratio',
    'defense': 'defenses',
    'repeats': 'repeats',
    'lam': 'lam',
    'metric': 'metrics',
    'histogram_bins': 'histogram_bins',
    'study_family': 'study_families',
    'output_dir': 'output_dir',
    'seed': 'seed',
    'workers': 'workers',
}

ATTACK_FLAGS = ('epsilon', 'alpha', 'iters', 'target', 'eot_samples')


def _add_attack_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    base = AttackConfig()
    p.add_argument(
        '--epsilon',
        type=float,
        metavar='EPS',
        default=base.epsilon if defaults else None,
        help='l-inf radius of the perturbation on [0, 1] pixels'
    )
    p.add_argument(
        '--alpha',
        type=float,
        default=base.alpha if defaults else None,
        help='signed gradient step size'
    )
    p.add_argument(
        '--iters',
        type=int,
        metavar='N',
        default=base.iters if defaults else None,
        help='number of attack steps'
    )
    p.add_argument(
        '--target',
        choices=TARGETS,
        default=base.target if defaults else None,
        help='codec objective to increase'
    )
    p.add_argument(
        '--eot-samples',
        type=int,
        metavar='M',
        default=base.eot_samples if defaults else None,
        help='random transforms averaged with the identity at every EoT step'
    )


class CLI:
    def __init__(self, module_name: str):
        self.module_name = module_name

    @cache
    def _arguments(self) -> argparse.Namespace:
        program = argparse.ArgumentParser(
            prog=f'python3 -m {self.module_name}',
            description='Adversarially robust learned image compression toolkit'
        )

        program.add_argument(
            '--prom-port',
            type=int,
            help='port to use for built-in prometheus metrics server'
        )

        commands = program.add_subparsers(dest='command', required=True)

        p = commands.add_parser('train', help='train a codec on a dataset and save a checkpoint')
        p.add_argument('checkpoint', metavar='CHECKPOINT', help='checkpoint file to write')
        p.add_argument('--preset', default='low', help='model preset: low, high, low-half or high-half')
        p.add_argument('--init', metavar='CHECKPOINT', help='fine-tune this checkpoint instead of a fresh model')
        p.add_argument('--dataset', default='synthetic:24', help='image directory or synthetic:N')
        p.add_argument('--image-size', type=int, metavar='PX', help='resize and center-crop images to PX x PX')
        p.add_argument('--limit', type=int, metavar='N', help='use at most N images')
        p.add_argument('--epochs', type=int, default=TrainOptions().epochs)
        p.add_argument('--steps-per-epoch', type=int, default=TrainOptions().steps_per_epoch, metavar='N')
        p.add_argument('--lr', type=float, default=TrainOptions().lr)
        p.add_argument('--entropy-lr', type=float, default=TrainOptions().entropy_lr)
        p.add_argument('--batch-size', type=int, default=TrainOptions().batch_size)
        p.add_argument('--crop', type=int, default=TrainOptions().crop, metavar='PX')
        p.add_argument('--adversarial', choices=['off', 'fgsm_random_init'], default='off')
        p.add_argument('--epsilon', type=float, default=TrainOptions().epsilon, metavar='EPS')
        p.add_argument('--seed', type=int, default=0)

        p = commands.add_parser('encode', help='compress an image file into a bitstream')
        p.add_argument('image', metavar='IMAGE')
        p.add_argument('-o', '--output', required=True, metavar='FILE', help='bitstream file to write')
        p.add_argument('--checkpoint', required=True)
        p.add_argument('--ways', type=int, default=2, metavar='K', help='identity plus K-1 random transform arms')
        p.add_argument('--naive', action='store_true', help='always encode through one random transform')
        p.add_argument('--seed', type=int, help='seed of the transform sampler, random by default')
        p.add_argument('--lam', type=float, help='rate-distortion trade-off of arm selection')

        p = commands.add_parser('decode', help='decompress a bitstream into an image file')
        p.add_argument('bitstream', metavar='FILE')
        p.add_argument('-o', '--output', required=True, metavar='IMAGE')
        p.add_argument('--checkpoint', required=True)

        p = commands.add_parser('attack', help='write an adversarial version of an image')
        p.add_argument('image', metavar='IMAGE')
        p.add_argument('-o', '--output', required=True, metavar='IMAGE')
        p.add_argument('--checkpoint', required=True)
        p.add_argument('--kind', choices=ATTACK_KINDS, default='vanilla')
        p.add_argument('--seed', type=int, default=0)
        _add_attack_flags(p, defaults=True)

        p = commands.add_parser('eval', help='run an experiment and write its report')
        p.add_argument('--config', metavar='FILE', help='experiment config (json), wins over flags')
        p.add_argument('--name')
        p.add_argument('--experiment', choices=['sweep', 'defense', 'study'])
        p.add_argument('--checkpoint', action='append', help='model variant checkpoint (repeatable)')
        p.add_argument('--preset', action='append', help='model preset to train when no checkpoint is given')
        p.add_argument('--train-epochs', type=int, metavar='N')
        p.add_argument('--train-steps', type=int, metavar='N', help='optimizer steps per training epoch')
        p.add_argument('--advt-checkpoint', metavar='CHECKPOINT')
        p.add_argument('--advt-train', action='store_const', const=True)
        p.add_argument('--dataset', help='image directory or synthetic:N')
        p.add_argument('--image-size', type=int, metavar='PX')
        p.add_argument('--split-seed', type=int)
        p.add_argument('--limit', type=int, metavar='N')
        p.add_argument('--attack', action='append', choices=ATTACK_KINDS, help='attack kind (repeatable)')
        _add_attack_flags(p, defaults=False)
        p.add_argument('--epsilons', type=float, nargs='+', metavar='EPS', help='epsilon sweep')
        p.add_argument('--alpha-ratio', type=float, help='step size as a fraction of epsilon in sweeps')
        p.add_argument('--defense', action='append', help='none, two_way, naive_random or k_way:K (repeatable)')
        p.add_argument('--repeats', type=int, metavar='N')
        p.add_argument('--lam', type=float)
        p.add_argument('--metric', action='append', help='metric to summarize (repeatable)')
        p.add_argument('--histogram-bins', type=int, metavar='N')
        p.add_argument('--study-family', action='append')
        p.add_argument('--output-dir', metavar='DIR')
        p.add_argument('--seed', type=int)
        p.add_argument('--workers', type=int, metavar='N')

        p = commands.add_parser('report', help='re-emit report tables from a report.json')
        p.add_argument('report', metavar='REPORT_JSON')
        p.add_argument('--output-dir', metavar='DIR', help='also write the report tables into DIR')

        return program.parse_args()

    def _start_prometheus_metrics(self, stats: ExperimentStats) -> None:
        port = self._arguments().prom_port
        if port is None:
            return
        LOG.info(f'exposing prometheus metrics on port {port}')
        start_metrics_server(port, stats)

    def train(self) -> None:
        args = self._arguments()
        dataset = ingest_dataset(args.dataset, args.image_size, limit=args.limit)
        if args.init:
            model = checkpoint.load(args.init)
        else:
            model = CodecModel.create(preset(args.preset), rng_for(args.seed, 'init', args.preset))
        options = TrainOptions(
            epochs=args.epochs,
            lr=args.lr,
            entropy_lr=args.entropy_lr,
            steps_per_epoch=args.steps_per_epoch,
            batch_size=args.batch_size,
            crop=args.crop,
            seed=args.seed,
            adversarial=args.adversarial,
            epsilon=args.epsilon
        )
        train(model, dataset.images, options)
        checkpoint.save(model, args.checkpoint)

    def encode(self) -> None:
        args = self._arguments()
        model = checkpoint.load(args.checkpoint)
        pixels = read_image(args.image)
        rng = np.random.default_rng(args.seed)
        if args.naive:
            out = encode_oneway_random(model, pixels, rng, args.lam)
        elif args.ways <= 1:
            out = encode_plain(model, pixels, args.lam)
        else:
            out = encode_k_way(model, pixels, rng, args.ways, args.lam)
        with open(args.output, 'wb') as f:
            f.write(out.bitstream.to_bytes())
        LOG.info(f'wrote {args.output}', extra={
            'bytes': len(out.bitstream),
            'bpp': out.record.rate_bpp,
            'psnr': out.record.psnr_db,
            'theta': out.theta,
            'losses': list(out.losses),
            'encode_ms': out.encode_ms
        })

    def decode(self) -> None:
        args = self._arguments()
        model = checkpoint.load(args.checkpoint)
        with open(args.bitstream, 'rb') as f:
            bs = Bitstream.from_bytes(f.read())
        write_image(args.output, decode_any(bs, model))
        LOG.info(f'wrote {args.output}', extra={'dims': bs.header.orig_dims, 'theta': bs.theta})

    def attack(self) -> None:
        args = self._arguments()
        model = checkpoint.load(args.checkpoint)
        pixels = read_image(args.image)
        cfg = AttackConfig(
            epsilon=args.epsilon,
            alpha=args.alpha,
            iters=args.iters,
            target=args.target,
            eot_samples=args.eot_samples,
            seed=args.seed,
            kind=args.kind
        )
        x_adv = run_attack(model, pixels, cfg)
        write_image(args.output, x_adv)
        clean = encode_plain(model, pixels)
        attacked = encode_plain(model, x_adv)
        LOG.info(f'wrote {args.output}', extra={
            'clean_bpp': clean.record.rate_bpp,
            'attacked_bpp': attacked.record.rate_bpp,
            'clean_psnr': clean.record.psnr_db,
            'attacked_psnr': attacked.record.psnr_db
        })

    def _flag_values(self) -> dict[str, Any]:
        args = self._arguments()
        values = {}
        for flag, key in EVAL_FLAGS.items():
            v = getattr(args, flag)
            if v is not None:
                values[key] = v
        shared = {k: getattr(args, k) for k in ATTACK_FLAGS if getattr(args, k) is not None}
        if args.attack or shared:
            values['attacks'] = [dict(shared, kind=kind) for kind in args.attack or ['vanilla']]
        return values

    def experiment_config(self) -> ExperimentConfig:
        args = self._arguments()
        data = self._flag_values()
        if args.config:
            file_data = load_config(args.config)
            for key in sorted(data.keys() & file_data.keys()):
                if data[key] != file_data[key]:
                    LOG.warning(f'config file {args.config} overrides command line value of {key}')
            data.update(file_data)
        return parse_config(data)

    def eval(self) -> None:
        config = self.experiment_config()
        stats = ExperimentStats(config.experiment)
        self._start_prometheus_metrics(stats)
        report = run_experiment(config, stats)
        emit_report(report, config.output_dir)

    def report(self) -> None:
        args = self._arguments()
        path = args.report
        if os.path.isdir(path):
            path = os.path.join(path, 'report.json')
        report = load_report(path)
        if args.output_dir:
            emit_report(report, args.output_dir)
        for row in summary_table(report).to_pylist():
            print(row)

    def main(self) -> None:
        command = self._arguments().command

        if os.getenv('SENTRY_DSN'):
            import sentry_sdk
            sentry_sdk.init(
                traces_sample_rate=1.0
            )

        try:
            getattr(self, command)()
        except Exception as ex:
            LOG.critical('program crashed', exc_info=ex)
            sys.exit(1)


def main(module_name: str) -> None:
    CLI(module_name).main()
