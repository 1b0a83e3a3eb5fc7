import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Literal

import marshmallow as mm
import marshmallow.validate

from rdsc.attacks import ATTACK_KINDS, TARGETS, AttackConfig
from rdsc.errors import InvalidConfig


Experiment = Literal['sweep', 'defense', 'study']
EXPERIMENTS = ('sweep', 'defense', 'study')

METRICS = ('bpp', 'distortion', 'psnr', 'ms_ssim', 'rd_loss')
STUDY_FAMILIES = ('shift', 'zero_pad', 'stretch', 'rotate')


def parse_defense(mode: str) -> tuple[str, int]:
    """`none`, `two_way`, `naive_random` or `k_way:K` -> (kind, number of arms)"""
    if mode == 'none':
        return 'none', 1
    if mode == 'two_way':
        return 'k_way', 2
    if mode == 'naive_random':
        return 'naive_random', 1
    kind, _, k = mode.partition(':')
    if kind == 'k_way' and k.isdigit() and int(k) >= 1:
        return 'k_way', int(k)
    raise ValueError(f'unknown defense mode - {mode}')


def _valid_defense(mode: str) -> bool:
    try:
        parse_defense(mode)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = 'experiment'
    experiment: Experiment = 'defense'
    # model variants loaded from checkpoints; when empty, `presets` are trained on the dataset
    checkpoints: list[str] = field(default_factory=list)
    presets: list[str] = field(default_factory=lambda: ['low'])
    train_epochs: int = 30
    # optimizer steps per training epoch, 0 for one pass over the images
    train_steps: int = 0
    # adversarially fine-tuned model for the defense grid
    advt_checkpoint: str | None = None
    advt_train: bool = False
    dataset: str = 'synthetic:24'
    image_size: int | None = None
    split_seed: int = 0
    limit: int | None = None
    attacks: list[AttackConfig] = field(default_factory=lambda: [AttackConfig()])
    epsilons: list[float] = field(default_factory=list)
    alpha_ratio: float = 0.5
    defenses: list[str] = field(default_factory=lambda: ['none', 'two_way'])
    repeats: int = 1
    lam: float | None = None
    metrics: list[str] = field(default_factory=lambda: list(METRICS))
    histogram_bins: int = 10
    study_families: list[str] = field(default_factory=lambda: list(STUDY_FAMILIES))
    output_dir: str = field(default_factory=lambda: os.environ.get('RDSC_OUTPUT_DIR', 'out'))
    seed: int = 0
    workers: int = field(default_factory=lambda: int(os.environ.get('RDSC_WORKERS', '1')))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def identity(self) -> dict[str, Any]:
        """Everything that determines the numbers of a run"""
        data = self.to_dict()
        del data['output_dir'], data['workers']
        return data


class AttackConfigSchema(mm.Schema):
    class Meta:
        unknown = mm.RAISE

    epsilon = mm.fields.Float(validate=mm.validate.Range(min=0, max=1))
    alpha = mm.fields.Float(validate=mm.validate.Range(min=0))
    iters = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=1))
    target = mm.fields.Str(validate=mm.validate.OneOf(TARGETS))
    eot_samples = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    seed = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    kind = mm.fields.Str(validate=mm.validate.OneOf(ATTACK_KINDS))

    @mm.post_load
    def make(self, data, **kwargs) -> AttackConfig:
        return AttackConfig(**data)


class ExperimentConfigSchema(mm.Schema):
    class Meta:
        unknown = mm.RAISE

    name = mm.fields.Str(validate=mm.validate.Regexp(r'^[\w.-]+$'))
    experiment = mm.fields.Str(validate=mm.validate.OneOf(EXPERIMENTS))
    checkpoints = mm.fields.List(mm.fields.Str())
    presets = mm.fields.List(mm.fields.Str(validate=mm.validate.Regexp(r'^(low|high)(-half)?$')))
    train_epochs = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    train_steps = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    advt_checkpoint = mm.fields.Str(allow_none=True)
    advt_train = mm.fields.Boolean()
    dataset = mm.fields.Str()
    image_size = mm.fields.Integer(strict=True, allow_none=True, validate=mm.validate.Range(min=16))
    split_seed = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    limit = mm.fields.Integer(strict=True, allow_none=True, validate=mm.validate.Range(min=1))
    attacks = mm.fields.List(mm.fields.Nested(AttackConfigSchema))
    epsilons = mm.fields.List(mm.fields.Float(validate=mm.validate.Range(min=0, max=1)))
    alpha_ratio = mm.fields.Float(validate=mm.validate.Range(min=0, max=1, min_inclusive=False))
    defenses = mm.fields.List(mm.fields.Str(validate=_valid_defense))
    repeats = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=1))
    lam = mm.fields.Float(allow_none=True, validate=mm.validate.Range(min=0))
    metrics = mm.fields.List(mm.fields.Str(validate=mm.validate.OneOf(METRICS)))
    histogram_bins = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=1))
    study_families = mm.fields.List(mm.fields.Str(validate=mm.validate.OneOf(STUDY_FAMILIES)))
    output_dir = mm.fields.Str()
    seed = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=0))
    workers = mm.fields.Integer(strict=True, validate=mm.validate.Range(min=1))

    @mm.post_load
    def make(self, data, **kwargs) -> ExperimentConfig:
        return ExperimentConfig(**data)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfigSchema().load(data)
    except mm.ValidationError as err:
        raise InvalidConfig(str(err.normalized_messages()))


def load_config(path: str) -> dict[str, Any]:
    """Raw config file contents, validated later together with command line flags."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidConfig(f'{path} is not valid json: {e}')
    if not isinstance(data, dict):
        raise InvalidConfig(f'{path} must contain a json object')
    return data

