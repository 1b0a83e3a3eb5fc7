from dataclasses import asdict, dataclass
from typing import Literal

from rdsc.errors import InvalidConfig


Target = Literal['rate', 'distortion', 'rd']
TARGETS = ('rate', 'distortion', 'rd')

AttackKind = Literal['vanilla', 'eot', 'fda']
ATTACK_KINDS = ('vanilla', 'eot', 'fda')


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 4 / 255
    alpha: float = 2 / 255
    iters: int = 50
    target: Target = 'rate'
    eot_samples: int = 0
    seed: int = 0
    kind: AttackKind = 'vanilla'

    def __post_init__(self):
        problems = []
        if not 0 <= self.epsilon <= 1:
            problems.append(f'epsilon must lie in [0, 1], got {self.epsilon}')
        elif self.epsilon > 0 and not 0 < self.alpha <= self.epsilon:
            problems.append(f'alpha must lie in (0, epsilon], got {self.alpha}')
        elif self.epsilon == 0 and self.alpha < 0:
            problems.append(f'alpha must not be negative, got {self.alpha}')
        if self.iters < 1:
            problems.append(f'iters must be at least 1, got {self.iters}')
        if self.eot_samples < 0:
            problems.append(f'eot_samples must not be negative, got {self.eot_samples}')
        if self.target not in TARGETS:
            problems.append(f'unknown attack target - {self.target}')
        if self.kind not in ATTACK_KINDS:
            problems.append(f'unknown attack kind - {self.kind}')
        if problems:
            raise InvalidConfig('; '.join(problems))

    def to_dict(self) -> dict:
        return asdict(self)
