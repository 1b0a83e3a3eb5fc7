from .config import ATTACK_KINDS, TARGETS, AttackConfig
from .losses import attack_loss, feature_disruption_loss
from .pgd import eot_attack, fda_lite, pgd, projected_ascent, run_attack
