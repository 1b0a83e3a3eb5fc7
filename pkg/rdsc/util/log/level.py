"""Per-namespace log levels from the environment.

`RDSC_DEBUG=rdsc.attacks,rdsc.harness.*` enables debug output for the listed
logger namespaces. Each of `RDSC_TRACE`, `RDSC_DEBUG`, `RDSC_INFO`, `RDSC_WARN`,
`RDSC_ERROR` and `RDSC_FATAL` takes a comma separated list of patterns where `*`
matches anything. The most specific matching pattern wins.
"""
import logging
import os
import re
from functools import cache
from typing import Callable


LEVELS = ('TRACE', 'DEBUG', 'INFO', 'WARN', 'ERROR', 'FATAL')


Matcher = Callable[[str], int]


def _compile_pattern(pattern: str) -> Matcher:
    regex = re.compile(f'^{"(.*)".join(map(re.escape, pattern.split("*")))}(\\..*)?$')

    def specificity(ns: str) -> int:
        m = regex.match(ns)
        if m is None:
            return 0
        wildcard = sum(len(g) for g in m.groups() if g is not None)
        return len(ns) + 1 - wildcard

    return specificity


def _compile_level_config(config: str) -> Matcher:
    patterns = [_compile_pattern(p.strip()) for p in config.split(',') if p.strip()]

    def match(ns: str) -> int:
        return max((p(ns) for p in patterns), default=0)

    return match


@cache
def _get_matchers() -> tuple[Matcher | None, ...]:
    return tuple(
        _compile_level_config(env) if (env := os.getenv(f'RDSC_{level}')) else None
        for level in LEVELS
    )


def _get_default_log_level(ns: str) -> int:
    if ns == 'PIL' or ns.startswith('PIL.'):
        return logging.WARN
    return logging.INFO


def get_log_level(ns: str) -> int:
    level = _get_default_log_level(ns)
    best = 0
    for index, matcher in enumerate(_get_matchers()):
        if matcher is None:
            continue
        s = matcher(ns)
        if s > best:
            # TRACE maps to 0 which the stdlib treats as NOTSET, i.e. everything
            level = index * 10
            best = s
    return level
