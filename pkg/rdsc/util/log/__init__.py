import logging


class _Logger(logging.Logger):
    def getEffectiveLevel(self) -> int:
        from rdsc.util.log.level import get_log_level
        return get_log_level(self.name)


def init_logging() -> None:
    import sys
    from rdsc.util.log.format import COLORFUL, StructFormatter, TextFormatter
    logging.setLoggerClass(_Logger)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(TextFormatter(COLORFUL) if sys.stderr.isatty() else StructFormatter())
    logging.basicConfig(handlers=[handler])
