from rdsc.util.log import init_logging

init_logging()

from rdsc.harness.cli import main  # noqa: E402

main('rdsc')
