import argparse
import logging
import sys
from typing import List, Optional
from facilitation import __version__
from facilitation.cli import equilibria, heteroclinic, portrait, regions, stochastic
from facilitation.cli.common import RunContext, build_run_config
from facilitation.config import settings
from facilitation.core.exceptions import EXIT_OK, ModelError, general_exception_handler, model_error_handler
from facilitation.core.logging import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (equilibria, portrait, heteroclinic, regions, stochastic)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facilitation",
        description="Facilitation/habitat-loss resource-consumer model: bifurcations, PWL analogue, stochastic ensembles",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)

    if settings.is_development:
        logger.debug(f"facilitation {__version__} {args.command} (workers={settings.workers})")

    try:
        config = build_run_config(args.command, args)
        ctx = RunContext(config, workers=args.workers or settings.workers)
        args.handler(ctx, args)
        return EXIT_OK
    except ModelError as exc:
        return model_error_handler(exc, args.command)
    except Exception as exc:
        return general_exception_handler(exc, args.command)


if __name__ == "__main__":
    sys.exit(main())
