# -*- coding: utf-8 -*-
"""
relaxkit entry point
Configures logging and hands the command line to cli
"""

import logging
import sys
from typing import Optional, Sequence

import structlog

from cli import build_parser, run
from config import LOGGING_CONFIG, validate_configuration


def setup_logging(level: Optional[str] = None, json_format: Optional[bool] = None,
                  log_file: Optional[str] = None) -> logging.Logger:
    """Route stdlib logging through structlog's formatter on stderr (stdout carries reports)"""
    level = (level or LOGGING_CONFIG['log_level']).upper()
    json_format = LOGGING_CONFIG['json_format'] if json_format is None else json_format
    log_file = log_file or LOGGING_CONFIG['log_file']

    renderer = structlog.processors.JSONRenderer() if json_format else structlog.dev.ConsoleRenderer(colors=False)
    pre_chain = [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
    ]
    formatter = structlog.stdlib.ProcessorFormatter(
        processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        foreign_pre_chain=pre_chain,
    )

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    for handler in handlers:
        handler.setFormatter(formatter)

    root = logging.getLogger()
    root.handlers = handlers
    root.setLevel(getattr(logging, level, logging.WARNING))

    return logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.log_level, True if args.log_json else None)
    try:
        validate_configuration()
    except ValueError as e:
        logger.error(f"❌ {e}")
        return 2
    logger.debug(f"🚀 relaxkit {args.command}")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
