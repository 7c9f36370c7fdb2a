import logging

import structlog
from structlog.dev import ConsoleRenderer
from structlog.processors import JSONRenderer, TimeStamper, add_log_level
from structlog.stdlib import LoggerFactory, ProcessorFormatter

_configured = False


def configure_logging(level=logging.INFO, dev_mode=True, force=False):
    """
    Configure centralized structured logging for a3kit to stderr, including the oracle server.
    In dev mode, use plain text; otherwise, use JSON.

    Args:
        level (int): Logging level (default: logging.INFO).
        dev_mode (bool): If True, use plain text logging (default: True).
        force (bool): Reconfigure even if logging was already set up (the CLI does this).
    """
    global _configured
    if _configured and not force:
        return structlog.get_logger()

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)

    structlog.configure(
        processors=[
            TimeStamper(fmt="iso"),
            add_log_level,
            ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    formatter = ProcessorFormatter(
        processor=ConsoleRenderer(colors=False) if dev_mode else JSONRenderer(),
        foreign_pre_chain=[TimeStamper(fmt="iso"), add_log_level],
    )
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # Uvicorn/FastAPI loggers inherit this config
    for logger_name in ("uvicorn", "uvicorn.access", "uvicorn.error", "fastapi"):
        logger = logging.getLogger(logger_name)
        logger.handlers = []
        logger.propagate = True

    _configured = True
    return structlog.get_logger()
