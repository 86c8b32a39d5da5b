"""
Logging interface used throughout evmanifold.

Modules take a component logger with ``get_logger("spectral")`` (a child of
the ``evmanifold`` root logger); the module-level ``logger`` is the root.
Output goes to stderr so command output on stdout stays machine readable.
The import-time setup is a WARNING-level default; ``evmanifold.app.config``
replaces it with the level, format and file taken from ``Settings``.
"""

from evmanifold.app.utilities.logging_config import (
    LoggingConfig,
    LogLevel,
    LogFormat,
    LogDestination,
    configure_logging,
    get_logger as _get_logger,
    logging_manager
)

logger = None


def get_logger(name=None):
    """Get a logger instance - wrapper around the logging manager"""
    try:
        return _get_logger(name)
    except RuntimeError:
        initialize_logging()
        return _get_logger(name)


def initialize_logging(config=None):
    """Initialize the logging system with optional configuration"""
    global logger

    if config is None:
        config = LoggingConfig(
            level=LogLevel.WARNING,
            format_type=LogFormat.JSON_COMPACT,
            enable_console=True,
            console_destination=LogDestination.STDERR,
            capture_warnings=True
        )

    configure_logging(config)
    logger = _get_logger()

    return logger


if logger is None:
    logger = initialize_logging()

__all__ = [
    'logger',
    'get_logger',
    'initialize_logging',
    'LoggingConfig',
    'LogLevel',
    'LogFormat',
    'LogDestination',
    'configure_logging',
    'logging_manager'
]
