import logging
import logging.handlers
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, TextIO, Union
from enum import Enum


ROOT_LOGGER_NAME = "evmanifold"


class LogLevel(Enum):
    """Enumeration for log levels"""
    CRITICAL = logging.CRITICAL
    ERROR = logging.ERROR
    WARNING = logging.WARNING
    INFO = logging.INFO
    DEBUG = logging.DEBUG

    @classmethod
    def parse(cls, value: Union["LogLevel", str, int]) -> "LogLevel":
        if isinstance(value, LogLevel):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise ValueError(f"Unknown log level '{value}'. Available: {[m.name for m in cls]}")


class LogFormat(Enum):
    """Enumeration for log output formats"""
    JSON_COMPACT = "json_compact"
    JSON_PRETTY = "json_pretty"
    STANDARD = "standard"
    DETAILED = "detailed"


class LogDestination(Enum):
    """Enumeration for log destinations"""
    STDOUT = "stdout"
    STDERR = "stderr"


# Attributes every LogRecord carries; anything else came in through `extra`
_RESERVED = set(vars(logging.LogRecord('', 0, '', 0, '', (), None)).keys())
_RESERVED.update(['message', 'asctime', 'exc_text', 'stack_info', 'taskName'])


def _json_safe(value: Any) -> Any:
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, float):
        return value if value == value and abs(value) != float('inf') else repr(value)
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


class JsonFormatter(logging.Formatter):
    """Compact JSON formatter - single line output"""

    indent: Optional[int] = None

    def build_record(self, record: logging.LogRecord) -> Dict[str, Any]:
        log_record = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno
        }

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        extras = {
            key: _json_safe(value)
            for key, value in record.__dict__.items()
            if key not in _RESERVED and not key.startswith('_')
        }
        if extras:
            log_record["extra"] = extras
        return log_record

    def format(self, record):
        if self.indent is None:
            return json.dumps(self.build_record(record), ensure_ascii=False, separators=(',', ':'))
        return json.dumps(self.build_record(record), ensure_ascii=False, indent=self.indent)


class JsonPrettyFormatter(JsonFormatter):
    """Pretty-printed JSON formatter - multi-line indented output"""

    indent = 2


class StandardFormatter(logging.Formatter):
    """Standard text formatter"""

    def __init__(self):
        super().__init__(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )


class DetailedFormatter(logging.Formatter):
    """Detailed text formatter with more context"""

    def __init__(self):
        super().__init__(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(module)s:%(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )


class ConsoleHandler(logging.StreamHandler):
    """Stream handler that writes to whatever sys.stdout/sys.stderr is at emit time"""

    def __init__(self, destination: LogDestination = LogDestination.STDERR):
        self.destination = destination
        super().__init__()

    @property
    def stream(self) -> TextIO:
        return sys.stdout if self.destination == LogDestination.STDOUT else sys.stderr

    @stream.setter
    def stream(self, value: TextIO) -> None:
        pass


class LoggingConfig:
    """Configuration class for logging setup"""

    def __init__(
        self,
        level: Union[LogLevel, str] = LogLevel.INFO,
        format_type: Union[LogFormat, str] = LogFormat.JSON_COMPACT,
        logger_name: str = ROOT_LOGGER_NAME,
        enable_console: bool = True,
        console_destination: Union[LogDestination, str] = LogDestination.STDERR,
        log_file_path: Optional[str] = None,
        max_file_size: int = 10 * 1024 * 1024,  # 10MB
        backup_count: int = 5,
        capture_warnings: bool = True,
    ):
        self.level = LogLevel.parse(level)
        self.format_type = LogFormat(format_type) if isinstance(format_type, str) else format_type
        self.logger_name = logger_name
        self.enable_console = enable_console
        self.console_destination = (
            LogDestination(console_destination) if isinstance(console_destination, str) else console_destination
        )

        # File options
        self.log_file_path = log_file_path
        self.max_file_size = max_file_size
        self.backup_count = backup_count

        self.capture_warnings = capture_warnings


class LoggingManager:
    """Central logging manager for evmanifold"""

    def __init__(self):
        self._loggers: Dict[str, logging.Logger] = {}
        self._config: Optional[LoggingConfig] = None
        self._is_configured = False

    @property
    def config(self) -> Optional[LoggingConfig]:
        return self._config

    def configure(self, config: LoggingConfig) -> None:
        """Configure the logging system"""
        self._config = config

        if config.capture_warnings:
            logging.captureWarnings(True)

        logger = logging.getLogger(config.logger_name)
        logger.setLevel(config.level.value)

        # Clear existing handlers for clean setup
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.propagate = False

        handlers = []
        if config.enable_console:
            handlers.append(self._create_console_handler(config))
        if config.log_file_path:
            handlers.append(self._create_file_handler(config))

        for handler in handlers:
            logger.addHandler(handler)

        self._loggers = {config.logger_name: logger}
        self._is_configured = True

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        """Get a logger instance; bare component names become children of the root logger"""
        if not self._is_configured:
            raise RuntimeError("Logging not configured. Call configure() first.")

        root_name = self._config.logger_name
        if not name:
            logger_name = root_name
        elif name == root_name or name.startswith(root_name + "."):
            logger_name = name
        else:
            logger_name = f"{root_name}.{name}"

        if logger_name not in self._loggers:
            self._loggers[logger_name] = logging.getLogger(logger_name)

        return self._loggers[logger_name]

    def _create_console_handler(self, config: LoggingConfig) -> logging.Handler:
        """Create console handler based on configuration"""
        handler = ConsoleHandler(config.console_destination)
        handler.setLevel(config.level.value)
        handler.setFormatter(self._create_formatter(config.format_type))
        return handler

    def _create_file_handler(self, config: LoggingConfig) -> logging.Handler:
        """Create a rotating file handler based on configuration"""
        file_path = Path(config.log_file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)

        handler = logging.handlers.RotatingFileHandler(
            filename=config.log_file_path,
            maxBytes=config.max_file_size,
            backupCount=config.backup_count
        )

        handler.setLevel(config.level.value)
        handler.setFormatter(self._create_formatter(config.format_type))
        return handler

    def _create_formatter(self, format_type: LogFormat) -> logging.Formatter:
        """Create formatter based on format type"""
        if format_type == LogFormat.JSON_PRETTY:
            return JsonPrettyFormatter()
        elif format_type == LogFormat.STANDARD:
            return StandardFormatter()
        elif format_type == LogFormat.DETAILED:
            return DetailedFormatter()
        return JsonFormatter()


# Global logging manager instance
logging_manager = LoggingManager()


def configure_logging(config: LoggingConfig) -> None:
    """Configure the global logging system"""
    logging_manager.configure(config)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get a logger instance"""
    return logging_manager.get_logger(name)
