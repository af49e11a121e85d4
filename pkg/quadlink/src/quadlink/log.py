import logging
from enum import Enum

import typer

LEVEL_COLORS = {
    logging.DEBUG: typer.colors.BRIGHT_BLACK,
    logging.INFO: typer.colors.BLUE,
    logging.WARNING: typer.colors.YELLOW,
    logging.ERROR: typer.colors.RED,
    logging.CRITICAL: typer.colors.BRIGHT_RED,
}


class Verbosity(str, Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class TyperLoggerHandler(logging.Handler):
    """Colours records by level and keeps them off standard output."""

    def emit(self, record: logging.LogRecord) -> None:
        typer.secho(
            self.format(record), fg=LEVEL_COLORS.get(record.levelno), err=True
        )


def configure(verbosity: Verbosity) -> None:
    logging.basicConfig(
        format="%(levelname)s\t%(message)s",
        level=verbosity.value,
        handlers=[TyperLoggerHandler()],
        force=True,
    )
