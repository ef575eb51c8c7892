"""Root logger setup."""

import logging

from core.config import settings
from core.constants import LogLevel

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: LogLevel | None = None) -> None:
    """Configure the root handler once; later calls only adjust the level."""
    resolved = (level or settings.log_level).value
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=resolved, format=LOG_FORMAT)
    root.setLevel(resolved)
