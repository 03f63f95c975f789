import logging
from typing import Union

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def configure_logging(level: Union[str, int] = "INFO") -> None:
    """
    Route all sdot loggers to stderr with a single format.

    Args:
        level (Union[str, int]): Root log level, e.g. "INFO" or logging.DEBUG.
    """
    if isinstance(level, str):
        level = level.upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
