import logging
from typing import Optional

ROOT_LOGGER_NAME = "pytessindex"

_formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def get_logger(
    logger_name: Optional[str] = None, logging_level: Optional[int] = None, log_file: Optional[str] = None
) -> logging.Logger:
    """Gets a configured logger for the package

    Args:
        logger_name (str): child logger name, e.g. ``__name__`` of the calling module
        logging_level (int): level of the logging
        log_file (str): path of an additional log file
    """

    logger = logging.getLogger(ROOT_LOGGER_NAME)

    if not any(getattr(handler, "_pytessindex", False) for handler in logger.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(_formatter)
        console_handler._pytessindex = True
        logger.addHandler(console_handler)
        logger.setLevel(logging.INFO)

    if log_file is not None:
        known_files = [getattr(handler, "baseFilename", None) for handler in logger.handlers]
        file_handler = logging.FileHandler(log_file)
        if file_handler.baseFilename in known_files:
            file_handler.close()
        else:
            file_handler.setFormatter(_formatter)
            logger.addHandler(file_handler)

    if logging_level is not None:
        logger.setLevel(logging_level)

    if logger_name is None or logger_name == ROOT_LOGGER_NAME:
        return logger

    if logger_name.startswith(ROOT_LOGGER_NAME + "."):
        return logging.getLogger(logger_name)

    return logger.getChild(logger_name)
