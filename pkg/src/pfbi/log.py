import logging
import os
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_debug_log_path: Optional[str] = None


# ====================== Utility to Add Console Logging ======================
def add_console_logging(logger: logging.Logger, level=logging.INFO):
    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in logger.handlers):
        ch = logging.StreamHandler()
        ch.setLevel(level)
        ch.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(ch)


def set_debug_log(path: Optional[str]):
    """Route DEBUG output of every pfbi component logger to `path` (None disables)."""
    global _debug_log_path
    _debug_log_path = path


def init_logger(name: str, level=logging.INFO) -> logging.Logger:
    """
    Named component logger: console at `level`, plus a DEBUG file handler when
    a debug log path has been configured.
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    for h in [h for h in logger.handlers if isinstance(h, logging.FileHandler)]:
        if not _debug_log_path or h.baseFilename != os.path.abspath(_debug_log_path):
            logger.removeHandler(h)
            h.close()
    if _debug_log_path and not any(isinstance(h, logging.FileHandler) for h in logger.handlers):
        fh = logging.FileHandler(_debug_log_path)
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(fh)
    add_console_logging(logger, level=level)
    return logger
