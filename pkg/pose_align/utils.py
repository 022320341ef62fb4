import logging
import time
from functools import wraps
from typing import Any, Callable, Optional, TypeVar

from .config import LOG_LEVEL

logger = logging.getLogger(__name__)

# Type variable for generic function typing
F = TypeVar('F', bound=Callable[..., Any])

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for the CLI and the viewer.

    Args:
        level: Level name (e.g. "DEBUG"); defaults to ALIGN_LOG_LEVEL.
    """
    level_name = (level or LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)


def log_duration(label: Optional[str] = None):
    """
    Decorator that logs the wall-clock time spent in a function.

    Args:
        label: Name used in the log line (default: the function name)
    """
    def decorator(func: F) -> F:
        name = label or func.__name__

        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            started = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                logger.debug(f"{name} took {time.perf_counter() - started:.3f} s")
        return wrapper  # type: ignore
    return decorator
