from .log_utils import log_error
from .errors import ConfigError, TaskchunkError


def describe_error(exc):
    """Render a library exception as a one-paragraph message for the terminal."""
    if isinstance(exc, ConfigError) and len(exc.problems) > 1:
        return str(exc)
    if isinstance(exc, TaskchunkError):
        return f"{type(exc).__name__}: {exc}"
    return str(exc)


def handle_error(message, exit_code=1):
    """Standardized error handling (delegates to colored log_error)."""
    if isinstance(message, BaseException):
        message = describe_error(message)
    log_error(message)  # Always exits; exit_code ignored for simplicity
