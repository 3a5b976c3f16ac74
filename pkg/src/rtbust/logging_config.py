import logging
import sys
import io

# Store the wrapped stderr stream to avoid multiple wrappers
_utf8_stderr = None

CONSOLE_FORMAT = '[%(levelname)-8s] [%(name)s] %(message)s'
TRACE_FORMAT = '%(asctime)s [%(levelname)-8s] [%(name)s] %(message)s'


def configure_utf8_logging(level: int = logging.INFO, trace_path: str | None = None):
    global _utf8_stderr

    # Ensure UTF-8 logger output on all platforms
    # Use stderr so stdout stays free for command output.
    if _utf8_stderr is None:
        _utf8_stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace',
                                        line_buffering=True)
    handler = logging.StreamHandler(_utf8_stderr)
    handler.setFormatter(logging.Formatter(fmt=CONSOLE_FORMAT))

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for old in list(root_logger.handlers):
        root_logger.removeHandler(old)
        if isinstance(old, logging.FileHandler):
            old.close()
    root_logger.addHandler(handler)

    if trace_path is not None:
        # The run trace keeps timestamps, the console does not.
        trace_handler = logging.FileHandler(trace_path, mode='w', encoding='utf-8')
        trace_handler.setFormatter(logging.Formatter(fmt=TRACE_FORMAT))
        root_logger.addHandler(trace_handler)


def detach_trace_handlers():
    """Closes and removes any trace file handlers attached to the root logger."""
    root_logger = logging.getLogger()
    for old in list(root_logger.handlers):
        if isinstance(old, logging.FileHandler):
            root_logger.removeHandler(old)
            old.close()
