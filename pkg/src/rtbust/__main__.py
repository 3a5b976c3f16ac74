import logging
import sys

from pydantic import ValidationError

from rtbust.logging_config import configure_utf8_logging
configure_utf8_logging()

logger = logging.getLogger(__name__)

from .cli import cli, auto_import_modules
from .exceptions import ConfigurationError, InputNotFoundError, RtbustError, StageFailedError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def main(argv: list[str] | None = None) -> int:
    """Runs one pipeline command and returns its exit code"""

    # Run this on startup
    auto_import_modules("rtbust", targets=["tools"])

    try:
        return cli.run(argv)
    except StageFailedError as e:
        logger.error(str(e))
        if isinstance(e.cause, (ConfigurationError, InputNotFoundError, ValidationError)):
            return EXIT_USAGE
        return EXIT_FAILURE
    except (ConfigurationError, InputNotFoundError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except RtbustError as e:
        logger.error(str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
