import importlib
import logging
import os
from argparse import ArgumentParser, Namespace
from dataclasses import dataclass, field
from typing import Any, Callable

from dotenv import dotenv_values, load_dotenv

from rtbust.exceptions import ConfigurationError, InputNotFoundError
from rtbust.logging_config import configure_utf8_logging

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "RTBUST_SEED"


@dataclass
class CommandInfo:
    """Information about a registered sub-command."""
    name: str
    description: str
    handler: Callable[[Namespace], int | None]
    arguments: list[tuple[tuple, dict]] = field(default_factory=list)


class CommandRegistry:
    """
    Collects sub-commands declared with ``@cli.command`` across the subpackages
    and turns them into a single argparse parser.
    """

    def __init__(self, name: str):
        self.name = name
        self.registered_commands: dict[str, CommandInfo] = {}

    def command(self, name: str | None = None, description: str = ""):
        def decorator(func):
            arguments = list(reversed(getattr(func, "__cli_arguments__", [])))
            command_name = name or func.__name__.replace("_", "-")
            if command_name in self.registered_commands:
                logger.warning(f"Command '{command_name}' registered twice, keeping the last one")
            self.registered_commands[command_name] = CommandInfo(command_name, description, func, arguments)
            return func
        return decorator

    @staticmethod
    def argument(*args, **kwargs):
        def decorator(func):
            if not hasattr(func, "__cli_arguments__"):
                func.__cli_arguments__ = []
            func.__cli_arguments__.append((args, kwargs))
            return func
        return decorator

    def build_parser(self) -> tuple[ArgumentParser, dict[str, ArgumentParser]]:
        parser = ArgumentParser(prog=self.name, description="Offline retweeter-bot detection pipeline.")
        subparsers = parser.add_subparsers(dest="command", required=True)
        children: dict[str, ArgumentParser] = {}
        for command_name in sorted(self.registered_commands):
            info = self.registered_commands[command_name]
            sub = subparsers.add_parser(command_name, help=info.description, description=info.description)
            _add_common_arguments(sub)
            for args, kwargs in info.arguments:
                sub.add_argument(*args, **kwargs)
            sub.set_defaults(_handler=info.handler)
            children[command_name] = sub
        return parser, children

    def run(self, argv: list[str] | None = None) -> int:
        pre = ArgumentParser(add_help=False)
        _add_common_arguments(pre)
        known, _ = pre.parse_known_args(argv)

        load_environment(known.env_file)
        file_defaults = load_config_file(known.config) if known.config else {}

        parser, children = self.build_parser()
        if file_defaults:
            for sub in children.values():
                sub.set_defaults(**_file_defaults_for(sub, file_defaults))

        args = parser.parse_args(argv)
        configure_utf8_logging(logging.DEBUG if args.verbose else logging.INFO)
        logger.debug(f"Running command '{args.command}'")
        result = args._handler(args)
        return int(result or 0)


def _add_common_arguments(parser: ArgumentParser) -> None:
    parser.add_argument('--config', required=False, default=None,
                        help='Optional key=value configuration file')
    parser.add_argument('--env-file', required=False, default='.env',
                        help='Path to .env file (default: .env)')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging')


def _file_defaults_for(parser: ArgumentParser, file_defaults: dict[str, str]) -> dict[str, Any]:
    # argparse applies ``type`` to string defaults itself; flags need an explicit bool.
    defaults: dict[str, Any] = {}
    for action in parser._actions:
        if action.dest not in file_defaults:
            continue
        value = file_defaults[action.dest]
        if action.nargs == 0:
            lowered = value.strip().lower()
            if lowered not in _BOOLEAN_WORDS:
                raise ConfigurationError(f"Configuration key '{action.dest}' expects true or false, got {value!r}")
            defaults[action.dest] = _BOOLEAN_WORDS[lowered]
        else:
            defaults[action.dest] = value
    return defaults


_BOOLEAN_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def load_environment(env_file: str | None) -> None:
    if env_file and os.path.exists(env_file):
        load_dotenv(dotenv_path=env_file)
        logger.info(f"Environment variables loaded from {env_file}")
    else:
        logger.debug(f"Environment file '{env_file}' not found. Skipping environment loading.")


def load_config_file(path: str) -> dict[str, str]:
    """
    Reads a key=value configuration file.

    Keys may use dashes or underscores; they are normalised to argparse
    destinations (``window-start`` -> ``window_start``).
    """
    if not os.path.isfile(path):
        raise InputNotFoundError(f"No such configuration file: '{path}'")
    values = dotenv_values(path)
    normalised = {}
    for key, value in values.items():
        if value is None:
            raise ConfigurationError(f"Configuration key '{key}' in {path} has no value")
        normalised[key.strip().lstrip("-").replace("-", "_")] = value
    return normalised


def resolve_seed(seed: Any) -> int:
    """Returns the explicit seed, else ``RTBUST_SEED``, else 0."""
    if seed is None:
        seed = os.environ.get(SEED_ENV_VAR)
        if seed is None:
            logger.info(f"No seed given and {SEED_ENV_VAR} unset, using seed 0")
            return 0
        logger.info(f"Seed taken from {SEED_ENV_VAR}")
    try:
        value = int(seed)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Seed must be an integer, got {seed!r}") from e
    if value < 0 or value >= 2 ** 64:
        raise ConfigurationError(f"Seed must fit in an unsigned 64-bit integer, got {value}")
    return value


def auto_import_modules(base_package: str, targets: list[str]):
    """
    Automatically imports specified Python modules (e.g., tools.py)
    from each subpackage of base_package.
    """
    package = importlib.import_module(base_package)
    package_path = package.__path__[0]

    for submodule in sorted(os.listdir(package_path)):
        sub_path = os.path.join(package_path, submodule)

        if not os.path.isdir(sub_path) or submodule.startswith("__"):
            continue

        for target in targets:
            module_name = f"{base_package}.{submodule}.{target}"
            try:
                importlib.import_module(module_name)
                logger.debug(f"Imported: {module_name}")
            except ModuleNotFoundError as e:
                if e.name != module_name:
                    raise
                logger.debug(f"Skipping {module_name} (not found)")


cli = CommandRegistry("rtbust")
