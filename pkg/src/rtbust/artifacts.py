"""
Plain-text tensor files used for trained models and fitted projectors.

Layout::

    RTBUST-VAE v1 d=8 h=32 L=512
    @enc_W 33 128
    0.0123 -0.5 ...          (one line per row, base-10 floats)
    @norm_stats 2
    1.5 2.25

The first line holds the magic, the format version and key=value fields.
Each tensor block starts with ``@<name>`` followed by its shape; 1-D tensors
take a single line. Floats are written with their shortest round-trip
representation, so save -> load -> save is byte-identical.
"""
import logging
from pathlib import Path
from typing import TextIO

import numpy as np

from rtbust.exceptions import IncompatibleArtifactError, InputNotFoundError

logger = logging.getLogger(__name__)

FORMAT_VERSION = "v1"


def _format_row(row: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in row)


def write_tensor_file(stream: TextIO, magic: str, fields: dict[str, int | str],
                      tensors: dict[str, np.ndarray]) -> None:
    header = [magic, FORMAT_VERSION, *(f"{key}={value}" for key, value in fields.items())]
    stream.write(" ".join(header) + "\n")
    for name, tensor in tensors.items():
        array = np.asarray(tensor, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        if array.ndim > 2:
            raise ValueError(f"tensor {name} has {array.ndim} dimensions, at most 2 are supported")
        stream.write(f"@{name} {' '.join(str(s) for s in array.shape)}\n")
        if array.ndim == 1:
            stream.write(_format_row(array) + "\n")
        else:
            for row in array:
                stream.write(_format_row(row) + "\n")


def save_tensor_file(path: str | Path, magic: str, fields: dict[str, int | str],
                     tensors: dict[str, np.ndarray]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as stream:
        write_tensor_file(stream, magic, fields, tensors)


def parse_header(line: str, magic: str) -> dict[str, str]:
    parts = line.split()
    if len(parts) < 2 or parts[0] != magic:
        raise IncompatibleArtifactError(f"expected a '{magic}' file, header reads '{line.strip()[:60]}'")
    if parts[1] != FORMAT_VERSION:
        raise IncompatibleArtifactError(f"{magic} format {parts[1]} is not supported (expected {FORMAT_VERSION})")
    fields = {}
    for part in parts[2:]:
        if "=" not in part:
            raise IncompatibleArtifactError(f"malformed header field '{part}'")
        key, value = part.split("=", 1)
        fields[key] = value
    return fields


def load_tensor_file(path: str | Path, magic: str) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """
    Reads a tensor file.

    Returns:
        tuple: header fields and tensors by name, in file order.

    Raises:
        InputNotFoundError: If the file is missing.
        IncompatibleArtifactError: On wrong magic, version or a corrupted block.
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such model file: '{path}'")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise IncompatibleArtifactError(f"{path} is empty")
    fields = parse_header(lines[0], magic)

    tensors: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if not line.startswith("@"):
            raise IncompatibleArtifactError(f"{path}:{i + 1}: expected a tensor block, got '{line[:40]}'")
        name, *shape_text = line[1:].split()
        try:
            shape = tuple(int(s) for s in shape_text)
        except ValueError as e:
            raise IncompatibleArtifactError(f"{path}:{i + 1}: bad shape for {name}") from e
        n_rows = 1 if len(shape) == 1 else shape[0]
        rows = lines[i + 1:i + 1 + n_rows]
        try:
            values = [[float(x) for x in row.split()] for row in rows]
            array = np.array(values, dtype=np.float64).reshape(shape)
        except ValueError as e:
            raise IncompatibleArtifactError(f"{path}: tensor {name} is corrupted: {e}") from e
        tensors[name] = array
        i += 1 + n_rows
    logger.debug(f"Loaded {len(tensors)} tensors from {path}")
    return fields, tensors


def require_tensors(tensors: dict[str, np.ndarray], expected: dict[str, tuple[int, ...]], source: str) -> None:
    for name, shape in expected.items():
        if name not in tensors:
            raise IncompatibleArtifactError(f"{source} lacks tensor '{name}'")
        if tensors[name].shape != shape:
            raise IncompatibleArtifactError(
                f"{source}: tensor '{name}' has shape {tensors[name].shape}, expected {shape}")
