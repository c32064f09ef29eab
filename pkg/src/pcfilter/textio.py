"""Line-oriented text formats for paths, blocks, matrix series and reports.

Every numeric file is plain text; ``#`` starts a comment and blank lines are
ignored.  Floats are written with ``repr`` so values survive a round trip
exactly and identical inputs give byte-identical files.

* complex column: one ``re im`` pair per line (sampled paths and weights);
* blocked sequence: one block per line, ``K`` pairs per line;
* matrix series: a header ``<kind> K <K> M <M> <F|L> <n>`` then one
  ``K x M`` matrix per line in row-major ``re im`` pairs;
* vector series: a header ``<kind> K <K> J <J>`` then one ``K``-vector per line;
* key-value: ``key = value`` per line (configs, class files, reports).
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .blocking import BlockedSequence
from .errors import PCFilterError

__all__ = [
    "FormatError",
    "read_complex_column",
    "write_complex_column",
    "read_blocked",
    "write_blocked",
    "read_matrix_series",
    "write_matrix_series",
    "read_vector_series",
    "write_vector_series",
    "read_key_values",
    "format_key_values",
    "format_json_like",
    "parse_report",
    "format_float",
]

PathLike = Union[str, os.PathLike]
MATRIX_KINDS = ("density", "ma")
VECTOR_KINDS = ("weights", "filter", "sequence")


class FormatError(PCFilterError, ValueError):
    """A file is missing or does not parse; the message names the file."""


def format_float(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0.0"  # drop the sign of negative zero
    return repr(x)


def _pairs(values: Iterable[complex]) -> str:
    return " ".join(f"{format_float(v.real)} {format_float(v.imag)}" for v in values)


def _read_lines(path: PathLike) -> list[tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    out = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((n, line))
    return out


def _floats(path, n, line) -> list[float]:
    try:
        return [float(tok) for tok in line.split()]
    except ValueError:
        raise FormatError(f"{path}:{n}: expected numbers, got {line!r}") from None


def _complex_row(path, n, line, expected: int) -> np.ndarray:
    vals = _floats(path, n, line)
    if len(vals) != 2 * expected:
        raise FormatError(f"{path}:{n}: expected {expected} 're im' pairs, got {len(vals)} numbers")
    arr = np.asarray(vals)
    return arr[0::2] + 1j * arr[1::2]


def _write(path: PathLike, lines: list[str]):
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc.strerror or exc}") from None


# complex columns and blocked sequences


def read_complex_column(path: PathLike) -> np.ndarray:
    """One complex value per line as ``re im`` (a lone number is read as real)."""
    values = []
    for n, line in _read_lines(path):
        vals = _floats(path, n, line)
        if len(vals) == 1:
            vals.append(0.0)
        if len(vals) != 2:
            raise FormatError(f"{path}:{n}: expected 're im', got {len(vals)} numbers")
        values.append(complex(vals[0], vals[1]))
    return np.asarray(values, dtype=complex)


def write_complex_column(path: PathLike, values) -> None:
    _write(path, [_pairs([v]) for v in np.asarray(values, dtype=complex).ravel()])


def read_blocked(path: PathLike) -> list[BlockedSequence]:
    """Blocked sequences; lines ``# path <i>`` separate consecutive paths."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    paths: list[list[np.ndarray]] = [[]]
    K = None
    for n, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("#"):
            if stripped[1:].split()[:1] == ["path"] and paths[-1]:
                paths.append([])
            continue
        if not stripped:
            continue
        vals = _floats(path, n, stripped)
        if len(vals) % 2:
            raise FormatError(f"{path}:{n}: odd number of values in a block")
        if K is None:
            K = len(vals) // 2
        paths[-1].append(_complex_row(path, n, stripped, K))
    return [BlockedSequence(np.vstack(p)) for p in paths if p]


def write_blocked(path: PathLike, sequences) -> None:
    if isinstance(sequences, BlockedSequence):
        sequences = [sequences]
    lines = [f"# blocked K {sequences[0].K}"] if sequences else []
    for i, seq in enumerate(sequences):
        if len(sequences) > 1:
            lines.append(f"# path {i}")
        lines.extend(_pairs(row) for row in seq.blocks)
    _write(path, lines)


# matrix and vector series


def _header(path, lines, kinds) -> tuple[str, dict]:
    if not lines:
        raise FormatError(f"{path}: empty file")
    n, line = lines[0]
    tokens = line.split()
    if tokens[0] not in kinds or len(tokens) % 2 != 1:
        raise FormatError(f"{path}:{n}: expected header '<{'|'.join(kinds)}> key value ...', got {line!r}")
    try:
        fields = {tokens[i]: int(tokens[i + 1]) for i in range(1, len(tokens), 2)}
    except ValueError:
        raise FormatError(f"{path}:{n}: header values must be integers") from None
    return tokens[0], fields


def read_matrix_series(path: PathLike) -> tuple[str, np.ndarray]:
    """Return ``(kind, array (n, K, M))`` from a ``density`` or ``ma`` file."""
    lines = _read_lines(path)
    kind, fields = _header(path, lines, MATRIX_KINDS)
    try:
        K, M = fields["K"], fields.get("M", fields["K"])
        count = fields["F"] if kind == "density" else fields["L"] + 1
    except KeyError as exc:
        raise FormatError(f"{path}: header is missing {exc.args[0]}") from None
    records = lines[1:]
    if len(records) != count:
        raise FormatError(f"{path}: header announces {count} records, found {len(records)}")
    out = np.empty((count, K, M), dtype=complex)
    for i, (n, line) in enumerate(records):
        out[i] = _complex_row(path, n, line, K * M).reshape(K, M)
    return kind, out


def write_matrix_series(path: PathLike, kind: str, values: np.ndarray) -> None:
    if kind not in MATRIX_KINDS:
        raise ValueError(f"kind must be one of {MATRIX_KINDS}")
    values = np.asarray(values, dtype=complex)
    n, K, M = values.shape
    size = f"F {n}" if kind == "density" else f"L {n - 1}"
    _write(path, [f"{kind} K {K} M {M} {size}"] + [_pairs(v.ravel()) for v in values])


def read_vector_series(path: PathLike, kind: str | None = None) -> np.ndarray:
    """Return the ``(J + 1, K)`` array of a ``weights``/``filter``/``sequence`` file."""
    lines = _read_lines(path)
    got, fields = _header(path, lines, VECTOR_KINDS)
    if kind is not None and got != kind:
        raise FormatError(f"{path}: expected a '{kind}' file, found '{got}'")
    try:
        K, J = fields["K"], fields["J"]
    except KeyError as exc:
        raise FormatError(f"{path}: header is missing {exc.args[0]}") from None
    if len(lines) - 1 != J + 1:
        raise FormatError(f"{path}: header announces {J + 1} records, found {len(lines) - 1}")
    return np.vstack([_complex_row(path, n, line, K) for n, line in lines[1:]])


def write_vector_series(path: PathLike, kind: str, values: np.ndarray) -> None:
    if kind not in VECTOR_KINDS:
        raise ValueError(f"kind must be one of {VECTOR_KINDS}")
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    _write(path, [f"{kind} K {values.shape[1]} J {values.shape[0] - 1}"] + [_pairs(v) for v in values])


# key-value text


def read_key_values(path: PathLike) -> dict[str, str]:
    """``key = value`` lines; later keys override earlier ones."""
    out = {}
    for n, line in _read_lines(path):
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise FormatError(f"{path}:{n}: empty key")
        out[key] = value
    return out


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_format_value(x) for x in np.asarray(v).ravel().tolist())
    if v is None:
        return "none"
    return str(v)


def format_key_values(report: dict) -> str:
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in report.items())


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in np.asarray(v).ravel().tolist()]
    return None if v is None else str(v)


def format_json_like(report: dict) -> str:
    """The key-value schema as one JSON object."""
    return json.dumps({k: _json_value(v) for k, v in report.items()}) + "\n"


def _parse_scalar(token: str):
    if token in ("true", "false"):
        return token == "true"
    if token == "none":
        return None
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_key_values` (numbers, booleans, lists, strings)."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        tokens = value.split()
        parsed = [_parse_scalar(t) for t in tokens]
        if len(parsed) > 1 and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in parsed):
            out[key] = parsed
        else:
            out[key] = parsed[0] if len(parsed) == 1 else value
    return out
