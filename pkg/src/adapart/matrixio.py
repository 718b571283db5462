"""Loading, saving, validating and generating non-negative square matrices.

Matrices are plain dense ``float64`` numpy arrays. :func:`as_matrix` is the
single validation gate; every public entry point of the package passes its
input through it, so the rest of the code can assume a finite, non-negative,
square, read-only array.

Only the Matrix Market exchange format is supported. Coordinate and array
storage are read; real, integer and pattern fields; general and symmetric
symmetry. Pattern entries become weight 1.0, so an adjacency matrix directly
defines a weighted cycle-cover distribution.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateEntry,
    InvalidMatrix,
    MalformedHeader,
    MatrixFormatError,
    NegativeEntry,
    NonSquare,
)

__all__ = [
    "GeneratorKind",
    "GeneratorSpec",
    "as_matrix",
    "block_diagonal_matrix",
    "block_layout",
    "generate",
    "read_matrix_market",
    "uniform_matrix",
    "write_matrix_market",
]


def as_matrix(a) -> np.ndarray:
    """Validate ``a`` and return it as a read-only ``float64`` square array.

    Raises
    ------
    InvalidMatrix
        If ``a`` is not 2-d, not square, empty, or has a negative or
        non-finite entry.
    """
    m = np.array(a, dtype=np.float64, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"expected a square 2-d matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise InvalidMatrix("matrix dimension must be at least 1")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    if np.any(m < 0):
        raise InvalidMatrix("matrix has negative entries")
    m.setflags(write=False)
    return m


# ---------------------------------------------------------------------------
# Matrix Market

_KINDS = ("coordinate", "array")
_FIELDS = ("real", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric")


def _parse_header(line: str):
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket" or tokens[1].lower() != "matrix":
        raise MalformedHeader("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    kind, field, symmetry = (t.lower() for t in tokens[2:])
    if kind not in _KINDS:
        raise MalformedHeader(f"unsupported format {kind!r}", 1)
    if field not in _FIELDS:
        raise MalformedHeader(f"unsupported field {field!r}", 1)
    if symmetry not in _SYMMETRIES:
        raise MalformedHeader(f"unsupported symmetry {symmetry!r}", 1)
    if kind == "array" and field == "pattern":
        raise MalformedHeader("pattern field requires coordinate format", 1)
    return kind, field, symmetry


def _parse_value(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MatrixFormatError(f"cannot parse value {token!r}", lineno) from None
    if not np.isfinite(value):
        raise MatrixFormatError(f"non-finite value {token!r}", lineno)
    if value < 0:
        raise NegativeEntry(f"negative entry {token}", lineno)
    return value


def _parse_int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise MatrixFormatError(f"expected an integer, got {token!r}", lineno) from None


def read_matrix_market(path) -> np.ndarray:
    """Read a Matrix Market file into a dense non-negative square matrix.

    Symmetric storage is mirrored across the diagonal, pattern entries become
    1.0 and unlisted coordinate entries are 0.0. Duplicate coordinates are an
    error rather than being summed.

    Raises
    ------
    MalformedHeader, NonSquare, NegativeEntry, DuplicateEntry, MatrixFormatError
        Each carries the 1-based number of the first offending line.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedHeader("empty file", 1)
    kind, field, symmetry = _parse_header(lines[0])

    # skip comments and blank lines, remembering original line numbers
    body = [
        (i + 1, ln.split())
        for i, ln in enumerate(lines[1:], start=1)
        if ln.strip() and not ln.lstrip().startswith("%")
    ]
    if not body:
        raise MalformedHeader("missing size line", len(lines))
    size_line, size_tokens = body[0]
    data = body[1:]

    if kind == "coordinate":
        if len(size_tokens) != 3:
            raise MalformedHeader("coordinate size line needs 'rows cols nnz'", size_line)
        rows, cols, nnz = (_parse_int(t, size_line) for t in size_tokens)
    else:
        if len(size_tokens) != 2:
            raise MalformedHeader("array size line needs 'rows cols'", size_line)
        rows, cols = (_parse_int(t, size_line) for t in size_tokens)
        nnz = None
    if rows != cols:
        raise NonSquare(f"matrix is {rows}x{cols}", size_line)
    if rows < 1:
        raise MatrixFormatError("matrix dimension must be at least 1", size_line)
    n = rows
    m = np.zeros((n, n), dtype=np.float64)

    if kind == "coordinate":
        if len(data) != nnz:
            raise MatrixFormatError(f"expected {nnz} entries, found {len(data)}", size_line)
        seen = set()
        want = 2 if field == "pattern" else 3
        for lineno, tokens in data:
            if len(tokens) != want:
                raise MatrixFormatError(f"expected {want} tokens per entry", lineno)
            i = _parse_int(tokens[0], lineno) - 1
            j = _parse_int(tokens[1], lineno) - 1
            if not (0 <= i < n and 0 <= j < n):
                raise MatrixFormatError(f"index ({i + 1}, {j + 1}) out of range", lineno)
            value = 1.0 if field == "pattern" else _parse_value(tokens[2], lineno)
            # symmetric files should list the lower triangle, but upper-triangle
            # files exist in the wild; (i, j) and (j, i) denote the same entry
            key = (max(i, j), min(i, j)) if symmetry == "symmetric" else (i, j)
            if key in seen:
                raise DuplicateEntry(f"duplicate entry ({i + 1}, {j + 1})", lineno)
            seen.add(key)
            m[i, j] = value
            if symmetry == "symmetric":
                m[j, i] = value
    else:
        if symmetry == "general":
            positions = [(i, j) for j in range(n) for i in range(n)]
        else:
            positions = [(i, j) for j in range(n) for i in range(j, n)]
        if len(data) != len(positions):
            raise MatrixFormatError(
                f"expected {len(positions)} array values, found {len(data)}", size_line
            )
        for (i, j), (lineno, tokens) in zip(positions, data):
            if len(tokens) != 1:
                raise MatrixFormatError("expected one value per line", lineno)
            value = _parse_value(tokens[0], lineno)
            m[i, j] = value
            if symmetry == "symmetric":
                m[j, i] = value
    m.setflags(write=False)
    return m


def write_matrix_market(m, path) -> None:
    """Write ``m`` as a ``coordinate real general`` Matrix Market file.

    Only non-zero entries are listed. Values are written with 17 significant
    digits so that reading the file back reproduces ``m`` bit for bit.
    """
    m = as_matrix(m)
    n = m.shape[0]
    # Matrix Market coordinate files are conventionally column-major
    cols, rows = np.nonzero(m.T)
    out = ["%%MatrixMarket matrix coordinate real general", f"{n} {n} {len(rows)}"]
    out.extend(f"{i + 1} {j + 1} {m[i, j]:.17g}" for i, j in zip(rows, cols))
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Generators


class GeneratorKind(str, enum.Enum):
    UNIFORM = "uniform"
    BLOCK_DIAGONAL = "block-diag"


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a random test matrix.

    ``k`` is the block size and is only meaningful for block-diagonal
    matrices, which consist of ``n // k`` dense ``k x k`` blocks followed by
    one ``(n % k) x (n % k)`` block, all drawn uniformly from [0, 1).
    """

    kind: GeneratorKind
    n: int
    seed: int = 0
    k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GeneratorKind(self.kind))
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.kind is GeneratorKind.BLOCK_DIAGONAL:
            if self.k is None or not 1 <= self.k <= self.n:
                raise ValueError("block-diagonal matrices need 1 <= k <= n")


def block_layout(n: int, k: int) -> list[tuple[int, int]]:
    """Return ``(start, size)`` of each diagonal block for dimension ``n``."""
    blocks = [(start, k) for start in range(0, (n // k) * k, k)]
    if n % k:
        blocks.append(((n // k) * k, n % k))
    return blocks


def generate(spec: GeneratorSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    if spec.kind is GeneratorKind.UNIFORM:
        m = rng.random((spec.n, spec.n))
    else:
        m = np.zeros((spec.n, spec.n))
        for start, size in block_layout(spec.n, spec.k):
            m[start:start + size, start:start + size] = rng.random((size, size))
    m.setflags(write=False)
    return m


def uniform_matrix(n: int, seed: int = 0) -> np.ndarray:
    return generate(GeneratorSpec(GeneratorKind.UNIFORM, n, seed))


def block_diagonal_matrix(n: int, k: int, seed: int = 0) -> np.ndarray:
    return generate(GeneratorSpec(GeneratorKind.BLOCK_DIAGONAL, n, seed, k))
