"""Sparse matrix storage, Matrix Market exchange and CSV trace output."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "CsrMatrix",
    "MatrixMarketError",
    "UnsupportedFormatError",
    "SchemaError",
    "load_matrix_market",
    "write_matrix_market",
    "write_csv_trace",
    "format_float",
]


class MatrixMarketError(ValueError):
    """Raised for a malformed Matrix Market file."""

    def __init__(self, msg: str, line: int | None = None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line


class UnsupportedFormatError(MatrixMarketError):
    """Raised for well-formed files this reader does not handle (complex, pattern)."""


class SchemaError(ValueError):
    """Raised when CSV records do not share one header set."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable compressed-sparse-row matrix of 64-bit floats.

    Column indices are strictly increasing within each row, so every
    matrix-vector product accumulates in ascending column order and is
    reproducible bit for bit.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offs = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative dimension")
        if offs.shape != (self.nrows + 1,):
            raise ValueError("row_offsets must have length nrows + 1")
        if offs[0] != 0 or offs[-1] != vals.size or cols.size != vals.size:
            raise ValueError("row_offsets inconsistent with stored entries")
        if np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if cols.size:
            if cols.min() < 0 or cols.max() >= self.ncols:
                raise ValueError("column index out of range")
            # strictly increasing inside each row: a non-increase is only
            # allowed where a new row starts
            starts = np.zeros(cols.size, dtype=bool)
            starts[offs[:-1][np.diff(offs) > 0]] = True
            step = np.diff(cols)
            if np.any((step <= 0) & ~starts[1:]):
                raise ValueError("column indices must increase strictly within a row")
        for arr in (offs, cols, vals):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", offs)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "CsrMatrix":
        """Build from triplets, summing duplicates and keeping explicit zeros."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= nrows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("column index out of range")
        # stable sort keeps the file order of duplicates, so the summation
        # order is deterministic
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(new) - 1
            summed = np.zeros(int(group[-1]) + 1)
            np.add.at(summed, group, vals)
            rows, cols, vals = rows[new], cols[new], summed
        offs = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(offs, rows + 1, 1)
        return cls(nrows, ncols, np.cumsum(offs), cols, vals)

    @classmethod
    def from_dense(cls, mat, keep_zeros: bool = False) -> "CsrMatrix":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError("expected a 2-D array")
        if keep_zeros:
            rows, cols = np.indices(mat.shape).reshape(2, -1)
        else:
            rows, cols = np.nonzero(mat)
        return cls.from_coo(mat.shape[0], mat.shape[1], rows, cols, mat[rows, cols])

    @classmethod
    def from_scipy(cls, mat) -> "CsrMatrix":
        coo = sp.coo_array(mat)
        return cls.from_coo(coo.shape[0], coo.shape[1], coo.row, coo.col, coo.data)

    @cached_property
    def _csr(self) -> sp.csr_array:
        return sp.csr_array(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape
        )

    def to_scipy(self) -> sp.csr_array:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise ValueError(f"expected vector of length {self.ncols}, got {x.shape}")
        return self._csr @ x

    def rmatvec(self, y) -> np.ndarray:
        """Transposed product; each output entry accumulates in ascending row order."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.nrows,):
            raise ValueError(f"expected vector of length {self.nrows}, got {y.shape}")
        return self._csr.T @ y

    def __eq__(self, other):
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "integer", "double")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _parse_header(line: str):
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket":
        raise MatrixMarketError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise UnsupportedFormatError(f"object type {obj!r} is not supported", 1)
    if fmt not in _FORMATS:
        raise MatrixMarketError(f"unknown format {fmt!r}", 1)
    if field in ("complex", "pattern"):
        raise UnsupportedFormatError(f"{field} field is not supported", 1)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unknown field {field!r}", 1)
    if symmetry == "hermitian":
        raise UnsupportedFormatError("hermitian symmetry requires a complex field", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unknown symmetry {symmetry!r}", 1)
    return fmt, symmetry


def load_matrix_market(path) -> CsrMatrix:
    """Read a real Matrix Market file (coordinate or array) into CSR.

    Duplicate coordinate entries are summed, explicit zeros are kept and
    symmetric or skew-symmetric storage is expanded to general form.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    fmt, symmetry = _parse_header(lines[0])

    body = []
    for lineno, text in enumerate(lines[1:], start=2):
        stripped = text.strip()
        if stripped and not stripped.startswith("%"):
            body.append((lineno, stripped.split()))
    if not body:
        raise MatrixMarketError("missing size line", len(lines))

    size_line, size_tokens = body[0]
    try:
        sizes = [int(t) for t in size_tokens]
    except ValueError:
        raise MatrixMarketError("size line must hold integers", size_line) from None
    expected = 3 if fmt == "coordinate" else 2
    if len(sizes) != expected or min(sizes) < 0:
        raise MatrixMarketError(f"size line must hold {expected} nonnegative integers", size_line)
    nrows, ncols = sizes[0], sizes[1]
    if symmetry != "general" and nrows != ncols:
        raise MatrixMarketError(f"{symmetry} matrix must be square", size_line)
    entries = body[1:]

    if fmt == "coordinate":
        nnz = sizes[2]
        if len(entries) != nnz:
            raise MatrixMarketError(
                f"expected {nnz} entries, found {len(entries)}",
                entries[-1][0] if entries else size_line,
            )
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for idx, (lineno, tokens) in enumerate(entries):
            if len(tokens) != 3:
                raise MatrixMarketError("coordinate entry must be 'row col value'", lineno)
            try:
                r, c, v = int(tokens[0]), int(tokens[1]), float(tokens[2])
            except ValueError:
                raise MatrixMarketError("unparsable entry", lineno) from None
            if not (1 <= r <= nrows and 1 <= c <= ncols):
                raise MatrixMarketError(f"index ({r}, {c}) out of range", lineno)
            if symmetry != "general" and r < c:
                raise MatrixMarketError("symmetric storage must use the lower triangle", lineno)
            if symmetry == "skew-symmetric" and r == c:
                raise MatrixMarketError("skew-symmetric storage has no diagonal", lineno)
            rows[idx], cols[idx], vals[idx] = r - 1, c - 1, v
    else:
        if symmetry == "general":
            positions = [(i, j) for j in range(ncols) for i in range(nrows)]
        elif symmetry == "symmetric":
            positions = [(i, j) for j in range(ncols) for i in range(j, nrows)]
        else:
            positions = [(i, j) for j in range(ncols) for i in range(j + 1, nrows)]
        if len(entries) != len(positions):
            raise MatrixMarketError(
                f"expected {len(positions)} values, found {len(entries)}",
                entries[-1][0] if entries else size_line,
            )
        rows = np.array([p[0] for p in positions], dtype=np.int64)
        cols = np.array([p[1] for p in positions], dtype=np.int64)
        vals = np.empty(len(positions))
        for idx, (lineno, tokens) in enumerate(entries):
            if len(tokens) != 1:
                raise MatrixMarketError("array entry must be a single value", lineno)
            try:
                vals[idx] = float(tokens[0])
            except ValueError:
                raise MatrixMarketError("unparsable value", lineno) from None

    if symmetry != "general":
        off = rows != cols
        sign = -1.0 if symmetry == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    return CsrMatrix.from_coo(nrows, ncols, rows, cols, vals)


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return "%.16e" % x


def write_matrix_market(mat: CsrMatrix, path, comment: str | None = None) -> None:
    """Write ``mat`` as a general real coordinate file (1-based indices)."""
    rows = np.repeat(np.arange(mat.nrows), np.diff(mat.row_offsets))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for text in comment.splitlines():
                fh.write(f"% {text}\n")
        fh.write(f"{mat.nrows} {mat.ncols} {mat.nnz}\n")
        for r, c, v in zip(rows, mat.col_indices, mat.values):
            fh.write(f"{r + 1} {c + 1} {format_float(v)}\n")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return format_float(value)
    return str(value)


def write_csv_trace(
    rows: Iterable[Mapping[str, object]],
    path,
    fieldnames: Sequence[str] | None = None,
) -> None:
    """Write named records as UTF-8 CSV with round-trip exact floats.

    ``fieldnames`` fixes the header (and is required to get a header line
    out of an empty ``rows``); otherwise the first record's keys are used.
    Every record must carry exactly the header keys.
    """
    rows = list(rows)
    header = list(fieldnames) if fieldnames is not None else (list(rows[0]) if rows else [])
    for idx, rec in enumerate(rows):
        if set(rec) != set(header):
            raise SchemaError(f"record {idx} has keys {sorted(rec)}, expected {sorted(header)}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in rows:
            writer.writerow([_cell(rec[key]) for key in header])
