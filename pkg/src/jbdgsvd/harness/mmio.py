"""Matrix Market reader and writer (real/integer, general/symmetric).

Hand-written rather than scipy.io.mmread so that malformed input is
reported with its line number and complex data is rejected explicitly.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ParseError, Unsupported
from ..sparse import CsrMatrix

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "integer", "double")
_SYMMETRY = ("general", "symmetric")


def _parse_header(line: str):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    fmt, fld, sym = (x.lower() for x in parts[2:])
    if fmt not in _FORMATS:
        raise ParseError(f"unknown format {fmt!r}", 1)
    if fld == "complex":
        raise Unsupported("complex Matrix Market data is not supported")
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field {fld!r}", 1)
    if sym not in _SYMMETRY:
        if sym in ("skew-symmetric", "hermitian"):
            raise Unsupported(f"symmetry {sym!r} is not supported")
        raise ParseError(f"unknown symmetry {sym!r}", 1)
    return fmt, sym


def _ints(tokens, lineno, count):
    if len(tokens) != count:
        raise ParseError(f"expected {count} fields, got {len(tokens)}", lineno)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError("expected integers", lineno) from None


def _float(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad value {token!r}", lineno) from None


def read_matrix_market(path) -> CsrMatrix:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    fmt, sym = _parse_header(lines[0])

    # (line number, tokens) for every non-comment, non-blank line after the header
    body = [(j + 1, ln.split()) for j, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line", len(lines))
    size_line, size_tokens = body[0]
    entries = body[1:]

    if fmt == "coordinate":
        nrows, ncols, nnz = _ints(size_tokens, size_line, 3)
        if min(nrows, ncols, nnz) < 0:
            raise ParseError("negative size", size_line)
        if len(entries) != nnz:
            last = entries[-1][0] if entries else size_line
            raise ParseError(f"expected {nnz} entries, found {len(entries)}", last)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for t, (lineno, tok) in enumerate(entries):
            if len(tok) != 3:
                raise ParseError(f"expected 'row col value', got {len(tok)} fields", lineno)
            i, j = _ints(tok[:2], lineno, 2)
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ParseError(f"index ({i}, {j}) outside {nrows} x {ncols}", lineno)
            if sym == "symmetric" and j > i:
                raise ParseError("symmetric storage must hold the lower triangle only", lineno)
            rows[t], cols[t], vals[t] = i - 1, j - 1, _float(tok[2], lineno)
    else:
        nrows, ncols = _ints(size_tokens, size_line, 2)
        if min(nrows, ncols) < 0:
            raise ParseError("negative size", size_line)
        if sym == "symmetric":
            if nrows != ncols:
                raise ParseError("symmetric array must be square", size_line)
            pos = [(i, j) for j in range(ncols) for i in range(j, nrows)]
        else:
            pos = [(i, j) for j in range(ncols) for i in range(nrows)]
        if len(entries) != len(pos):
            last = entries[-1][0] if entries else size_line
            raise ParseError(f"expected {len(pos)} values, found {len(entries)}", last)
        rows = np.empty(len(pos), dtype=np.int64)
        cols = np.empty(len(pos), dtype=np.int64)
        vals = np.empty(len(pos))
        for t, ((lineno, tok), (i, j)) in enumerate(zip(entries, pos)):
            if len(tok) != 1:
                raise ParseError(f"expected one value, got {len(tok)} fields", lineno)
            rows[t], cols[t], vals[t] = i, j, _float(tok[0], lineno)
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]

    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return CsrMatrix.from_coo(nrows, ncols, rows, cols, vals)


def write_matrix_market(path, M: CsrMatrix, comment: str | None = None) -> None:
    """Coordinate/real/general output; values use repr so a re-read is exact."""
    lines = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        lines.extend("% " + c for c in comment.splitlines())
    lines.append(f"{M.nrows} {M.ncols} {M.nnz}")
    for i in range(M.nrows):
        for t in range(M.row_starts[i], M.row_starts[i + 1]):
            lines.append(f"{i + 1} {M.col_indices[t] + 1} {float(M.values[t])!r}")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
