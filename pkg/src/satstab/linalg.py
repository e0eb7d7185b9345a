"""Dense real matrix services for small symmetric and block-structured LMI work.

Matrices are plain ``numpy.ndarray`` values. Symmetric matrices are produced
by :func:`sym_part`, so floating-point asymmetry never reaches an eigenvalue
routine. Everything here targets dimensions up to a few hundred; there is no
sparse storage and no complex arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, ShapeError, SingularBlock

__all__ = [
    "TRANSPOSE",
    "BlockSpec",
    "as_matrix",
    "assemble",
    "is_pd",
    "read_matrices",
    "read_matrix",
    "schur_complement",
    "sym_eig",
    "sym_part",
    "write_matrices",
    "write_matrix",
]


def as_matrix(value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float array, optionally checking its shape."""
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if M.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ShapeError("matrix entries must be finite")
    if rows is not None and M.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise ShapeError(f"expected {cols} columns, got {M.shape[1]}")
    return M


def sym_part(M) -> np.ndarray:
    """Exactly symmetric part (M + M^T)/2 of a square matrix."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"square matrix required, got {M.shape}")
    return 0.5 * (M + M.T)


def sym_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Raises :class:`NumericalError` if the eigenvalue iteration fails.
    """
    S = sym_part(M)
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolve failed: {exc}") from exc
    return w, V


def is_pd(M, margin: float = 0.0) -> bool:
    """True iff the symmetric part of M satisfies M - margin*I > 0 (Cholesky test)."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    S = sym_part(M)
    try:
        np.linalg.cholesky(S - margin * np.eye(S.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def schur_complement(M, split: int) -> np.ndarray:
    """Schur complement M11 - M12 M22^-1 M21 w.r.t. the trailing block.

    ``split`` is the size of the leading block; the trailing block has size
    dim - split and must be invertible, otherwise :class:`SingularBlock`.
    """
    S = sym_part(M)
    d = S.shape[0]
    if not 0 < split < d:
        raise ShapeError(f"split must lie in (0, {d}), got {split}")
    M11 = S[:split, :split]
    M12 = S[:split, split:]
    M22 = S[split:, split:]
    try:
        if np.linalg.cond(M22) > 1e14:
            raise SingularBlock("trailing block is numerically singular")
        X = np.linalg.solve(M22, M12.T)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(f"trailing block is singular: {exc}") from exc
    if not np.all(np.isfinite(X)):
        raise SingularBlock("trailing block solve produced non-finite values")
    return sym_part(M11 - M12 @ X)


class _Transpose:
    """Sentinel: take the transpose of the mirror block."""

    def __repr__(self):
        return "TRANSPOSE"


TRANSPOSE = _Transpose()


@dataclass
class BlockSpec:
    """Grid of blocks to assemble into one matrix.

    Each entry of ``blocks`` is a matrix, ``None`` for a zero block, or
    :data:`TRANSPOSE` to use the transpose of the mirror entry (j, i).
    """

    row_sizes: Sequence[int]
    col_sizes: Sequence[int]
    blocks: Sequence[Sequence[object]]


def assemble(spec: BlockSpec) -> np.ndarray:
    """Assemble a BlockSpec into a dense matrix with exact entry placement."""
    rs = [int(r) for r in spec.row_sizes]
    cs = [int(c) for c in spec.col_sizes]
    if any(r < 1 for r in rs) or any(c < 1 for c in cs):
        raise ShapeError("block sizes must be positive")
    if len(spec.blocks) != len(rs):
        raise ShapeError(f"expected {len(rs)} block rows, got {len(spec.blocks)}")
    out = np.zeros((sum(rs), sum(cs)))
    roff = np.concatenate([[0], np.cumsum(rs)])
    coff = np.concatenate([[0], np.cumsum(cs)])
    for i, row in enumerate(spec.blocks):
        if len(row) != len(cs):
            raise ShapeError(f"block row {i} has {len(row)} entries, expected {len(cs)}")
        for j, blk in enumerate(row):
            if blk is None:
                continue
            if blk is TRANSPOSE:
                mirror = spec.blocks[j][i]
                if mirror is None:
                    continue
                if mirror is TRANSPOSE:
                    raise ShapeError(f"blocks ({i},{j}) and ({j},{i}) are both transpose references")
                B = as_matrix(mirror).T
            else:
                B = as_matrix(blk)
            if B.shape != (rs[i], cs[j]):
                raise ShapeError(f"block ({i},{j}) has shape {B.shape}, expected {(rs[i], cs[j])}")
            out[roff[i]:roff[i + 1], coff[j]:coff[j + 1]] = B
    return out


# ---------------------------------------------------------------------------
# Matrix text format: header line "rows cols", then row-major entries.
# ---------------------------------------------------------------------------

def write_matrix(M) -> str:
    M = as_matrix(M)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_matrix(text: str) -> np.ndarray:
    M, rest = _read_one(text)
    if rest.strip():
        raise ShapeError("trailing content after matrix")
    return M


def write_matrices(mats: Sequence[np.ndarray]) -> str:
    return "".join(write_matrix(M) for M in mats)


def read_matrices(text: str, count: int | None = None) -> list[np.ndarray]:
    out = []
    rest = text
    while rest.strip():
        M, rest = _read_one(rest)
        out.append(M)
    if count is not None and len(out) != count:
        raise ShapeError(f"expected {count} matrices, found {len(out)}")
    return out


def _read_one(text: str) -> tuple[np.ndarray, str]:
    tokens = text.split()
    if len(tokens) < 2:
        raise ShapeError("matrix text must start with 'rows cols'")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ShapeError(f"bad matrix header: {tokens[:2]}") from exc
    need = rows * cols
    if len(tokens) < 2 + need:
        raise ShapeError(f"matrix body has {len(tokens) - 2} entries, expected {need}")
    try:
        vals = [float(t) for t in tokens[2:2 + need]]
    except ValueError as exc:
        raise ShapeError(f"bad matrix entry: {exc}") from exc
    M = np.array(vals).reshape(rows, cols)
    rest = " ".join(tokens[2 + need:])
    return as_matrix(M), rest
