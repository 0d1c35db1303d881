"""Block matrices assembled from impulse-response (Markov parameter) data.

Markov parameters are 1-indexed throughout: ``M(1) = CB``.  Every builder
takes the step ``t`` and horizon ``T`` of the batch-form LQR problem and
derives its block counts from them, so the index bookkeeping lives here.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataLengthError, DimensionError

PathLike = Union[str, os.PathLike]


@dataclass(frozen=True)
class ImpulseTrajectory:
    """Ordered Markov parameters ``M(1), ..., M(T)``.

    ``entries`` has shape ``(T, l, m)``; ``entries[t - 1]`` is ``M(t)``.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1, 1)
        if arr.ndim != 3:
            raise DimensionError(f"entries must have shape (T, l, m), got {arr.shape}")
        if arr.shape[0] < 1:
            raise DataLengthError("impulse trajectory must hold at least one sample")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_list(cls, mats: Iterable) -> "ImpulseTrajectory":
        return cls(np.array([np.atleast_2d(np.asarray(M, dtype=float)) for M in mats]))

    def __len__(self) -> int:
        return self.entries.shape[0]

    @property
    def l(self) -> int:
        return self.entries.shape[1]

    @property
    def m(self) -> int:
        return self.entries.shape[2]

    @property
    def dims(self) -> Tuple[int, int]:
        return self.l, self.m

    def at(self, t: int) -> np.ndarray:
        """Return ``M(t)`` (1-indexed)."""
        if t < 1 or t > len(self):
            raise DataLengthError(f"M({t}) requested but only M(1:{len(self)}) available")
        return self.entries[t - 1]

    def head(self, length: int) -> "ImpulseTrajectory":
        self.require(length)
        return ImpulseTrajectory(self.entries[:length])

    def column(self, j: int) -> "ImpulseTrajectory":
        """Impulse response of input channel ``j`` (0-based), an ``l x 1`` trajectory."""
        if not 0 <= j < self.m:
            raise DimensionError(f"input column {j} out of range for m={self.m}")
        return ImpulseTrajectory(self.entries[:, :, j : j + 1])

    def require(self, length: int, what: str = "operation") -> None:
        if len(self) < length:
            raise DataLengthError(
                f"{what} needs M(1:{length}) but the trajectory holds only {len(self)} samples"
            )

    # -- CSV -----------------------------------------------------------------

    def header(self) -> list:
        sep = "_" if max(self.l, self.m) > 10 else ""
        return ["t"] + [f"entry_{i}{sep}{j}" for i in range(self.l) for j in range(self.m)]

    def to_csv(self, path: PathLike) -> None:
        with open(path, "w", newline="") as fh:
            write_csv(self, fh)

    @classmethod
    def from_csv(cls, path: PathLike, dims: Optional[Tuple[int, int]] = None) -> "ImpulseTrajectory":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"trajectory file not found: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DataLengthError(f"{path}: empty file")
        header, body = rows[0], rows[1:]
        if dims is None:
            dims = _dims_from_header(header)
        l, m = dims
        if len(header) != 1 + l * m:
            raise DimensionError(f"{path}: header has {len(header) - 1} entries, expected {l * m}")
        if not body:
            raise DataLengthError(f"{path}: no samples")
        ts = [int(r[0]) for r in body]
        if ts != list(range(1, len(body) + 1)):
            raise DataLengthError(f"{path}: rows must be numbered t = 1, 2, ... consecutively")
        data = np.array([[float(v) for v in r[1:]] for r in body])
        return cls(data.reshape(len(body), l, m))


_ENTRY = re.compile(r"entry_(?:(\d)(\d)|(\d+)_(\d+))$")


def _dims_from_header(header: Sequence[str]) -> Tuple[int, int]:
    if not header or header[0] != "t":
        raise DimensionError("trajectory CSV header must start with 't'")
    idx = []
    for name in header[1:]:
        hit = _ENTRY.match(name)
        if hit is None:
            raise DimensionError(f"unrecognised column {name!r}")
        i, j = [int(g) for g in hit.groups() if g is not None]
        idx.append((i, j))
    return max(i for i, _ in idx) + 1, max(j for _, j in idx) + 1


def write_csv(data: ImpulseTrajectory, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(data.header())
    for t, M in enumerate(data.entries, start=1):
        writer.writerow([t] + [repr(float(v)) for v in M.ravel()])


# -- builders -------------------------------------------------------------------


def build_M_stack(data: ImpulseTrajectory, t: int, T: int) -> np.ndarray:
    """Vertical stack ``[M(1); ...; M(T - t + 2)]``."""
    count = T - t + 2
    if count < 1:
        raise DimensionError(f"empty stack for t={t}, T={T}")
    data.require(count, "M stack")
    return data.entries[:count].reshape(count * data.l, data.m)


def build_S(data: ImpulseTrajectory, t: int, T: int) -> np.ndarray:
    """Lower block-Toeplitz matrix with zero diagonal, ``T - t + 1`` blocks square.

    Block ``(i, j)`` is ``M(i - j)`` below the diagonal and zero elsewhere.
    """
    count = T - t + 1
    if count < 1:
        raise DimensionError(f"empty Toeplitz matrix for t={t}, T={T}")
    if count > 1:
        data.require(count - 1, "Toeplitz matrix")
    l, m = data.dims
    S = np.zeros((count * l, count * m))
    for i in range(1, count):
        for j in range(i):
            S[i * l : (i + 1) * l, j * m : (j + 1) * m] = data.entries[i - j - 1]
    return S


def build_E(data: ImpulseTrajectory, t: int, T: int, n: int) -> np.ndarray:
    """Shifted Hankel matrix, block ``(i, j) = M(n + 1 + i - j)`` for
    ``i = 1..T-t+2`` and ``j = 1..n`` (so the first row runs ``M(n+1) ... M(2)``).
    """
    rows = T - t + 2
    if rows < 1 or n < 1:
        raise DimensionError(f"empty E for t={t}, T={T}, n={n}")
    data.require(rows + n, "E matrix")
    l, m = data.dims
    E = np.empty((rows * l, n * m))
    for i in range(1, rows + 1):
        for j in range(1, n + 1):
            E[(i - 1) * l : i * l, (j - 1) * m : j * m] = data.entries[n + i - j]
    return E


def build_hankel(data: ImpulseTrajectory, rows: int, cols: int, start: int = 1) -> np.ndarray:
    """Block Hankel matrix with block ``(i, j) = M(start + i + j - 2)``."""
    if rows < 1 or cols < 1 or start < 1:
        raise DimensionError("rows, cols and start must be positive")
    data.require(start + rows + cols - 2, "Hankel matrix")
    l, m = data.dims
    H = np.empty((rows * l, cols * m))
    for i in range(rows):
        for j in range(cols):
            H[i * l : (i + 1) * l, j * m : (j + 1) * m] = data.entries[start + i + j - 1]
    return H


def blkdiag_columns(M: np.ndarray) -> np.ndarray:
    """Arrange the columns of an ``l x m`` matrix on the diagonal of an ``lm x m`` matrix."""
    M = np.atleast_2d(M)
    l, m = M.shape
    out = np.zeros((l * m, m), dtype=M.dtype)
    for j in range(m):
        out[j * l : (j + 1) * l, j] = M[:, j]
    return out


def block_diag_repeat(W: np.ndarray, count: int) -> np.ndarray:
    """``diag(W, ..., W)`` with ``count`` copies."""
    W = np.atleast_2d(W)
    return np.kron(np.eye(count), W)
