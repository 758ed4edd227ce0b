"""Real symmetric matrices stored by their upper diagonals."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class BandedSymmetricMatrix:
    """Symmetric ``dim x dim`` matrix; ``diagonals[k]`` holds ``A[i, i+k]``.

    Only offsets ``k >= 0`` are stored. Missing offsets are zero.
    """

    dim: int
    diagonals: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        clean = {}
        for k, v in sorted(self.diagonals.items()):
            k = int(k)
            v = np.asarray(v, dtype=float)
            if k < 0 or k >= self.dim:
                raise ValueError(f"offset {k} outside [0, {self.dim})")
            if v.shape != (self.dim - k,):
                raise ValueError(f"offset {k} needs {self.dim - k} values, got {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite entries on offset {k}")
            v.setflags(write=False)
            clean[k] = v
        object.__setattr__(self, "diagonals", clean)

    @property
    def bandwidth(self) -> int:
        nonzero = [k for k, v in self.diagonals.items() if np.any(v)]
        return max(nonzero, default=0)

    def diagonal(self, k: int = 0) -> np.ndarray:
        k = abs(k)
        if k in self.diagonals:
            return self.diagonals[k]
        return np.zeros(max(self.dim - k, 0))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = self.diagonal(0)[:, None] * x if x.ndim == 2 else self.diagonal(0) * x
        for k, v in self.diagonals.items():
            if k == 0:
                continue
            if x.ndim == 2:
                y[:-k] += v[:, None] * x[k:]
                y[k:] += v[:, None] * x[:-k]
            else:
                y[:-k] += v * x[k:]
                y[k:] += v * x[:-k]
        return y

    __matmul__ = matvec

    def quadratic(self, x: np.ndarray) -> float:
        """``x . A x`` for a real vector."""
        return float(np.dot(x, self.matvec(x)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for k, v in self.diagonals.items():
            idx = np.arange(self.dim - k)
            out[idx, idx + k] = v
            out[idx + k, idx] = v
        return out

    def to_sparse(self) -> sp.csr_matrix:
        offsets, data = [], []
        for k, v in self.diagonals.items():
            offsets.append(k)
            data.append(v)
            if k:
                offsets.append(-k)
                data.append(v)
        if not offsets:
            return sp.csr_matrix((self.dim, self.dim))
        return sp.diags(data, offsets, shape=(self.dim, self.dim), format="csr")

    def lower_band(self) -> np.ndarray:
        """LAPACK lower band storage, ``ab[k, i] = A[i+k, i]``."""
        b = self.bandwidth
        ab = np.zeros((b + 1, self.dim))
        for k, v in self.diagonals.items():
            if k <= b:
                ab[k, : self.dim - k] = v
        return ab

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.diagonals.values() if v.size), default=0.0)

    @classmethod
    def from_dense(cls, a: np.ndarray, atol: float = 0.0) -> "BandedSymmetricMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("square matrix required")
        if not np.allclose(a, a.T, rtol=0, atol=max(atol, 1e-14 * max(1.0, np.abs(a).max()))):
            raise ValueError("matrix is not symmetric")
        n = a.shape[0]
        diags = {}
        for k in range(n):
            v = np.diagonal(a, k).copy()
            if np.any(np.abs(v) > atol):
                diags[k] = v
        return cls(n, diags)

    @classmethod
    def from_sparse(cls, m) -> "BandedSymmetricMatrix":
        m = sp.coo_matrix(m)
        n = m.shape[0]
        upper = m.col >= m.row
        rows, cols, vals = m.row[upper], m.col[upper], m.data[upper]
        diags: dict[int, np.ndarray] = {}
        for k in np.unique(cols - rows):
            sel = (cols - rows) == k
            v = np.zeros(n - k)
            np.add.at(v, rows[sel], vals[sel])
            diags[int(k)] = v
        return cls(n, diags)
