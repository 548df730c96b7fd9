"""Central-difference operators on periodic n^3 grids.

Fields carry the grid in their leading three axes, e.g. a vector field has
shape ``(n, n, n, 3)`` and a tensor field ``(n, n, n, 3, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import UnsupportedDomain


@dataclass(frozen=True)
class PeriodicGrid3D:
    n: int
    h: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise UnsupportedDomain("periodic grids need n >= 3 for central differences")
        if not self.h > 0:
            raise UnsupportedDomain("grid spacing must be positive")

    @property
    def cells(self):
        return self.n**3

    @property
    def volume(self):
        return self.h**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    def ddx(self, f, axis):
        """``(f[i+1] - f[i-1]) / 2h`` along grid axis ``axis``."""
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * self.h)

    def grad_scalar(self, f):
        return np.stack([self.ddx(f, b) for b in range(3)], axis=-1)

    def grad_vector(self, v):
        """``G[..., a, b] = d v_a / d x_b``."""
        return np.stack([self.ddx(v, b) for b in range(3)], axis=-1)

    def div_vector(self, w):
        return sum(self.ddx(w[..., b], b) for b in range(3))

    def div_tensor(self, P):
        """``(div P)_a = sum_b d P_ab / d x_b``."""
        return sum(self.ddx(P[..., :, b], b) for b in range(3))

    def curl(self, w):
        d = self.ddx
        return np.stack(
            [
                d(w[..., 2], 1) - d(w[..., 1], 2),
                d(w[..., 0], 2) - d(w[..., 2], 0),
                d(w[..., 1], 0) - d(w[..., 0], 1),
            ],
            axis=-1,
        )

    def diff_matrix(self, axis):
        """Sparse matrix of :meth:`ddx` on flattened (C-order) scalar fields."""
        n = self.n
        e = np.ones(n)
        d1 = sp.diags([e[:-1], -e[:-1]], [1, -1], shape=(n, n), format="lil")
        d1[0, n - 1] = -1.0
        d1[n - 1, 0] = 1.0
        d1 = d1.tocsr() / (2.0 * self.h)
        eye = sp.identity(n, format="csr")
        mats = [eye, eye, eye]
        mats[axis] = d1
        return sp.kron(sp.kron(mats[0], mats[1]), mats[2], format="csr")
