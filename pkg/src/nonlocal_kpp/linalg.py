"""Factorisations for the banded (or dense) Jacobians of the discrete problem."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .core import bands_to_dense, bands_to_lapack
from .errors import SingularJacobianError

# a band wider than this fraction of the system is factorised densely
DENSE_FRACTION = 0.25


class BandedLU:
    """LU factors of a matrix given in row-banded storage (see core._weight_bands)."""

    def __init__(self, bands: np.ndarray, halfwidth: int):
        n, width = bands.shape
        self.n = n
        self.dense = halfwidth > DENSE_FRACTION * n
        if self.dense:
            A = bands_to_dense(bands, halfwidth)
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                try:
                    self._lu = sla.lu_factor(A, check_finite=False)
                except (sla.LinAlgWarning, np.linalg.LinAlgError, ValueError) as exc:
                    raise SingularJacobianError(f"dense factorisation failed: {exc}") from exc
            if not np.all(np.isfinite(self._lu[0])):
                raise SingularJacobianError("dense factorisation produced non-finite factors")
            d = np.abs(np.diag(self._lu[0]))
            if d.min() <= 1e-300 or d.min() < 1e-15 * d.max():
                raise SingularJacobianError("matrix is numerically singular")
            return
        kl = ku = halfwidth
        # dgbtrf layout: A[i, j] -> ab[kl + ku + i - j, j], with kl extra rows for fill-in
        ab = np.zeros((2 * kl + ku + 1, n))
        ab[kl:] = bands_to_lapack(bands, halfwidth)
        lub, piv, info = lapack.dgbtrf(ab, kl, ku)
        if info != 0:
            raise SingularJacobianError(f"banded factorisation failed (info={info})")
        d = np.abs(lub[kl + ku])
        if d.min() < 1e-15 * d.max():
            raise SingularJacobianError("matrix is numerically singular")
        self._kl, self._ku = kl, ku
        self._lub, self._piv = lub, piv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.dense:
            x = sla.lu_solve(self._lu, rhs, check_finite=False)
        else:
            x, info = lapack.dgbtrs(self._lub, self._kl, self._ku, rhs, self._piv)
            if info != 0:
                raise SingularJacobianError(f"banded solve failed (info={info})")
        if not np.all(np.isfinite(x)):
            raise SingularJacobianError("linear solve produced non-finite values")
        return x
