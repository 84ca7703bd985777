"""Matérn kernels with half-integer smoothness.

Distances are Euclidean and the kernel uses the ``sqrt(2 nu) r / ell`` scaling,
so that ``k(x, x) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln

SUPPORTED_NU = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    nu: float = 1.5
    ell: float = 0.2
    dim: int = 1

    def __post_init__(self):
        if self.nu <= 0 or self.ell <= 0 or self.dim < 1:
            raise ValueError(f"invalid kernel parameters: {self}")

    def profile(self, r: np.ndarray) -> np.ndarray:
        """Kernel value as a function of Euclidean distance ``r``."""
        r = np.asarray(r, dtype=float)
        if self.nu == 0.5:
            return np.exp(-r / self.ell)
        if self.nu == 1.5:
            s = math.sqrt(3.0) * r / self.ell
            return (1.0 + s) * np.exp(-s)
        if self.nu == 2.5:
            s = math.sqrt(5.0) * r / self.ell
            return (1.0 + s + s * s / 3.0) * np.exp(-s)
        raise ValueError(f"unsupported smoothness nu={self.nu}; use one of {SUPPORTED_NU}")

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        return X

    def __call__(self, x, x2) -> float:
        x = np.asarray(x, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        if x.shape[0] != self.dim or x2.shape[0] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}")
        return float(self.profile(np.linalg.norm(x - x2)))

    def gram(self, X, Y=None) -> np.ndarray:
        """Cross-covariance ``[k(x, y)]`` between rows of ``X`` and ``Y`` (``Y=X`` if omitted)."""
        X = self._check(X)
        if Y is None:
            K = self.profile(cdist(X, X))
            np.fill_diagonal(K, 1.0)
            return K
        return self.profile(cdist(X, self._check(Y)))

    def density_constant(self) -> float:
        d = self.dim
        return math.exp(
            d * math.log(self.ell)
            + gammaln(self.nu + d / 2)
            - (d / 2) * math.log(math.pi)
            - gammaln(self.nu)
        )

    def spectral_density(self, omega) -> float:
        omega = np.asarray(omega, dtype=float).ravel()
        if omega.shape[0] != self.dim:
            raise ValueError(f"expected frequency of dimension {self.dim}")
        w2 = float(omega @ omega)
        return self.density_constant() * (1.0 + self.ell**2 * w2) ** (-self.nu - self.dim / 2)


def matern_eval(spec: KernelSpec, x, x2) -> float:
    return spec(x, x2)


def gram_matrix(spec: KernelSpec, X) -> np.ndarray:
    return spec.gram(X)


def spectral_density(spec: KernelSpec, omega) -> float:
    return spec.spectral_density(omega)
