"""Regularised GP regression with an append-only Cholesky factor.

``GPState`` keeps the lower factor of ``K + alpha I`` and the whitened targets
``L^-1 y``, so each new observation costs one triangular solve.  Optionally a
fixed set of probe points (the arms of a cover element) is tracked: the rows of
``L^-1 K(X, P)`` are appended alongside the factor and the posterior mean and
variance at the probes are updated in place.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .kernel import KernelSpec

log = logging.getLogger(__name__)

JITTER = 1e-12
NEGATIVE_VARIANCE_TOL = 1e-10


class GPState:
    """Posterior of a GP conditioned on the observations fed to it so far.

    Empty states give mean 0, std 1 and zero information gain.
    """

    def __init__(self, kernel: KernelSpec, alpha: float, probes=None, capacity: int = 16):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.kernel = kernel
        self.alpha = float(alpha)
        self.n = 0
        self.logdet_acc = 0.0
        self.jitter_events = 0
        cap = max(int(capacity), 1)
        self._X = np.empty((cap, kernel.dim))
        self._y = np.empty(cap)
        self._L = np.zeros((cap, cap))
        self._w = np.empty(cap)
        if probes is None:
            self._P = None
            self._V = None
            self.probe_mean = None
            self.probe_var = None
        else:
            self._P = np.atleast_2d(np.asarray(probes, dtype=float)).reshape(-1, kernel.dim)
            m = self._P.shape[0]
            self._V = np.empty((cap, m))
            self.probe_mean = np.zeros(m)
            self.probe_var = np.ones(m)

    @classmethod
    def from_data(cls, kernel: KernelSpec, alpha: float, X, y, probes=None) -> "GPState":
        """Fit from scratch on ``(X, y)`` with a dense Cholesky factorisation."""
        X = np.asarray(X, dtype=float).reshape(-1, kernel.dim)
        y = np.asarray(y, dtype=float).ravel()
        n = X.shape[0]
        state = cls(kernel, alpha, probes=probes, capacity=n + n // 2 + 16)
        if n == 0:
            return state
        try:
            L = cholesky(kernel.gram(X) + alpha * np.eye(n), lower=True)
        except LinAlgError:
            log.debug("dense factorisation failed, refitting sequentially")
            for xi, yi in zip(X, y):
                state.add_observation(xi, yi)
            return state
        state.n = n
        state._X[:n] = X
        state._y[:n] = y
        state._L[:n, :n] = L
        state._w[:n] = solve_triangular(L, y, lower=True)
        state.logdet_acc = 2.0 * float(np.sum(np.log(np.diag(L)))) - n * math.log(alpha)
        if state._P is not None and state._P.shape[0]:
            V = solve_triangular(L, kernel.gram(X, state._P), lower=True)
            state._V[:n] = V
            state.probe_mean = V.T @ state._w[:n]
            state.probe_var = np.maximum(1.0 - np.einsum("ij,ij->j", V, V), 0.0)
        return state

    # -- accessors -----------------------------------------------------------------

    @property
    def X(self) -> np.ndarray:
        return self._X[: self.n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self.n]

    @property
    def chol(self) -> np.ndarray:
        return self._L[: self.n, : self.n]

    @property
    def probes(self):
        return self._P

    def _grow(self):
        cap = 2 * self._X.shape[0]
        n = self.n
        X = np.empty((cap, self.kernel.dim))
        X[:n] = self._X[:n]
        y = np.empty(cap)
        y[:n] = self._y[:n]
        L = np.zeros((cap, cap))
        L[:n, :n] = self._L[:n, :n]
        w = np.empty(cap)
        w[:n] = self._w[:n]
        self._X, self._y, self._L, self._w = X, y, L, w
        if self._V is not None:
            V = np.empty((cap, self._V.shape[1]))
            V[:n] = self._V[:n]
            self._V = V

    # -- updates -------------------------------------------------------------------

    def add_observation(self, x, y_val: float, probe: int | None = None) -> float:
        """Condition on one more observation; returns the pre-update variance at ``x``.

        If ``x`` is the tracked probe with index ``probe``, the cached column of
        ``L^-1 K(X, P)`` replaces the triangular solve.
        """
        x = np.asarray(x, dtype=float).ravel()
        n = self.n
        if n == self._X.shape[0]:
            self._grow()
        if n and probe is not None:
            l = self._V[:n, probe].copy()
            var = 1.0 - float(l @ l)
        elif n:
            kx = self.kernel.profile(np.sqrt(((self._X[:n] - x) ** 2).sum(axis=1)))
            l = solve_triangular(self._L[:n, :n], kx, lower=True, check_finite=False)
            var = 1.0 - float(l @ l)
        else:
            l = np.empty(0)
            var = 1.0
        schur = self.alpha + var
        if schur <= JITTER:
            schur = JITTER
            self.jitter_events += 1
        diag = math.sqrt(schur)
        self._L[n, :n] = l
        self._L[n, n] = diag
        self._X[n] = x
        self._y[n] = y_val
        w_new = (y_val - float(l @ self._w[:n])) / diag
        self._w[n] = w_new
        self.logdet_acc += math.log(schur) - math.log(self.alpha)
        if self._V is not None and self._V.shape[1]:
            kp = self.kernel.profile(np.sqrt(((self._P - x) ** 2).sum(axis=1)))
            v = (kp - l @ self._V[:n]) / diag if n else kp / diag
            self._V[n] = v
            self.probe_mean += w_new * v
            self.probe_var -= v * v
            np.maximum(self.probe_var, 0.0, out=self.probe_var)
        self.n = n + 1
        return max(var, 0.0)

    # -- posterior -----------------------------------------------------------------

    def posterior(self, xs):
        """Posterior mean and standard deviation at the rows of ``xs``."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float)).reshape(-1, self.kernel.dim)
        if self.n == 0:
            return np.zeros(len(xs)), np.ones(len(xs))
        U = solve_triangular(self.chol, self.kernel.gram(self.X, xs), lower=True)
        mean = U.T @ self._w[: self.n]
        var = 1.0 - np.einsum("ij,ij->j", U, U)
        if np.any(var < -NEGATIVE_VARIANCE_TOL):
            raise FloatingPointError(f"negative posterior variance {var.min():.3e}")
        return mean, np.sqrt(np.clip(var, 0.0, 1.0))

    def posterior_mean(self, x) -> float:
        return float(self.posterior(x)[0][0])

    def posterior_std(self, x) -> float:
        return float(self.posterior(x)[1][0])

    def probe_std(self) -> np.ndarray:
        return np.sqrt(self.probe_var)

    def information_gain(self) -> float:
        """``0.5 log|I + K / alpha|``, accumulated one observation at a time."""
        return 0.5 * self.logdet_acc

    def effective_dimension(self) -> float:
        """``Tr(K (K + alpha I)^-1) = n - alpha ||L^-1||_F^2``."""
        if self.n == 0:
            return 0.0
        Linv = solve_triangular(self.chol, np.eye(self.n), lower=True)
        return float(self.n - self.alpha * np.sum(Linv * Linv))


def dense_information_gain(kernel: KernelSpec, alpha: float, X) -> float:
    """Information gain of a point set computed from one dense factorisation."""
    X = np.asarray(X, dtype=float).reshape(-1, kernel.dim)
    if len(X) == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(np.eye(len(X)) + kernel.gram(X) / alpha)
    return 0.5 * float(logdet)
