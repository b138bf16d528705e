"""Least-squares helpers built on a thin SVD."""
import numpy as np

from .errors import SingularDesignError

RANK_RTOL = 1e-10


def _fail(error_cls, message, rank):
    if issubclass(error_cls, SingularDesignError):
        raise error_cls(message, rank)
    raise error_cls(message)


class LeastSquares:
    """Projection and OLS for a fixed design with full column rank.

    The thin SVD ``X = U diag(s) V^T`` is rank revealing; a smallest singular
    value below ``rtol * s_max`` raises ``error_cls``.
    """

    def __init__(self, X, rtol=RANK_RTOL, error_cls=SingularDesignError, what="design"):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("design must be 2-D")
        n, p = X.shape
        if p == 0:
            _fail(error_cls, f"{what} has no columns", 0)
        if n < p:
            _fail(error_cls, f"{what} has {n} rows < {p} columns; rank at most {n}", n)
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
        if rank < p:
            _fail(error_cls, f"{what} is rank deficient: rank {rank} < {p}", rank)
        self.X = X
        self.U = np.ascontiguousarray(U)
        self.s = s
        self.Vt = Vt

    @property
    def leverage(self):
        return np.sum(self.U * self.U, axis=1)

    def coef(self, y):
        return self.Vt.T @ ((self.U.T @ y) / self.s)

    def fitted(self, y):
        return self.U @ (self.U.T @ y)

    def resid(self, y):
        return y - self.fitted(y)

    def pinv(self):
        return np.ascontiguousarray((self.Vt.T / self.s) @ self.U.T)

    def hat(self):
        return self.U @ self.U.T
