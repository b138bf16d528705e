"""Comparison estimators: OLS, lasso (coordinate descent and CV), PTL."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidParameterError, NumericalFailureError
from .linalg import LeastSquares


@dataclass
class LassoOptions:
    """Settings for ``lasso_cd`` / ``lasso_cv``.

    ``lam`` is the penalty on ``1/2||Y - X b||^2 + lam ||b||_1`` for a single
    fit. For CV it may be an explicit grid; when it is None a grid of
    ``n_lambdas`` points is built from ``||X^T Y||_inf`` down by ``eps``.
    """

    lam: object = None
    tol: float = 1e-8
    max_iter: int = 10000
    folds: int = 5
    n_lambdas: int = 50
    eps: float = 1e-3

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameterError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.folds < 2:
            raise InvalidParameterError(f"folds must be >= 2, got {self.folds}")


def ols_fit(X, Y):
    return LeastSquares(X).coef(np.asarray(Y, dtype=float))


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalFailureError("non-finite input to lasso")


def lasso_cd(X, Y, opts=None, beta_init=None):
    """Cyclic coordinate descent for ``1/2||Y - X b||^2 + lam ||b||_1``."""
    opts = opts or LassoOptions(lam=0.0)
    lam = float(opts.lam if opts.lam is not None else 0.0)
    if lam < 0:
        raise InvalidParameterError(f"lasso penalty must be >= 0, got {lam}")
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    _finite(X, Y)
    beta0 = np.zeros(X.shape[1]) if beta_init is None else np.array(beta_init, dtype=float)
    beta, _, _ = kernels.lasso_cd_loop(X, Y, lam, beta0, float(opts.tol), int(opts.max_iter))
    return beta


def _grid(X, Y, opts):
    # grid in per-observation units: multiply by the sample size before use
    n = X.shape[0]
    if opts.lam is not None:
        return np.atleast_1d(np.asarray(opts.lam, dtype=float)) / n
    top = float(np.max(np.abs(X.T @ Y))) / n if X.size else 0.0
    if top <= 0:
        return np.zeros(1)
    return np.geomspace(top, top * opts.eps, opts.n_lambdas)


def _folds(n, k):
    return np.array_split(np.arange(n), k)


def lasso_cv_lambda(X, Y, opts=None):
    """CV-minimising penalty, returned on the full-sample scale."""
    opts = opts or LassoOptions()
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    _finite(X, Y)
    n = X.shape[0]
    if n < opts.folds:
        raise InvalidParameterError(f"need n >= folds, got n={n}, folds={opts.folds}")
    grid = _grid(X, Y, opts)
    if grid.size == 1:
        return float(grid[0] * n)
    err = np.zeros(grid.size)
    for test in _folds(n, opts.folds):
        train = np.setdiff1d(np.arange(n), test)
        Xtr, Ytr = np.ascontiguousarray(X[train]), np.ascontiguousarray(Y[train])
        beta = np.zeros(X.shape[1])
        for i, lam in enumerate(grid):
            beta, _, _ = kernels.lasso_cd_loop(Xtr, Ytr, float(lam * len(train)), beta,
                                               float(opts.tol), int(opts.max_iter))
            err[i] += float(np.sum((Y[test] - X[test] @ beta) ** 2))
    return float(grid[int(np.argmin(err))] * n)


def lasso_cv(X, Y, opts=None):
    """K-fold CV over a log grid, then a refit at the minimising penalty."""
    opts = opts or LassoOptions()
    lam = lasso_cv_lambda(X, Y, opts)
    return lasso_cd(X, Y, LassoOptions(lam=lam, tol=opts.tol, max_iter=opts.max_iter))


def ptl_fit(target, ensemble, opts=None):
    """Profiled transfer learning: OLS of Y on X B_hat, then CV lasso on the residual."""
    Z = target.X @ ensemble.B_hat
    K = Z.shape[1]
    if target.n <= K:
        raise InvalidParameterError(f"PTL needs n > K, got n={target.n}, K={K}")
    w = ols_fit(Z, target.Y)
    e = target.Y - Z @ w
    delta = lasso_cv(target.X, e, opts)
    return ensemble.B_hat @ w + delta
