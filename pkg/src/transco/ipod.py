"""Single-dataset robust regression under the mean-shift model.

The model is ``Y = X beta + gamma + eps`` with ``gamma`` sparse; a nonzero
``gamma_i`` flags observation ``i`` as influential. ``ipod_fit`` runs the
thresholding iteration ``gamma <- Theta(H gamma + r; lambda)`` with
``r = (I - H) Y`` and per-observation levels ``lambda_i = lambda_adj *
sqrt(1 - h_i)``. ``ipod_bic_path`` tunes ``lambda_adj`` with BIC*.

When ``n <= p`` the projector is the identity and the iteration carries no
information, so ``ipod_bic_path`` switches to a lasso-backed variant
(``ipod_fit_highdim``).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .baselines import LassoOptions, lasso_cd, lasso_cv_lambda
from .errors import DimensionError, InvalidParameterError, NumericalFailureError
from .linalg import LeastSquares

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500
DEFAULT_GRID_SIZE = 40
GRID_FLOOR = 1e-3
# relative headroom on the grid top so rounding cannot revive a coordinate there
GRID_TOP_MARGIN = 1e-9
# RSS at or below this fraction of ||Y||^2 counts as an exact fit
RSS_ZERO_RTOL = 1e-20
# at most this fraction of the observations may carry a nonzero shift
BREAKDOWN_FRACTION = 0.5


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    columns: list = None
    response: str = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        Y = np.ascontiguousarray(self.Y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidParameterError("dataset contains non-finite values")
        self.X, self.Y = X, Y

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class IpodFit:
    beta_hat: np.ndarray
    gamma_hat: np.ndarray
    lambda_adj: float
    iterations: int
    converged: bool
    bic: float = np.nan
    rss: float = np.nan
    objective_trace: np.ndarray = field(default=None, repr=False)

    @property
    def detected(self):
        return np.flatnonzero(self.gamma_hat)

    @property
    def df(self):
        return int(np.count_nonzero(self.gamma_hat))


@dataclass
class TuningPath:
    lambdas: np.ndarray
    df: np.ndarray
    rss: np.ndarray
    bic: np.ndarray
    best_index: int

    def __post_init__(self):
        sizes = {len(self.lambdas), len(self.df), len(self.rss), len(self.bic)}
        if len(sizes) != 1 or len(self.lambdas) < 1:
            raise DimensionError("tuning path vectors must share a nonzero length")

    @property
    def best_lambda(self):
        return float(self.lambdas[self.best_index])

    def rows(self):
        for lam, df, rss, bic in zip(self.lambdas, self.df, self.rss, self.bic):
            yield {"lambda": float(lam), "df": int(df), "rss": float(rss), "bic": float(bic)}


def hat_matrix(X):
    """Orthogonal projector onto col(X) and its diagonal (leverages)."""
    ls = LeastSquares(X)
    return ls.hat(), ls.leverage


def bic_star(rss, m, q):
    """Modified BIC: ``m log(rss/m) + q (log m + 1)``; ``-inf`` when rss is 0."""
    if m < 1:
        raise InvalidParameterError(f"m must be >= 1, got {m}")
    if q < 1:
        raise InvalidParameterError(f"q must be >= 1, got {q}")
    if rss < 0:
        raise InvalidParameterError(f"rss must be >= 0, got {rss}")
    if rss == 0:
        return -np.inf
    return m * np.log(rss / m) + q * (np.log(m) + 1.0)


def max_shifts(n):
    """Largest number of flagged observations a selectable fit may have."""
    return int(np.floor(BREAKDOWN_FRACTION * n))


def path_bic(rss, m, df, n_shift=None, n=None):
    """BIC* for a point on a tuning path.

    Two kinds of fit are scored ``+inf`` and can never be selected: those with
    ``df >= m`` (no residual degrees of freedom left; the ``lambda = 0`` end of
    every grid interpolates), and, when ``n`` is given, those flagging more
    than half of the ``n`` observations. Past the breakdown point the trimmed
    RSS collapses towards zero and ``m log(RSS/m)`` rewards every extra flag.
    """
    if df >= m:
        return np.inf
    if n is not None and n_shift > max_shifts(n):
        return np.inf
    return bic_star(rss, m, df + 1)


def lambda_grid(lam_max, grid_size, floor=GRID_FLOOR):
    """Descending log-spaced grid from ``lam_max`` to ``lam_max*floor``, then 0.

    The top is nudged up by ``GRID_TOP_MARGIN`` (relative).
    """
    if grid_size < 2:
        raise InvalidParameterError(f"grid_size must be >= 2, got {grid_size}")
    if not lam_max > 0:
        return np.zeros(grid_size + 1)
    lam_max = lam_max * (1.0 + GRID_TOP_MARGIN)
    return np.append(np.geomspace(lam_max, lam_max * floor, grid_size), 0.0)


def _select(bic):
    # argmin returns the first (largest-lambda) index among ties
    return int(np.argmin(bic))


def _check_run(tol, max_iter):
    if not tol > 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter must be >= 1, got {max_iter}")


class _Projector:
    """Cached per-design quantities for repeated fits on one dataset."""

    def __init__(self, data):
        self.data = data
        self.ls = LeastSquares(data.X)
        self.r = self.ls.resid(data.Y)
        self.root = np.sqrt(np.clip(1.0 - self.ls.leverage, 0.0, None))

    def lambda_max(self):
        ok = self.root > 1e-12
        if not np.any(ok):
            return 0.0
        return float(np.max(np.abs(self.r[ok]) / self.root[ok]))


def _ipod_run(proj, lambda_adj, tol, max_iter, gamma_init):
    data = proj.data
    if lambda_adj < 0:
        raise InvalidParameterError(f"lambda_adj must be >= 0, got {lambda_adj}")
    _check_run(tol, max_iter)
    gamma0 = np.zeros(data.n) if gamma_init is None else np.asarray(gamma_init, dtype=float)
    if gamma0.shape != (data.n,):
        raise DimensionError(f"gamma_init must have length {data.n}")
    lam = np.ascontiguousarray(lambda_adj * proj.root)
    gamma, iters, converged, trace = kernels.ipod_loop(
        proj.ls.U, proj.r, lam, np.ascontiguousarray(gamma0), float(tol), int(max_iter))
    if not np.all(np.isfinite(gamma)):
        raise NumericalFailureError("non-finite values in the gamma iteration")
    beta = proj.ls.coef(data.Y - gamma)
    rss = float(np.sum(proj.ls.resid(data.Y - gamma) ** 2))
    if rss <= RSS_ZERO_RTOL * float(data.Y @ data.Y):
        rss = 0.0
    df = int(np.count_nonzero(gamma))
    bic = path_bic(rss, data.n - data.p, df, df, data.n)
    return IpodFit(beta, gamma, float(lambda_adj), int(iters), bool(converged), bic, rss, trace)


def ipod_fit(data, lambda_adj, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, gamma_init=None):
    """Θ-IPOD at a fixed ``lambda_adj`` (requires ``n > p``)."""
    if data.n <= data.p:
        raise InvalidParameterError(f"ipod_fit needs n > p, got n={data.n}, p={data.p}")
    return _ipod_run(_Projector(data), lambda_adj, tol, max_iter, gamma_init)


def ipod_bic_path(data, grid_size=DEFAULT_GRID_SIZE, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Warm-started path over ``lambda_adj``; returns (path, best fit)."""
    if data.n <= data.p:
        return ipod_bic_path_highdim(data, grid_size=grid_size, tol=tol, max_iter=max_iter)
    proj = _Projector(data)
    lambdas = lambda_grid(proj.lambda_max(), grid_size)
    fits = []
    gamma = None
    for lam in lambdas:
        fit = _ipod_run(proj, lam, tol, max_iter, gamma)
        gamma = fit.gamma_hat
        fits.append(fit)
    return _assemble(lambdas, fits)


def _assemble(lambdas, fits):
    bic = np.array([f.bic for f in fits])
    path = TuningPath(
        lambdas=np.asarray(lambdas, dtype=float),
        df=np.array([f.df for f in fits]),
        rss=np.array([f.rss for f in fits]),
        bic=bic,
        best_index=_select(bic),
    )
    return path, fits[path.best_index]


# ---------------------------------------------------------------------------
# n <= p
# ---------------------------------------------------------------------------


def ipod_fit_highdim(data, lambda_adj, beta_lambda, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                     gamma_init=None, beta_init=None):
    """Block-coordinate descent on ``1/2||Y - X b - g||^2 + beta_lambda*||b||_1 + sum P_hard(g_i; lambda_adj)``.

    Alternates an exact lasso solve for ``b`` with the hard threshold
    ``g = Theta(Y - X b; lambda_adj)``. Leverages are not defined here, so a
    single level is used for every observation.
    """
    _check_run(tol, max_iter)
    X, Y = data.X, data.Y
    gamma = np.zeros(data.n) if gamma_init is None else np.asarray(gamma_init, dtype=float).copy()
    beta = np.zeros(data.p) if beta_init is None else np.asarray(beta_init, dtype=float).copy()
    opts = LassoOptions(lam=beta_lambda)
    trace = []
    converged = False
    it = 0
    while it < max_iter:
        beta = lasso_cd(X, Y - gamma, opts, beta_init=beta)
        resid = Y - X @ beta
        trace.append(0.5 * float(np.sum((resid - gamma) ** 2))
                     + beta_lambda * float(np.sum(np.abs(beta)))
                     + float(np.sum(_hard_pen(gamma, lambda_adj))))
        new = np.where(np.abs(resid) > lambda_adj, resid, 0.0)
        diff = float(np.max(np.abs(new - gamma)))
        gamma = new
        it += 1
        if diff < tol:
            converged = True
            break
    beta = lasso_cd(X, Y - gamma, opts, beta_init=beta)
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
        raise NumericalFailureError("non-finite values in the high-dimensional iteration")
    rss = float(np.sum((Y - X @ beta - gamma) ** 2))
    if rss <= RSS_ZERO_RTOL * float(Y @ Y):
        rss = 0.0
    m = max(data.n - int(np.count_nonzero(beta)), 1)
    df = int(np.count_nonzero(gamma))
    bic = path_bic(rss, m, df, df, data.n)
    return IpodFit(beta, gamma, float(lambda_adj), it, converged, bic, rss, np.asarray(trace))


def _hard_pen(v, lam):
    a = np.abs(v)
    return np.where(a <= lam, lam * a - 0.5 * a * a, 0.5 * lam * lam)


def ipod_bic_path_highdim(data, grid_size=DEFAULT_GRID_SIZE, tol=DEFAULT_TOL,
                          max_iter=DEFAULT_MAX_ITER, beta_lambda=None):
    if beta_lambda is None:
        beta_lambda = lasso_cv_lambda(data.X, data.Y)
    opts = LassoOptions(lam=beta_lambda)
    beta0 = lasso_cd(data.X, data.Y, opts)
    lam_max = float(np.max(np.abs(data.Y - data.X @ beta0))) if data.n else 0.0
    lambdas = lambda_grid(lam_max, grid_size)
    fits = []
    gamma, beta = None, beta0
    for lam in lambdas:
        fit = ipod_fit_highdim(data, lam, beta_lambda, tol, max_iter, gamma, beta)
        gamma, beta = fit.gamma_hat, fit.beta_hat
        fits.append(fit)
    log.debug("high-dimensional ipod path, beta_lambda=%.4g", beta_lambda)
    return _assemble(lambdas, fits)
