"""Trans-CO: transfer learning with influential-point detection.

Target model ``Y = X B_hat w + X delta + gamma + eps``. ``B_hat`` stacks the
robust source coefficients, ``w`` weighs them, ``delta`` is a sparse
correction and ``gamma`` a sparse mean shift. Each iteration is an OLS update
of ``w`` followed by a joint hard-thresholded gradient step on
``xi = [delta; gamma]`` with step ``1/k0**2``, where ``k0 = sigma_max([X I]) + 1``.

The objective that these steps decrease monotonically is

    1/2 ||Y - Z w - X delta - gamma||^2 + sum k0^2 P_hard(xi_j; lam / k0^2)

i.e. the hard penalty matched to the threshold actually applied at that step
size (see ``thresholding.scaled_hard_penalty``).

By default the solver works on ``X`` with columns scaled to unit norm, so the
shared ``lam`` treats a column of ``X`` and a column of the identity alike and
``k0`` stays small. ``delta`` is always reported on the original scale; the
penalty then acts on ``col_scale * delta``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .baselines import lasso_cv, ols_fit
from .errors import (EnsembleDegeneracyError, InvalidParameterError, NumericalFailureError,
                     TransferDegeneracyError, TranscoError)
from .ipod import (DEFAULT_GRID_SIZE, RSS_ZERO_RTOL, TuningPath, ipod_bic_path, lambda_grid,
                   path_bic)
from .linalg import RANK_RTOL, LeastSquares
from .thresholding import hard_threshold_vec, scaled_hard_penalty

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 2000
C_EIG_FLOOR = 1e-12
LAMBDA_FLOOR_RTOL = 1e-12   # grid top never below rounding level of the response


@dataclass
class SourceEnsemble:
    B_hat: np.ndarray
    gamma_hats: list
    diagnostics: list = field(default_factory=list)

    @property
    def K(self):
        return self.B_hat.shape[1]


@dataclass
class TransformCache:
    """Quantities for one (X, B_hat, Y), all in the working column scale.

    ``X`` here is ``X_original / col_scale`` and ``Z = X_original @ B_hat``.
    """

    X: np.ndarray
    col_scale: np.ndarray
    Z: np.ndarray
    M: np.ndarray
    k0: float
    P: np.ndarray
    A: np.ndarray
    Y_tilde: np.ndarray
    Z_pinv: np.ndarray
    U_c: np.ndarray

    @property
    def step_scale(self):
        return self.k0 * self.k0

    def to_working(self, delta):
        return np.asarray(delta, dtype=float) * self.col_scale

    def to_original(self, delta):
        return np.asarray(delta, dtype=float) / self.col_scale


@dataclass
class TransferState:
    w: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    objective: float = np.nan

    @property
    def xi(self):
        return np.concatenate([self.delta, self.gamma])


@dataclass
class TransferFit:
    w_hat: np.ndarray
    delta_hat: np.ndarray
    gamma_hat: np.ndarray
    beta_hat: np.ndarray
    lam: float
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    bic: float = np.nan
    rss: float = np.nan
    descent_trace: np.ndarray = field(default=None, repr=False)

    @property
    def detected(self):
        return np.flatnonzero(self.gamma_hat)

    @property
    def df(self):
        return int(np.count_nonzero(self.delta_hat) + np.count_nonzero(self.gamma_hat))

    @property
    def state(self):
        return TransferState(self.w_hat, self.delta_hat, self.gamma_hat)


def identification_gap(fit, X, B_hat):
    """``||B_hat^T (X^T X / n) delta_hat||_inf`` for a fitted model.

    Zero when the usual identification condition holds; not enforced.
    """
    n = X.shape[0]
    return float(np.max(np.abs(B_hat.T @ (X.T @ (X @ fit.delta_hat)) / n)))


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


def fit_sources(sources, grid_size=DEFAULT_GRID_SIZE, tol=1e-6, max_iter=500):
    """Robust per-source fits assembled into a coefficient bank."""
    if not sources:
        raise InvalidParameterError("at least one source dataset is required")
    p = sources[0].p
    betas, gammas, diags = [], [], []
    for k, src in enumerate(sources):
        if src.p != p:
            raise InvalidParameterError(f"source {k}: has {src.p} columns, expected {p}")
        if src.n <= src.p:
            raise InvalidParameterError(f"source {k}: needs N > p, got N={src.n}, p={src.p}")
        try:
            path, fit = ipod_bic_path(src, grid_size=grid_size, tol=tol, max_iter=max_iter)
        except TranscoError as exc:
            raise type(exc)(f"source {k}: {exc}") from exc
        betas.append(ols_fit(src.X, src.Y - fit.gamma_hat))
        gammas.append(fit.gamma_hat)
        diags.append({"iterations": fit.iterations, "converged": fit.converged,
                      "lambda_adj": fit.lambda_adj, "df": fit.df})
    B = np.column_stack(betas)
    if not np.all(np.isfinite(B)):
        raise EnsembleDegeneracyError("non-finite source coefficients")
    s = np.linalg.svd(B, compute_uv=False)
    if s.size < B.shape[1] or not s[-1] > RANK_RTOL * s[0]:
        raise EnsembleDegeneracyError(
            f"source coefficients are linearly dependent (singular values {s})")
    return SourceEnsemble(B, gammas, diags)


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


def column_scale(X):
    """Column norms of ``X``; zero columns keep scale 1."""
    d = np.linalg.norm(np.asarray(X, dtype=float), axis=0)
    return np.where(d > 0, d, 1.0)


def build_transform(X, B_hat, Y, normalize=True):
    """Precompute the Zw-eliminated orthogonal model ``Y_tilde = A xi + eps'``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    D = column_scale(X) if normalize else np.ones(p)
    Xs = np.ascontiguousarray(X / D)
    Z = np.ascontiguousarray(X @ B_hat)
    K = Z.shape[1]
    if n <= K:
        raise TransferDegeneracyError(f"need n > K, got n={n}, K={K}")
    ls = LeastSquares(Z, error_cls=TransferDegeneracyError, what="Z = X B_hat")
    evals, evecs = np.linalg.eigh(ls.hat())
    U_c = evecs[:, evals < 0.5]
    if U_c.shape[1] != n - K:
        raise TransferDegeneracyError(
            f"projector spectrum split gave {U_c.shape[1]} null directions, expected {n - K}")
    UX = U_c.T @ Xs
    C = UX @ UX.T + np.eye(n - K)
    c_vals, c_vecs = np.linalg.eigh(C)
    if c_vals[0] < C_EIG_FLOOR:
        raise NumericalFailureError(f"C is not positive definite (min eigenvalue {c_vals[0]:.3g})")
    C_inv_half = (c_vecs / np.sqrt(c_vals)) @ c_vecs.T
    P = C_inv_half @ U_c.T
    M = np.hstack([Xs, np.eye(n)])
    A = np.hstack([P @ Xs, P])
    sx = np.linalg.norm(Xs, 2) if Xs.size else 0.0
    k0 = float(np.sqrt(sx * sx + 1.0) + 1.0)
    return TransformCache(Xs, D, Z, M, k0, P, A, P @ Y, ls.pinv(), U_c)


# ---------------------------------------------------------------------------
# objective and single step (reference implementation)
# ---------------------------------------------------------------------------


def transco_objective(state, X, B_hat, Y, lam, scale=1.0, col_scale=None):
    """Penalised least squares at ``state`` (original coordinates).

    ``scale`` is the inverse step size the penalty is matched to; the solver
    passes ``k0**2``. With ``scale=1`` this is the plain hard penalty at ``lam``.
    ``col_scale`` multiplies ``delta`` inside the penalty.
    """
    r = Y - X @ (B_hat @ state.w) - X @ state.delta - state.gamma
    d = state.delta if col_scale is None else state.delta * col_scale
    value = 0.5 * float(r @ r)
    value += float(np.sum(scaled_hard_penalty(d, lam, scale)))
    value += float(np.sum(scaled_hard_penalty(state.gamma, lam, scale)))
    if not np.isfinite(value):
        raise NumericalFailureError("objective is not finite")
    return value


def transco_step(state, cache, X, B_hat, Y, lam):
    """One Trans-CO iteration: OLS for ``w``, then the joint ``xi`` update.

    ``state`` and the result are in original coordinates; the gradient step
    runs in the working scale of ``cache``.
    """
    if lam < 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam}")
    L = cache.step_scale
    Xs = cache.X
    d = cache.to_working(state.delta)
    w = cache.Z_pinv @ (Y - Xs @ d - state.gamma)
    r = Y - cache.Z @ w - Xs @ d - state.gamma
    d = hard_threshold_vec(d + (Xs.T @ r) / L, lam / L)
    gamma = hard_threshold_vec(state.gamma + r / L, lam / L)
    new = TransferState(w, cache.to_original(d), gamma)
    new.objective = transco_objective(new, X, B_hat, Y, lam, scale=L, col_scale=cache.col_scale)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(new.xi))):
        raise NumericalFailureError("non-finite values in the Trans-CO step")
    return new


START_KINDS = ("zero", "ols")


def initial_state(target, cache, start="zero"):
    """Starting point for the iteration.

    ``"zero"``: ``delta = gamma = 0`` and ``w`` the OLS fit of ``Y`` on ``Z``.
    ``"ols"``: ``delta = 0``, ``gamma`` the residuals of OLS of ``Y`` on ``X``
    (CV lasso when ``n <= p``). The residual start keeps every observation
    flagged at first, and a hard-threshold step only drops ``gamma_i`` once
    ``|gamma_i| <= lam / k0**2``, so moderate penalties retain many clean points.
    """
    if start not in START_KINDS:
        raise InvalidParameterError(f"start must be one of {START_KINDS}, got {start!r}")
    delta0 = np.zeros(target.p)
    if start == "zero":
        gamma0 = np.zeros(target.n)
    else:
        Xs = cache.X
        if target.n > target.p:
            beta0 = ols_fit(Xs, target.Y)
        else:
            beta0 = lasso_cv(Xs, target.Y)
        gamma0 = target.Y - Xs @ beta0
    w0 = cache.Z_pinv @ (target.Y - gamma0)
    return TransferState(w0, delta0, gamma0)


def transformed_rss(cache, delta, gamma):
    """``||Y_tilde - A xi||^2`` with ``delta`` in original coordinates."""
    xi = np.concatenate([cache.to_working(delta), gamma])
    return float(np.sum((cache.Y_tilde - cache.A @ xi) ** 2))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _check_cache(cache, target, B):
    if cache.X.shape != target.X.shape or cache.Z.shape[1] != B.shape[1]:
        raise InvalidParameterError("cache was built for a different problem")


def transco_fit(target, ensemble, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, init=None,
                cache=None, normalize=True):
    """Run Trans-CO at a fixed penalty ``lam``.

    ``init`` is a TransferState in original coordinates; by default the
    zero start of ``initial_state``. A supplied ``cache`` overrides
    ``normalize``.
    """
    if not tol > 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter must be >= 1, got {max_iter}")
    if lam < 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam}")
    B = ensemble.B_hat
    if cache is None:
        cache = build_transform(target.X, B, target.Y, normalize=normalize)
    _check_cache(cache, target, B)
    if init is None:
        init = initial_state(target, cache)
    L = cache.step_scale
    w, d, gamma, iters, converged, trace = kernels.transco_loop(
        cache.X, cache.Z, cache.Z_pinv, target.Y,
        np.ascontiguousarray(cache.to_working(init.delta)),
        np.ascontiguousarray(init.gamma, dtype=float),
        float(lam) / L, float(L), float(tol), int(max_iter))
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(d)) and np.all(np.isfinite(gamma))):
        raise NumericalFailureError("non-finite values in the Trans-CO iteration")
    delta = cache.to_original(d)
    rss = transformed_rss(cache, delta, gamma)
    if rss <= RSS_ZERO_RTOL * float(target.Y @ target.Y):
        rss = 0.0
    n_shift = int(np.count_nonzero(gamma))
    df = int(np.count_nonzero(d)) + n_shift
    bic = path_bic(rss, target.n - B.shape[1], df, n_shift, target.n)
    return TransferFit(
        w_hat=w, delta_hat=delta, gamma_hat=gamma, beta_hat=B @ w + delta, lam=float(lam),
        objective_trace=trace[:, 1].copy(), iterations=int(iters), converged=bool(converged),
        bic=bic, rss=rss, descent_trace=trace)


def lambda_max(target, cache, init):
    """Smallest penalty whose first step from ``init`` zeroes ``xi``.

    Also covers the all-zero state, so that ``xi = 0`` is a fixed point at the
    top of the grid, and is floored at ``LAMBDA_FLOOR_RTOL`` times the scale
    of ``Y`` so that an exactly explained response is not fitted to rounding.
    """
    L = cache.step_scale
    Xs, Y = cache.X, target.Y
    d0 = cache.to_working(init.delta)
    r0 = Y - cache.Z @ init.w - Xs @ d0 - init.gamma
    t0 = np.concatenate([d0 + (Xs.T @ r0) / L, init.gamma + r0 / L])
    r_null = Y - cache.Z @ (cache.Z_pinv @ Y)
    null_top = max(float(np.max(np.abs(Xs.T @ r_null))), float(np.max(np.abs(r_null))))
    floor = LAMBDA_FLOOR_RTOL * (float(np.max(np.abs(Xs.T @ Y))) + float(np.max(np.abs(Y))))
    return max(L * float(np.max(np.abs(t0))), null_top, floor)


def transco_bic_path(target, ensemble, grid_size=DEFAULT_GRID_SIZE, tol=DEFAULT_TOL,
                     max_iter=DEFAULT_MAX_ITER, warm_start=False, normalize=True, start="zero"):
    """Tune ``lam`` by BIC* in the transformed model; returns (path, best fit).

    Every grid point starts from the same initial state (see
    ``initial_state``) unless ``warm_start`` is set. Cold starts keep the
    hard-threshold path from drifting into near-interpolating fits that BIC*
    cannot tell apart from good ones.
    """
    cache = build_transform(target.X, ensemble.B_hat, target.Y, normalize=normalize)
    init = initial_state(target, cache, start)
    lambdas = lambda_grid(lambda_max(target, cache, init), grid_size)
    fits = []
    state = init
    for lam in lambdas:
        fit = transco_fit(target, ensemble, lam, tol, max_iter, init=state, cache=cache)
        fits.append(fit)
        if warm_start:
            state = fit.state
    bic = np.array([f.bic for f in fits])
    path = TuningPath(lambdas=lambdas, df=np.array([f.df for f in fits]),
                      rss=np.array([f.rss for f in fits]), bic=bic,
                      best_index=int(np.argmin(bic)))
    best = fits[path.best_index]
    log.debug("transco path: best lambda %.4g, df %d", path.best_lambda, best.df)
    return path, best


def transco_full(target, sources, grid_size=DEFAULT_GRID_SIZE, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, source_max_iter=500, start="zero"):
    """Fit sources, then tune and fit Trans-CO on the target."""
    if not sources:
        raise InvalidParameterError("at least one source dataset is required")
    ensemble = fit_sources(sources, grid_size=grid_size, tol=tol, max_iter=source_max_iter)
    path, fit = transco_bic_path(target, ensemble, grid_size=grid_size, tol=tol, max_iter=max_iter,
                                 start=start)
    return fit
