"""Inner iteration loops for the solvers.

Each kernel exists twice: a numba version written as explicit loops
(``*_nb``) and a vectorised numpy version (``*_np``). The public names
(``ipod_loop``, ``transco_loop``, ``lasso_cd_loop``) point at one or the other
according to ``transco._accel.USE_NUMBA``. Both versions implement identical
arithmetic so results agree to rounding.

All arrays must be float64 and C-contiguous; callers in the solver modules
take care of that.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------


@njit
def _hard_penalty_sum_nb(v, thr, scale):
    # scale * P_hard(v; thr), summed; thr may be a scalar broadcast or vector
    total = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        t = thr[i] if thr.shape[0] > 1 else thr[0]
        if a <= t:
            total += t * a - 0.5 * a * a
        else:
            total += 0.5 * t * t
    return scale * total


@njit
def ipod_loop_nb(U, r, lam, gamma0, tol, max_iter):
    n, p = U.shape
    gamma = gamma0.copy()
    c = np.empty(p)
    u = np.empty(n)
    trace = np.empty(max_iter + 1)

    def _project(g):
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += U[i, j] * g[i]
            c[j] = acc
        for i in range(n):
            acc = 0.0
            for j in range(p):
                acc += U[i, j] * c[j]
            u[i] = acc + r[i]

    def _objective(g):
        rss = 0.0
        for i in range(n):
            d = u[i] - g[i]
            rss += d * d
        return 0.5 * rss + _hard_penalty_sum_nb(g, lam, 1.0)

    _project(gamma)
    trace[0] = _objective(gamma)
    it = 0
    converged = False
    while it < max_iter:
        diff = 0.0
        for i in range(n):
            new = u[i] if abs(u[i]) > lam[i] else 0.0
            d = abs(new - gamma[i])
            if d > diff:
                diff = d
            gamma[i] = new
        it += 1
        _project(gamma)
        trace[it] = _objective(gamma)
        if diff < tol:
            converged = True
            break
    return gamma, it, converged, trace[: it + 1].copy()


@njit
def transco_loop_nb(X, Z, Zpinv, Y, delta0, gamma0, thr, scale, tol, max_iter):
    n, p = X.shape
    K = Z.shape[1]
    delta = delta0.copy()
    gamma = gamma0.copy()
    w = np.zeros(K)
    xd = np.empty(n)
    v = np.empty(n)
    r = np.empty(n)
    grad = np.empty(p)
    new_delta = np.empty(p)
    trace = np.empty((max_iter, 2))
    thr_arr = np.array([thr])

    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += X[i, j] * delta[j]
        xd[i] = acc

    it = 0
    converged = False
    while it < max_iter:
        # w-update: OLS of Y - X delta - gamma on Z
        for i in range(n):
            v[i] = Y[i] - xd[i] - gamma[i]
        for k in range(K):
            acc = 0.0
            for i in range(n):
                acc += Zpinv[k, i] * v[i]
            w[k] = acc
        rss = 0.0
        for i in range(n):
            acc = 0.0
            for k in range(K):
                acc += Z[i, k] * w[k]
            r[i] = v[i] - acc
            rss += r[i] * r[i]
        trace[it, 0] = (0.5 * rss
                        + _hard_penalty_sum_nb(delta, thr_arr, scale)
                        + _hard_penalty_sum_nb(gamma, thr_arr, scale))

        # joint xi-update from the residual at the old (delta, gamma)
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += X[i, j] * r[i]
            grad[j] = acc
        for j in range(p):
            t = delta[j] + grad[j] / scale
            new_delta[j] = t if abs(t) > thr else 0.0
        diff = 0.0
        for i in range(n):
            t = gamma[i] + r[i] / scale
            new = t if abs(t) > thr else 0.0
            d = abs(new - gamma[i])
            if d > diff:
                diff = d
            gamma[i] = new
        for j in range(p):
            delta[j] = new_delta[j]

        for i in range(n):
            acc = 0.0
            for j in range(p):
                acc += X[i, j] * delta[j]
            xd[i] = acc
        rss = 0.0
        for i in range(n):
            acc = 0.0
            for k in range(K):
                acc += Z[i, k] * w[k]
            d = Y[i] - acc - xd[i] - gamma[i]
            rss += d * d
        trace[it, 1] = (0.5 * rss
                        + _hard_penalty_sum_nb(delta, thr_arr, scale)
                        + _hard_penalty_sum_nb(gamma, thr_arr, scale))
        it += 1
        if diff < tol:
            converged = True
            break
    return w, delta, gamma, it, converged, trace[:it].copy()


@njit
def lasso_cd_loop_nb(X, y, lam, beta0, tol, max_iter):
    n, p = X.shape
    beta = beta0.copy()
    col_sq = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * X[i, j]
        col_sq[j] = acc
    r = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * beta[j]
    it = 0
    converged = False
    while it < max_iter:
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = 0.0
            for i in range(n):
                rho += X[i, j] * r[i]
            rho += col_sq[j] * old
            if rho > lam:
                new = (rho - lam) / col_sq[j]
            elif rho < -lam:
                new = (rho + lam) / col_sq[j]
            else:
                new = 0.0
            if new != old:
                step = new - old
                for i in range(n):
                    r[i] -= X[i, j] * step
                beta[j] = new
                if abs(step) > max_change:
                    max_change = abs(step)
        it += 1
        if max_change < tol:
            converged = True
            break
    return beta, it, converged


# ---------------------------------------------------------------------------
# numpy versions
# ---------------------------------------------------------------------------


def _hard_penalty_sum_np(v, thr, scale):
    a = np.abs(v)
    return scale * float(np.sum(np.where(a <= thr, thr * a - 0.5 * a * a, 0.5 * thr * thr)))


def ipod_loop_np(U, r, lam, gamma0, tol, max_iter):
    gamma = gamma0.copy()
    trace = np.empty(max_iter + 1)
    u = U @ (U.T @ gamma) + r
    trace[0] = 0.5 * float(np.sum((u - gamma) ** 2)) + _hard_penalty_sum_np(gamma, lam, 1.0)
    it = 0
    converged = False
    while it < max_iter:
        new = np.where(np.abs(u) > lam, u, 0.0)
        diff = float(np.max(np.abs(new - gamma))) if new.size else 0.0
        gamma = new
        it += 1
        u = U @ (U.T @ gamma) + r
        trace[it] = 0.5 * float(np.sum((u - gamma) ** 2)) + _hard_penalty_sum_np(gamma, lam, 1.0)
        if diff < tol:
            converged = True
            break
    return gamma, it, converged, trace[: it + 1].copy()


def transco_loop_np(X, Z, Zpinv, Y, delta0, gamma0, thr, scale, tol, max_iter):
    delta = delta0.copy()
    gamma = gamma0.copy()
    w = np.zeros(Z.shape[1])
    trace = np.empty((max_iter, 2))
    xd = X @ delta
    it = 0
    converged = False

    def _pen(d, g):
        return _hard_penalty_sum_np(d, thr, scale) + _hard_penalty_sum_np(g, thr, scale)

    while it < max_iter:
        v = Y - xd - gamma
        w = Zpinv @ v
        r = v - Z @ w
        trace[it, 0] = 0.5 * float(r @ r) + _pen(delta, gamma)
        t_delta = delta + (X.T @ r) / scale
        t_gamma = gamma + r / scale
        delta = np.where(np.abs(t_delta) > thr, t_delta, 0.0)
        new_gamma = np.where(np.abs(t_gamma) > thr, t_gamma, 0.0)
        diff = float(np.max(np.abs(new_gamma - gamma)))
        gamma = new_gamma
        xd = X @ delta
        e = Y - Z @ w - xd - gamma
        trace[it, 1] = 0.5 * float(e @ e) + _pen(delta, gamma)
        it += 1
        if diff < tol:
            converged = True
            break
    return w, delta, gamma, it, converged, trace[:it].copy()


def lasso_cd_loop_np(X, y, lam, beta0, tol, max_iter):
    # covariance-update form: keeps X^T r current instead of r itself
    beta = beta0.copy()
    gram = X.T @ X
    col_sq = np.diag(gram).copy()
    corr = X.T @ y - gram @ beta
    it = 0
    converged = False
    while it < max_iter:
        max_change = 0.0
        for j in range(beta.shape[0]):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = corr[j] + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            if new != old:
                corr -= gram[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        it += 1
        if max_change < tol:
            converged = True
            break
    return beta, it, converged


if USE_NUMBA:
    ipod_loop = ipod_loop_nb
    transco_loop = transco_loop_nb
    lasso_cd_loop = lasso_cd_loop_nb
else:
    ipod_loop = ipod_loop_np
    transco_loop = transco_loop_np
    lasso_cd_loop = lasso_cd_loop_np
