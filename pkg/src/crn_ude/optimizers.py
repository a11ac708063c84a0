"""Optimization building blocks for multistart fitting.

All routines take a ``value_and_grad`` callable mapping a working-scale
vector to ``(loss, gradient)``.  Infinite losses are ordinary values
(divergent simulations); both optimizers track the best finite iterate
seen and fall back to it rather than aborting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["latin_hypercube", "minimize_adam", "LbfgsResult", "minimize_lbfgs"]


def latin_hypercube(bounds, n, seed) -> np.ndarray:
    """n stratified samples in a box; one sample per stratum per axis.

    ``bounds`` is a (d, 2) array of per-coordinate (lo, hi).  Returns an
    (n, d) design, deterministic per seed.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must be (d, 2)")
    if n < 1:
        raise ValueError("need n >= 1")
    if not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be finite")
    rng = np.random.default_rng(seed)
    d = bounds.shape[0]
    out = np.empty((n, d))
    for j in range(d):
        strata = (rng.permutation(n) + rng.uniform(size=n)) / n
        lo, hi = bounds[j]
        out[:, j] = lo + (hi - lo) * strata
    return out


def minimize_adam(value_and_grad, start, iters=2000, lr=1e-2,
                  beta1=0.9, beta2=0.999, eps=1e-8) -> np.ndarray:
    """Adam descent; returns the best-seen iterate, not the last one.

    Iterates with nonfinite loss or gradient are skipped (the walk
    resumes from the best point so far); a long run of consecutive
    failures aborts early.
    """
    x = np.asarray(start, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_x = x.copy()
    best_f = np.inf
    bad_streak = 0
    for k in range(1, iters + 1):
        f, g = value_and_grad(x)
        if np.isfinite(f) and f < best_f:
            best_f = f
            best_x = x.copy()
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            bad_streak += 1
            if bad_streak > 50:
                break
            x = best_x.copy() if np.isfinite(best_f) else x
            m[:] = 0.0
            v[:] = 0.0
            continue
        bad_streak = 0
        with np.errstate(over="ignore", invalid="ignore"):
            m = beta1 * m + (1.0 - beta1) * g
            v = beta2 * v + (1.0 - beta2) * g**2
            mhat = m / (1.0 - beta1**k)
            vhat = v / (1.0 - beta2**k)
            x = x - lr * mhat / (np.sqrt(vhat) + eps)
    if iters > 0:
        f, _ = value_and_grad(x)
        if np.isfinite(f) and f < best_f:
            best_f = f
            best_x = x.copy()
    return best_x if np.isfinite(best_f) else np.asarray(start, dtype=float)


@dataclass
class LbfgsResult:
    x: np.ndarray
    loss: float
    n_iters: int
    status: str  # gtol | ftol | maxiter | line_search_failed | start_not_finite


def minimize_lbfgs(value_and_grad, start, max_iters=5000, memory=10,
                   gtol=1e-8, ftol_rel=1e-12, c1=1e-4, c2=0.9) -> LbfgsResult:
    """L-BFGS with a strong-Wolfe line search.

    Stops on gradient norm < gtol, relative loss change < ftol_rel, or
    the iteration cap.  A failed line search returns the best-seen
    iterate with status 'line_search_failed'.
    """
    x = np.asarray(start, dtype=float).copy()
    f, g = value_and_grad(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return LbfgsResult(x, float(f), 0, "start_not_finite")

    s_hist, y_hist, rho_hist = [], [], []
    status = "maxiter"
    k = 0
    for k in range(1, max_iters + 1):
        if np.linalg.norm(g) < gtol:
            status = "gtol"
            k -= 1
            break
        d = _two_loop_direction(g, s_hist, y_hist, rho_hist)
        if np.dot(d, g) >= 0:  # safeguard: fall back to steepest descent
            d = -g
        alpha, f_new, g_new = _strong_wolfe(value_and_grad, x, f, g, d, c1, c2)
        if alpha is None:
            status = "line_search_failed"
            break
        x_new = x + alpha * d
        s = x_new - x
        y = g_new - g
        sy = np.dot(s, y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        df = f - f_new
        x, f, g = x_new, f_new, g_new
        if df <= ftol_rel * max(1.0, abs(f)):
            status = "ftol"
            break
    return LbfgsResult(x, float(f), k, status)


def _two_loop_direction(g, s_hist, y_hist, rho_hist):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _strong_wolfe(value_and_grad, x, f0, g0, d, c1, c2, alpha0=1.0, max_evals=25):
    """Bracket/zoom strong-Wolfe search.

    Nonfinite trial values are treated as 'stepped too far', which
    shrinks the bracket instead of poisoning the interpolation.
    """
    dg0 = np.dot(g0, d)
    if dg0 >= 0:
        return None, None, None

    def phi(a):
        fa, ga = value_and_grad(x + a * d)
        return fa, ga, (np.dot(ga, d) if np.all(np.isfinite(ga)) else np.nan)

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = alpha0
    evals = 0
    while evals < max_evals:
        fa, ga, dga = phi(a)
        evals += 1
        if not np.isfinite(fa):
            # shrink: divergence along the ray
            result = _zoom(phi, a_prev, f_prev, dg_prev, a, f0, dg0, c1, c2,
                           max_evals - evals, hi_finite=False)
            return result
        if fa > f0 + c1 * a * dg0 or (evals > 1 and fa >= f_prev):
            return _zoom(phi, a_prev, f_prev, dg_prev, a, f0, dg0, c1, c2,
                         max_evals - evals, hi_f=fa)
        if np.isfinite(dga) and abs(dga) <= -c2 * dg0:
            return a, fa, ga
        if np.isfinite(dga) and dga >= 0:
            return _zoom(phi, a, fa, dga, a_prev, f0, dg0, c1, c2,
                         max_evals - evals, hi_f=f_prev)
        a_prev, f_prev, dg_prev = a, fa, dga
        a *= 2.0
    return None, None, None


def _zoom(phi, lo, f_lo, dg_lo, hi, f0, dg0, c1, c2, budget, hi_f=None, hi_finite=True):
    for _ in range(max(budget, 1)):
        a = 0.5 * (lo + hi)
        fa, ga, dga = phi(a)
        if not np.isfinite(fa) or fa > f0 + c1 * a * dg0 or fa >= f_lo:
            hi = a
        else:
            if np.isfinite(dga) and abs(dga) <= -c2 * dg0:
                return a, fa, ga
            if np.isfinite(dga) and dga * (hi - lo) >= 0:
                hi = lo
            lo, f_lo, dg_lo = a, fa, dga
        if abs(hi - lo) < 1e-16:
            break
    # accept the lo end if it at least improves on f0
    if lo > 0 and np.isfinite(f_lo) and f_lo < f0:
        fa, ga, _ = phi(lo)
        return lo, fa, ga
    return None, None, None
