"""Damped least-squares (Levenberg-Marquardt) core shared by all fits."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class LsqResult:
    x: np.ndarray
    residual: np.ndarray
    rss: float
    jac: np.ndarray
    converged: bool
    iterations: int
    message: str = ""

    def covariance(self):
        """Parameter covariance s^2 (J^T J)^-1, or None when J is rank deficient."""
        m, n = self.jac.shape
        if m <= n:
            return None
        jtj = self.jac.T @ self.jac
        if np.linalg.matrix_rank(self.jac) < n:
            return None
        s2 = self.rss / (m - n)
        return s2 * np.linalg.pinv(jtj)

    def stderr(self):
        cov = self.covariance()
        if cov is None:
            return None
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def numeric_jacobian(fun, x, scale=None, rel_step=1e-6):
    """Central-difference Jacobian with step rel_step * max(|x_i|, scale_i)."""
    x = np.asarray(x, dtype=float)
    if scale is None:
        scale = np.ones_like(x)
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), scale[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return jac


def levenberg_marquardt(fun: Callable, x0, jac: Optional[Callable] = None, scale=None,
                        max_iter=1000, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        lam0=1e-3) -> LsqResult:
    """Minimise sum(fun(x)**2).

    ``jac`` returns d fun / d x; central differences are used when omitted.
    Marquardt's diagonal scaling is applied, and the damped normal step is
    solved as an augmented least-squares problem for stability.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)

    def J(p):
        return np.asarray(jac(p), dtype=float) if jac is not None else numeric_jacobian(fun, p, scale)

    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("residual is not finite at the starting point")
    rss = float(r @ r)
    jm = J(x)
    lam = lam0
    converged = False
    msg = "max_iter reached"
    it = 0
    for it in range(1, max_iter + 1):
        g = jm.T @ r
        d = np.sqrt(np.maximum(np.sum(jm * jm, axis=0), 1e-300))
        if np.max(np.abs(g) / d) <= gtol * max(np.sqrt(rss), 1e-300) or rss == 0.0:
            converged = True
            msg = "gradient tolerance"
            break
        improved = False
        while lam < 1e16:
            a = np.vstack([jm, np.sqrt(lam) * np.diag(d)])
            b = np.concatenate([-r, np.zeros(n)])
            step = np.linalg.lstsq(a, b, rcond=None)[0]
            xn = x + step
            # wild trial steps may overflow; they are rejected below
            with np.errstate(all="ignore"):
                rn = np.asarray(fun(xn), dtype=float)
                rss_n = float(rn @ rn) if np.all(np.isfinite(rn)) else np.inf
            if np.isfinite(rss_n):
                if rss_n < rss:
                    improved = True
                    break
            lam *= 10.0
        if not improved:
            converged = True
            msg = "no further decrease"
            break
        small_step = np.all(np.abs(step) <= xtol * (np.abs(x) + xtol))
        small_f = (rss - rss_n) <= ftol * rss
        x, r, rss = xn, rn, rss_n
        jm = J(x)
        lam = max(lam / 10.0, 1e-12)
        if small_step or small_f:
            converged = True
            msg = "step tolerance" if small_step else "function tolerance"
            break
    return LsqResult(x, r, rss, jm, converged, it, msg)
