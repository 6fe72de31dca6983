"""Pure numpy fallbacks with the same contracts as the compiled kernels."""
import numpy as np


class DenseOps:
    """Matrix products on a dense design."""

    backend = "python"

    def __init__(self, X):
        self.X = np.ascontiguousarray(X, dtype=float)
        self.n, self.p = self.X.shape

    def dot(self, v):
        return self.X @ v

    def rdot(self, u):
        return self.X.T @ u

    def gram(self, w):
        return (self.X * w[:, None]).T @ self.X


def cd_quadratic(H, c, theta, penalty, tol, max_sweeps):
    p = H.shape[0]
    r = c + H @ theta
    diag = np.diag(H).copy()
    for sweep in range(max_sweeps):
        maxd = 0.0
        for j in range(p):
            hjj = diag[j]
            if hjj <= 0.0:
                continue
            u = hjj * theta[j] - r[j]
            pj = penalty[j]
            new = (u - pj) / hjj if u > pj else (u + pj) / hjj if u < -pj else 0.0
            delta = new - theta[j]
            if delta != 0.0:
                theta[j] = new
                r += H[:, j] * delta
                maxd = max(maxd, abs(delta) * np.sqrt(hjj))
        if maxd < tol:
            return sweep + 1
    return -1


def ks_statistic(a, b):
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / len(a)
    fb = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))
