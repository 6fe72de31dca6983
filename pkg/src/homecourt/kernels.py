"""Backend selection for the numerical hot loops.

The compiled extension is used when it imports; set ``HOMECOURT_PURE_PYTHON=1``
to force the numpy fallback. Both backends satisfy the same contracts and the
test-suite checks them against each other.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("HOMECOURT_PURE_PYTHON") == "1":
        raise ImportError("pure-python backend requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None else "python"


class SparseOps:
    """CSR products for designs dominated by indicator columns."""

    backend = "compiled"

    def __init__(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        self.n, self.p = X.shape
        self.indptr, self.indices, self.data = _ckernels.csr_from_dense(X)

    def dot(self, v):
        out = np.empty(self.n)
        _ckernels.csr_matvec(self.indptr, self.indices, self.data, np.ascontiguousarray(v, dtype=float), out)
        return out

    def rdot(self, u):
        out = np.empty(self.p)
        _ckernels.csr_rmatvec(self.indptr, self.indices, self.data, np.ascontiguousarray(u, dtype=float), out)
        return out

    def gram(self, w):
        out = np.empty((self.p, self.p))
        _ckernels.csr_weighted_gram(self.indptr, self.indices, self.data, np.ascontiguousarray(w, dtype=float), out)
        return out


def design_ops(X, backend: str | None = None):
    if _pick(backend) == "compiled":
        return SparseOps(X)
    return _pykernels.DenseOps(X)


def cd_quadratic(H, c, theta, penalty, tol=1e-13, max_sweeps=100_000, backend: str | None = None):
    """Coordinate descent for ``0.5 t'Ht + c't + sum(penalty*|t|)``; updates ``theta`` in place.

    Returns the number of sweeps, or -1 when ``max_sweeps`` was hit.
    """
    args = (np.ascontiguousarray(H, dtype=float), np.ascontiguousarray(c, dtype=float), theta,
            np.ascontiguousarray(penalty, dtype=float), float(tol), int(max_sweeps))
    if _pick(backend) == "compiled":
        return _ckernels.cd_quadratic(*args)
    return _pykernels.cd_quadratic(*args)


def ks_statistic(a_sorted, b_sorted, backend: str | None = None) -> float:
    a = np.ascontiguousarray(a_sorted, dtype=float)
    b = np.ascontiguousarray(b_sorted, dtype=float)
    if _pick(backend) == "compiled":
        return float(_ckernels.ks_statistic(a, b))
    return _pykernels.ks_statistic(a, b)


def _pick(backend):
    if backend is None:
        return BACKEND
    if backend == "compiled" and _ckernels is None:
        raise RuntimeError("compiled kernels are not built")
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend
