"""Non-negative least squares by the classic active-set iteration.

Solves min_beta sum_i w_i * (y_i - X_i . beta)^2 subject to beta >= 0.
Weights fold in as a sqrt(w) row scaling, after which this is the
Lawson-Hanson procedure: the coefficient with the largest positive
gradient leaves the zero bound, a least-squares solve runs on the free
columns, and a line search pins any coefficient the solve drove
negative back at zero.  Finite and deterministic; ties break on the
lowest column index.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateSystem


def weighted_sse(X, y, beta, weights=None) -> float:
    """Objective value sum_i w_i * (y_i - X_i . beta)^2."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    residual = y - X @ beta
    if weights is None:
        return float(residual @ residual)
    w = np.asarray(weights, dtype=float)
    return float(w @ (residual * residual))


def _free_ls(A, b, free):
    s = np.zeros(A.shape[1])
    s[free] = np.linalg.lstsq(A[:, free], b, rcond=None)[0]
    return s


def solve_nnls(X, y, weights=None, tol: float = 1e-9, max_iter: int | None = None) -> np.ndarray:
    """Return beta >= 0 minimizing the weighted squared residual.

    tol is the absolute KKT tolerance on the dual vector (the gradient
    over columns held at zero).  Raises DegenerateSystem when the design
    has no usable columns (empty, or an all-zero column).
    """
    A = np.asarray(X, dtype=float)
    b = np.asarray(y, dtype=float)
    if A.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"y has shape {b.shape}, expected ({m},)")
    if m == 0 or n == 0:
        raise DegenerateSystem("empty design matrix")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (m,):
            raise ValueError(f"weights have shape {w.shape}, expected ({m},)")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        sw = np.sqrt(w)
        A = A * sw[:, None]
        b = b * sw
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("X and y must be finite")
    if np.any(np.linalg.norm(A, axis=0) == 0.0):
        raise DegenerateSystem("design matrix has an all-zero column")

    if max_iter is None:
        max_iter = 3 * n

    beta = np.zeros(n)
    free = np.zeros(n, dtype=bool)
    grad = A.T @ b
    for _ in range(max_iter):
        bound = ~free
        if not bound.any() or np.max(grad[bound]) <= tol:
            break
        candidates = np.where(bound, grad, -np.inf)
        free[int(np.argmax(candidates))] = True
        s = _free_ls(A, b, free)
        # Pull back along the segment [beta, s] until the free set is feasible.
        while np.min(s[free]) <= 0.0:
            limiting = free & (s <= 0.0)
            alpha = np.min(beta[limiting] / (beta[limiting] - s[limiting]))
            beta = beta + alpha * (s - beta)
            pinned = free & (beta <= tol * max(1.0, float(np.max(np.abs(beta)))))
            beta[pinned] = 0.0
            free[pinned] = False
            if not free.any():
                s = np.zeros(n)
                break
            s = _free_ls(A, b, free)
        beta = s
        grad = A.T @ (b - A @ beta)
    return beta
