"""Convex single-node fits: l1-regularized logistic and hinge models.

The logistic fit runs proximal gradient with backtracking; the hinge
fit runs proximal subgradient with a diminishing step and best-iterate
tracking. The l1 term is handled by soft thresholding and the bias is
never penalized. These power the greedy warm start and the last-layer
refinement.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

_MAX_ITERS = 5000
_REL_TOL = 1e-8
_BIAS_CLAMP = 10.0


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _logistic_value(margins: np.ndarray) -> float:
    return float(np.logaddexp(0.0, -margins).sum())


def _logistic_grad_factor(margins: np.ndarray) -> np.ndarray:
    # d/dm log(1+e^{-m}) = -sigmoid(-m), computed stably
    out = np.empty_like(margins)
    pos = margins >= 0
    out[pos] = -np.exp(-margins[pos]) / (1.0 + np.exp(-margins[pos]))
    out[~pos] = -1.0 / (1.0 + np.exp(margins[~pos]))
    return out


def objective_l1_logistic(X, y, C, w, b, l1_weight: float = 1.0) -> float:
    m = y * (X @ w + b)
    return C * _logistic_value(m) + l1_weight * float(np.abs(w).sum())


def objective_l1_hinge(X, y, C, w, b, l1_weight: float = 1.0) -> float:
    m = y * (X @ w + b)
    return C * float(np.maximum(0.0, 1.0 - m).sum()) + l1_weight * float(np.abs(w).sum())


def _single_class_fit(y: np.ndarray, p: int) -> tuple[np.ndarray, float]:
    """All labels equal: zero weights, saturated sign-consistent bias."""
    return np.zeros(p), _BIAS_CLAMP * float(y[0])


def fit_l1_logistic(points: np.ndarray, labels: np.ndarray, C: float,
                    l1_weight: float = 1.0,
                    w0: Optional[np.ndarray] = None, b0: Optional[float] = None,
                    max_iters: int = _MAX_ITERS,
                    rel_tol: float = _REL_TOL) -> tuple[np.ndarray, float]:
    """Fit min_{w,b} C*sum_i log(1+exp(-y_i(w.x_i+b))) + l1_weight*|w|_1.

    The bias is unpenalized. Proximal gradient steps with backtracking
    run until the relative objective change drops below ``rel_tol`` or
    ``max_iters`` is reached. A single-class input returns zero weights
    and a sign-consistent bias clamped to magnitude 10; an empty input
    returns the zero classifier.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(labels, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(X.shape[1]), 0.0
    if np.all(y == y[0]):
        return _single_class_fit(y, X.shape[1])

    C = float(C)
    l1_weight = float(l1_weight)
    w = np.zeros(X.shape[1]) if w0 is None else np.asarray(w0, dtype=float).copy()
    b = 0.0 if b0 is None else float(b0)

    def smooth(wv, bv):
        return C * _logistic_value(y * (X @ wv + bv))

    step = 1.0
    f_prev = smooth(w, b) + l1_weight * float(np.abs(w).sum())
    for _ in range(max_iters):
        m = y * (X @ w + b)
        g = C * _logistic_grad_factor(m) * y
        grad_w = X.T @ g
        grad_b = float(g.sum())
        f_smooth = C * _logistic_value(m)

        accepted = False
        for _ in range(60):
            w_new = _soft_threshold(w - step * grad_w, step * l1_weight)
            b_new = b - step * grad_b
            dw = w_new - w
            db = b_new - b
            quad = f_smooth + grad_w @ dw + grad_b * db \
                + (dw @ dw + db * db) / (2.0 * step)
            if smooth(w_new, b_new) <= quad + 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w, b = w_new, b_new
        step *= 1.25

        f = smooth(w, b) + l1_weight * float(np.abs(w).sum())
        if abs(f_prev - f) < rel_tol * max(1.0, abs(f_prev)):
            break
        f_prev = f
    return w, float(b)


def fit_l1_hinge(points: np.ndarray, labels: np.ndarray, C: float,
                 l1_weight: float = 1.0,
                 w0: Optional[np.ndarray] = None, b0: Optional[float] = None,
                 max_iters: int = _MAX_ITERS,
                 rel_tol: float = _REL_TOL) -> tuple[np.ndarray, float]:
    """Hinge analogue of :func:`fit_l1_logistic`.

    Uses proximal subgradient steps with a diminishing step size and
    returns the best iterate seen; stops early once the best objective
    has been flat (relative change below ``rel_tol``) for a stretch.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(labels, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(X.shape[1]), 0.0
    if np.all(y == y[0]):
        return _single_class_fit(y, X.shape[1])

    C = float(C)
    l1_weight = float(l1_weight)
    w = np.zeros(X.shape[1]) if w0 is None else np.asarray(w0, dtype=float).copy()
    b = 0.0 if b0 is None else float(b0)

    def total(wv, bv):
        return objective_l1_hinge(X, y, C, wv, bv, l1_weight)

    row_scale = float((X * X).sum(axis=1).mean()) + 1.0
    step0 = 1.0 / (C * row_scale)
    best_w, best_b, best_f = w.copy(), b, total(w, b)
    flat = 0
    for it in range(max_iters):
        m = y * (X @ w + b)
        g = C * np.where(m < 1.0, -1.0, 0.0) * y
        step = step0 / (1.0 + it / 50.0)
        w = _soft_threshold(w - step * (X.T @ g), step * l1_weight)
        b -= step * float(g.sum())
        f = total(w, b)
        if f < best_f - rel_tol * max(1.0, abs(best_f)):
            best_w, best_b, best_f = w.copy(), b, f
            flat = 0
        else:
            flat += 1
            if flat >= 200:
                break
    return best_w, float(best_b)
