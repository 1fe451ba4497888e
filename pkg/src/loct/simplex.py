"""Bounded-variable primal simplex for sparse LPs.

Rows a.x (<=|>=|=) rhs are brought to equality form with one slack per
row; rows whose slack cannot absorb the starting residual receive a
phase-1 artificial. The basis is LU-factorized (dense for small row
counts, sparse otherwise) and updated in product form, refactorizing
periodically. Entering variables are priced by the Dantzig rule with a
Bland fallback after a degeneracy stall, which guarantees termination.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_AT_LO = 1
_AT_UP = 2
_FREE = 3
_FIXED = 4

_DENSE_LIMIT = 500
_REFACTOR_EVERY = 100
_STALL_LIMIT = 300
_PIVOT_TOL = 1e-9
_RATIO_SLACK = 1e-9
_FEAS_TOL = 1e-7
_BOUND_TOL = 1e-7
# phase-1 artificial mass above which the problem is declared
# infeasible; measured after an exact refactorization, where a feasible
# problem leaves only machine-level residue. A loose threshold here is
# dangerous: accepting a marginally infeasible point leaves a basic
# artificial above its frozen bound, and that error redistributes
# through the basis inverse into structural bound violations far larger
# than the residue itself.
_ART_TOL = 1e-9


class SimplexError(RuntimeError):
    """Numerical failure that repeated refactorization did not cure."""


class _DriftError(SimplexError):
    """Internal: final point drifted; the caller retries from scratch."""


class LpTimeout(Exception):
    """Raised when a deadline expires inside the pivot loop."""


@dataclass
class LpSolution:
    """Result of an LP solve.

    ``values`` holds the structural variables only. When the status is
    optimal, the point lies exactly within bounds (a final clip moves it
    at most 1e-7 per variable) and every row holds within 1e-7 before
    that clip.
    """

    status: str  # optimal | infeasible | unbounded
    values: Optional[np.ndarray]
    objective: float
    iterations: int


@dataclass
class StandardLp:
    """Preprocessed LP data shared across repeated solves.

    ``A`` holds the structural columns only; slack and artificial
    columns are implicit unit vectors. Senses map to slack bounds:
    '<' gives [0, inf), '>' gives (-inf, 0], '=' fixes the slack at 0.
    """

    c: np.ndarray
    A: sp.csc_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]


def make_standard_lp(c, a_rows, senses, rhs, lower, upper) -> StandardLp:
    """Assemble a StandardLp from row-wise sparse data.

    ``a_rows`` is a sequence of (cols, coefs) pairs, one per row;
    senses are given as '<=', '>=', '='.
    """
    c = np.asarray(c, dtype=float)
    m = len(a_rows)
    data, rows, cols = [], [], []
    for r, (rc, rv) in enumerate(a_rows):
        for col, val in zip(rc, rv):
            rows.append(r)
            cols.append(int(col))
            data.append(float(val))
    A = sp.csc_matrix((data, (rows, cols)), shape=(m, c.shape[0]))
    sense_arr = np.array([{"<=": "<", ">=": ">", "=": "="}[s] for s in senses])
    return StandardLp(c, A, sense_arr,
                      np.asarray(rhs, dtype=float),
                      np.asarray(lower, dtype=float),
                      np.asarray(upper, dtype=float))


class _Basis:
    """LU factorization of the current basis with product-form updates."""

    def __init__(self, std: StandardLp):
        self.std = std
        self.m = std.n_rows
        self.dense = self.m <= _DENSE_LIMIT
        self.etas: list[tuple[int, np.ndarray]] = []
        self._lu = None

    def column(self, col: int, art_sign: np.ndarray) -> np.ndarray:
        """Dense column of the full matrix [A | I | diag(art_sign)]."""
        m, n = self.m, self.std.n_cols
        out = np.zeros(m)
        if col < n:
            A = self.std.A
            lo, hi = A.indptr[col], A.indptr[col + 1]
            out[A.indices[lo:hi]] = A.data[lo:hi]
        elif col < n + m:
            out[col - n] = 1.0
        else:
            r = col - n - m
            out[r] = art_sign[r]
        return out

    def refactor(self, basis: np.ndarray, art_sign: np.ndarray) -> None:
        self.etas = []
        m, n = self.m, self.std.n_cols
        try:
            if self.dense:
                B = np.zeros((m, m))
                for k, col in enumerate(basis):
                    B[:, k] = self.column(int(col), art_sign)
                self._lu = sla.lu_factor(B, check_finite=False)
            else:
                data, ri, ci = [], [], []
                A = self.std.A
                for k, col in enumerate(basis):
                    col = int(col)
                    if col < n:
                        lo, hi = A.indptr[col], A.indptr[col + 1]
                        ri.extend(A.indices[lo:hi].tolist())
                        data.extend(A.data[lo:hi].tolist())
                        ci.extend([k] * (hi - lo))
                    elif col < n + m:
                        ri.append(col - n)
                        ci.append(k)
                        data.append(1.0)
                    else:
                        r = col - n - m
                        ri.append(r)
                        ci.append(k)
                        data.append(float(art_sign[r]))
                B = sp.csc_matrix((data, (ri, ci)), shape=(m, m))
                self._lu = spla.splu(B)
        except (RuntimeError, ValueError) as exc:
            raise SimplexError(f"basis factorization failed: {exc}") from None

    def ftran(self, v: np.ndarray) -> np.ndarray:
        if self.dense:
            u = sla.lu_solve(self._lu, v, check_finite=False)
        else:
            u = self._lu.solve(v)
        for r, a in self.etas:
            t = u[r] / a[r]
            u -= a * t
            u[r] = t
        return u

    def btran(self, v: np.ndarray) -> np.ndarray:
        u = v.astype(float, copy=True)
        for r, a in reversed(self.etas):
            s = a @ u
            u[r] = (u[r] * (1.0 + a[r]) - s) / a[r]
        if self.dense:
            return sla.lu_solve(self._lu, u, trans=1, check_finite=False)
        return self._lu.solve(u, trans="T")

    def push_eta(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))

    @property
    def n_etas(self) -> int:
        return len(self.etas)


class _State:
    """Mutable simplex state over the full column space.

    Columns 0..n-1 are structural, n..n+m-1 slacks, n+m..n+2m-1
    artificials. ``art_sign`` orients each artificial so its starting
    value is nonnegative.
    """

    def __init__(self, std: StandardLp, lower: np.ndarray, upper: np.ndarray):
        n, m = std.n_cols, std.n_rows
        self.std = std
        self.n = n
        self.m = m
        slack_lo = np.where(std.senses == "<", 0.0, -math.inf)
        slack_lo[std.senses == "="] = 0.0
        slack_hi = np.where(std.senses == ">", 0.0, math.inf)
        slack_hi[std.senses == "="] = 0.0
        self.lo = np.concatenate([lower, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([upper, slack_hi, np.zeros(m)])
        self.art_sign = np.ones(m)
        self.vstat = np.zeros(n + 2 * m, dtype=np.int8)
        self.basis = np.zeros(m, dtype=np.int64)
        self.xB = np.zeros(m)
        self.values = np.zeros(n + 2 * m)  # resting values of nonbasic columns
        self.n_artificial = 0

    def start_point(self) -> None:
        """Rest every column at the finite bound nearest zero."""
        lo, hi = self.lo, self.hi
        for j in range(lo.shape[0]):
            if lo[j] == hi[j]:
                self.vstat[j] = _FIXED
                self.values[j] = lo[j]
            elif lo[j] == -math.inf and hi[j] == math.inf:
                self.vstat[j] = _FREE
                self.values[j] = 0.0
            elif lo[j] == -math.inf:
                self.vstat[j] = _AT_UP
                self.values[j] = hi[j]
            elif hi[j] == math.inf:
                self.vstat[j] = _AT_LO
                self.values[j] = lo[j]
            elif abs(lo[j]) <= abs(hi[j]):
                self.vstat[j] = _AT_LO
                self.values[j] = lo[j]
            else:
                self.vstat[j] = _AT_UP
                self.values[j] = hi[j]


def _initial_basis(state: _State) -> None:
    """Choose a slack-or-artificial starting basis from the residuals."""
    std = state.std
    n, m = state.n, state.m
    residual = std.rhs - std.A @ state.values[:n]
    state.n_artificial = 0
    for r in range(m):
        s_col = n + r
        res = residual[r]
        if state.lo[s_col] - 1e-11 <= res <= state.hi[s_col] + 1e-11:
            state.basis[r] = s_col
            state.vstat[s_col] = 0
            state.xB[r] = res
        else:
            a_col = n + m + r
            state.art_sign[r] = 1.0 if res > 0 else -1.0
            state.hi[a_col] = math.inf
            state.basis[r] = a_col
            state.vstat[a_col] = 0
            state.xB[r] = abs(res)
            state.n_artificial += 1


def _recompute_xb(state: _State, basis_obj: _Basis) -> None:
    """xB = B^{-1}(rhs - N x_N) from the resting values."""
    n, m = state.n, state.m
    x = state.values
    rhs_eff = state.std.rhs - state.std.A @ x[:n]
    rhs_eff -= x[n:n + m]
    rhs_eff -= state.art_sign * x[n + m:]
    # basic columns were subtracted with stale resting values; add back
    A = state.std.A
    for r in range(m):
        col = int(state.basis[r])
        xv = x[col]
        if xv == 0.0:
            continue
        if col < n:
            lo, hi = A.indptr[col], A.indptr[col + 1]
            rhs_eff[A.indices[lo:hi]] += A.data[lo:hi] * xv
        elif col < n + m:
            rhs_eff[col - n] += xv
        else:
            rhs_eff[col - n - m] += state.art_sign[col - n - m] * xv
    state.xB = basis_obj.ftran(rhs_eff)
    if not np.all(np.isfinite(state.xB)):
        raise SimplexError("non-finite basic values after factorization")


def _reduced_costs(state: _State, c_all: np.ndarray, y: np.ndarray) -> np.ndarray:
    n, m = state.n, state.m
    d = np.empty(n + 2 * m)
    d[:n] = c_all[:n] - state.std.A.T @ y
    d[n:n + m] = c_all[n:n + m] - y
    d[n + m:] = c_all[n + m:] - state.art_sign * y
    return d


def _pivot_loop(state: _State, basis_obj: _Basis, c_all: np.ndarray,
                deadline: Optional[float], iter_budget: int,
                refactor_every: int, ratio_slack: float = _RATIO_SLACK,
                jitter: Optional[np.ndarray] = None) -> tuple[str, int]:
    """Pivot to optimality; returns (status, iterations taken).

    ``ratio_slack`` widens the first ratio-test pass so the second pass
    can prefer well-conditioned pivots; each such pivot may overshoot a
    bound by at most the slack, and the overshoots accumulate over a
    long solve. The careful retry regime sets the slack to zero.
    ``jitter`` perturbs only the Dantzig entering choice, steering a
    retry onto a different pivot path; costs, ratios and the optimality
    test stay exact.
    """
    n, m = state.n, state.m
    tol_d = 1e-9 * max(1.0, float(np.abs(c_all).max()) if c_all.size else 1.0)
    basis_obj.refactor(state.basis, state.art_sign)
    _recompute_xb(state, basis_obj)
    c_b = c_all[state.basis]
    iters = 0
    stall = 0
    bland = False

    while True:
        if iters >= iter_budget:
            raise SimplexError(f"iteration budget {iter_budget} exhausted")
        if deadline is not None and iters % 32 == 0 and time.monotonic() > deadline:
            raise LpTimeout
        if basis_obj.n_etas >= refactor_every:
            basis_obj.refactor(state.basis, state.art_sign)
            _recompute_xb(state, basis_obj)

        y = basis_obj.btran(c_b)
        d = _reduced_costs(state, c_all, y)

        vstat = state.vstat
        eligible = (vstat == _AT_LO) & (d < -tol_d)
        eligible |= (vstat == _AT_UP) & (d > tol_d)
        eligible |= (vstat == _FREE) & (np.abs(d) > tol_d)
        if not eligible.any():
            return "optimal", iters

        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            if jitter is not None:
                score = score * jitter
            q = int(np.argmax(score))
        direction = 1.0 if (vstat[q] == _AT_LO or (vstat[q] == _FREE and d[q] < 0)) else -1.0

        alpha = basis_obj.ftran(basis_obj.column(q, state.art_sign))
        rate = direction * alpha  # basic values fall at this rate per unit step

        # Two-pass ratio test: a slack-relaxed first pass sets the step
        # window, then the most stable pivot (largest |alpha|) is chosen
        # among rows whose strict ratio fits the window. This trades a
        # bounded per-pivot overshoot (<= _RATIO_SLACK) for far better
        # conditioning of the eta updates.
        lob = state.lo[state.basis]
        upb = state.hi[state.basis]
        pos = rate > _PIVOT_TOL
        neg = rate < -_PIVOT_TOL
        t_arr = np.full(m, math.inf)
        t_arr[pos] = (state.xB[pos] - lob[pos]) / rate[pos]
        t_arr[neg] = (state.xB[neg] - upb[neg]) / rate[neg]
        t_arr = np.maximum(t_arr, 0.0)
        t_arr[np.isnan(t_arr)] = math.inf
        if ratio_slack > 0.0 and not bland:
            t_rel = np.full(m, math.inf)
            t_rel[pos] = (state.xB[pos] - lob[pos] + ratio_slack) / rate[pos]
            t_rel[neg] = (state.xB[neg] - upb[neg] - ratio_slack) / rate[neg]
            t_rel = np.maximum(t_rel, 0.0)
            t_rel[np.isnan(t_rel)] = math.inf
            t_lim = float(t_rel.min()) if m else math.inf
        else:
            t_lim = float(t_arr.min()) if m else math.inf

        t_bound = state.hi[q] - state.lo[q]
        if min(t_lim, t_bound) == math.inf:
            return "unbounded", iters

        if t_bound <= t_lim:
            # bound flip: q runs to its other bound, basis unchanged
            state.xB -= direction * t_bound * alpha
            state.values[q] = state.hi[q] if direction > 0 else state.lo[q]
            state.vstat[q] = _AT_UP if direction > 0 else _AT_LO
            step = t_bound
        else:
            window = np.flatnonzero(t_arr <= t_lim)
            if bland:
                r = int(window[np.argmin(state.basis[window])])
            else:
                r = int(window[np.argmax(np.abs(alpha[window]))])
            step = float(t_arr[r])
            leaving = int(state.basis[r])
            state.xB -= direction * step * alpha
            if vstat[q] == _AT_LO:
                enter_val = state.lo[q] + direction * step
            elif vstat[q] == _AT_UP:
                enter_val = state.hi[q] + direction * step
            else:
                enter_val = direction * step
            if rate[r] > 0:
                state.values[leaving] = state.lo[leaving]
                state.vstat[leaving] = _FIXED if state.lo[leaving] == state.hi[leaving] else _AT_LO
            else:
                state.values[leaving] = state.hi[leaving]
                state.vstat[leaving] = _FIXED if state.lo[leaving] == state.hi[leaving] else _AT_UP
            state.basis[r] = q
            state.xB[r] = enter_val
            state.vstat[q] = 0
            state.values[q] = 0.0
            c_b = c_all[state.basis]
            basis_obj.push_eta(r, alpha)

        if step <= 1e-12:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            bland = False
        iters += 1


def _collect(state: _State) -> np.ndarray:
    x = state.values.copy()
    x[state.basis] = state.xB
    return x


def _solve_box_only(c, lo, hi) -> LpSolution:
    """Degenerate case of an LP with no rows."""
    x = np.where(c > 0, lo, np.where(c < 0, hi, np.clip(0.0, lo, hi)))
    if not np.all(np.isfinite(x[c != 0])):
        return LpSolution("unbounded", None, -math.inf, 0)
    x = np.where(np.isfinite(x), x, np.clip(0.0, lo, hi))
    return LpSolution("optimal", x, float(c @ x), 0)


def solve_bounded_lp(std: StandardLp,
                     lower: Optional[np.ndarray] = None,
                     upper: Optional[np.ndarray] = None,
                     costs: Optional[np.ndarray] = None,
                     deadline: Optional[float] = None,
                     refactor_every: int = _REFACTOR_EVERY) -> LpSolution:
    """Two-phase bounded-variable primal simplex.

    ``lower``/``upper``/``costs`` override the defaults stored in
    ``std``, so branch-and-bound can fix binaries without rebuilding
    the matrix. Raises LpTimeout past ``deadline`` and SimplexError on
    numerical failure that survives refactorization retries.
    """
    n, m = std.n_cols, std.n_rows
    lo = np.asarray(std.lower if lower is None else lower, dtype=float)
    hi = np.asarray(std.upper if upper is None else upper, dtype=float)
    c = np.asarray(std.c if costs is None else costs, dtype=float)
    if np.any(lo > hi):
        return LpSolution("infeasible", None, math.inf, 0)
    if m == 0:
        return _solve_box_only(c, lo, hi)
    try:
        return _solve_once(std, lo, hi, c, deadline, refactor_every)
    except _DriftError:
        pass
    try:
        # the relaxed ratio test let bound violations accumulate into
        # the basis; redo the solve under the careful regime: exact
        # ratios and frequent refactorization, speed traded for a
        # drift-free walk
        return _solve_once(std, lo, hi, c, deadline, min(20, refactor_every),
                           careful=True)
    except _DriftError:
        # the careful walk still crossed a bad pivot sequence; nudge the
        # entering-variable choice onto a different path and try once
        # more before giving up
        return _solve_once(std, lo, hi, c, deadline, min(20, refactor_every),
                           careful=True, jitter_seed=1)


def _solve_once(std: StandardLp, lo: np.ndarray, hi: np.ndarray, c: np.ndarray,
                deadline: Optional[float], refactor_every: int,
                careful: bool = False,
                jitter_seed: Optional[int] = None) -> LpSolution:
    n, m = std.n_cols, std.n_rows
    state = _State(std, lo, hi)
    state.start_point()
    _initial_basis(state)
    basis_obj = _Basis(std)
    iter_budget = 20000 + 50 * (n + m)
    total_iters = 0
    slack = 0.0 if careful else _RATIO_SLACK
    jitter = None
    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        jitter = 1.0 + 1e-6 * rng.random(n + 2 * m)
    final = careful and jitter_seed is not None

    if state.n_artificial:
        c_phase1 = np.zeros(n + 2 * m)
        c_phase1[n + m:] = 1.0
        status, it = _pivot_loop(state, basis_obj, c_phase1, deadline,
                                 iter_budget, refactor_every, slack, jitter)
        total_iters += it
        if status == "unbounded":
            # phase 1 minimizes a sum of nonnegative artificials, so an
            # unbounded report can only be numerical corruption
            message = "phase-1 objective reported unbounded"
            if final:
                raise SimplexError(message)
            raise _DriftError(message)
        basis_obj.refactor(state.basis, state.art_sign)
        _recompute_xb(state, basis_obj)
        art_value = float(np.abs(_collect(state)[n + m:]).sum())
        if art_value > _ART_TOL:
            return LpSolution("infeasible", None, math.inf, total_iters)
        state.hi[n + m:] = 0.0
        for j in range(n + m, n + 2 * m):
            if state.vstat[j] != 0:
                state.vstat[j] = _FIXED
                state.values[j] = 0.0

    c_full = np.zeros(n + 2 * m)
    c_full[:n] = c
    status, it = _pivot_loop(state, basis_obj, c_full, deadline,
                             iter_budget, refactor_every, slack, jitter)
    total_iters += it
    if status == "unbounded":
        return LpSolution("unbounded", None, -math.inf, total_iters)

    # fresh factorization, then verify the final point before reporting.
    # After the exact recompute the reduced costs shift a little, so
    # re-entering the pivot loop can genuinely move a drifted point;
    # drift that survives the retries means the walk itself overshot,
    # and only a restart under the careful regime can help.
    x = None
    for attempt in range(3):
        basis_obj.refactor(state.basis, state.art_sign)
        _recompute_xb(state, basis_obj)
        x = _collect(state)
        drift = float(np.maximum(state.lo - x, x - state.hi).max())
        row_res = std.A @ x[:n] + x[n:n + m] + state.art_sign * x[n + m:] - std.rhs
        res = float(np.abs(row_res).max()) if m else 0.0
        if drift <= _BOUND_TOL and res <= _FEAS_TOL:
            break
        if attempt == 2:
            message = (f"solution drift persists after refactorization "
                       f"(bounds {drift:.3g}, rows {res:.3g})")
            if final:
                raise SimplexError(message)
            raise _DriftError(message)
        status, it = _pivot_loop(state, basis_obj, c_full, deadline,
                                 iter_budget, refactor_every, slack, jitter)
        total_iters += it
        if status == "unbounded":
            return LpSolution("unbounded", None, -math.inf, total_iters)
    np.clip(x, state.lo, state.hi, out=x)

    return LpSolution("optimal", x[:n], float(c @ x[:n]), total_iters)
