"""Exact matrix-game solving via a self-contained dense two-phase simplex.

Also exposes the slightly more general primitive behind it: minimizing a
pointwise max of affine functions over the probability simplex, which is
the minimizer's policy-improvement subproblem when strategies are mixed.
No external LP dependency; Bland's rule keeps pivoting deterministic and
cycle-free.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import LPNumericalFailure

_EPS = 1e-11
_ENTER_TOL = 1e-9


@dataclass(frozen=True)
class SaddleSolution:
    """Game value with optimal mixed strategies for both players."""

    value: float
    u_star: np.ndarray
    v_star: np.ndarray


def clean_strategy(p, tol=1e-9):
    """Clamp tiny negatives to zero and renormalize to a probability vector."""
    p = np.asarray(p, dtype=float)
    if np.min(p) < -1e-6 or abs(p.sum() - 1.0) > 1e-6:
        raise LPNumericalFailure(f"strategy far from the simplex: {p}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col


def _run_simplex(tableau, basis, ncols, max_pivots):
    for _ in range(max_pivots):
        reduced = tableau[-1, :ncols]
        entering = np.nonzero(reduced < -_ENTER_TOL)[0]
        progressed = False
        for col in entering:  # Bland: lowest eligible index first
            column = tableau[:-1, int(col)]
            rows = np.nonzero(column > _EPS)[0]
            if rows.size == 0:
                # tiny pivots can amplify float noise into spurious negative
                # reduced costs; only a clearly negative one means unbounded
                if reduced[col] < -1e-6:
                    raise LPNumericalFailure("LP is unbounded; malformed input")
                continue
            ratios = tableau[rows, -1] / tableau[rows, int(col)]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-10]
            row = int(min(ties, key=lambda r: basis[r]))
            _pivot(tableau, basis, row, int(col))
            progressed = True
            break
        if not progressed:
            return
    raise LPNumericalFailure("pivot budget exhausted; simplex failed to terminate")


def simplex_solve(c, A, b):
    """Solve min c'x s.t. Ax = b, x >= 0 with a dense two-phase simplex.

    Returns (x, objective).  Raises :class:`LPNumericalFailure` on
    infeasible or unbounded inputs, which for this library's internally
    generated LPs signals ill-conditioned payoffs.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    max_pivots = 1000 + 50 * (m + n)
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    basis = list(range(n, n + m))
    # phase-1 reduced costs for the all-artificial basis
    tableau[m, n : n + m] = 1.0
    tableau[m] -= tableau[:m].sum(axis=0)
    _run_simplex(tableau, basis, n + m, max_pivots)
    if -tableau[m, -1] > 1e-8:
        raise LPNumericalFailure("LP is infeasible; malformed input")

    # drive leftover artificials out of the basis (or drop redundant rows)
    keep = []
    for r in range(m):
        if basis[r] >= n:
            pivots = np.nonzero(np.abs(tableau[r, :n]) > _EPS)[0]
            if pivots.size == 0:
                continue  # redundant constraint
            _pivot(tableau, basis, r, int(pivots[0]))
        keep.append(r)
    rows = keep + [m]
    tableau = tableau[rows][:, list(range(n)) + [n + m]]
    basis = [basis[r] for r in keep]

    tableau[-1, :] = 0.0
    tableau[-1, :n] = c
    for r, var in enumerate(basis):
        coef = tableau[-1, var]
        if abs(coef) > _EPS:
            tableau[-1] -= coef * tableau[r]
    _run_simplex(tableau, basis, n, max_pivots)

    x = np.zeros(n)
    for r, var in enumerate(basis):
        x[var] = tableau[r, -1]
    return x, float(-tableau[-1, -1])


def _enumerate_min_max(offsets, coeffs):
    """Exact vertex enumeration for tiny instances of the epigraph problem.

    Every optimum sits at a vertex where some strategy coordinates vanish
    and the remaining degrees of freedom are pinned by active lines; with
    at most a handful of variables, checking all such systems is cheap and
    immune to pivoting noise.
    """
    n_lines, n = coeffs.shape
    best_w, best_u = np.inf, None
    for z_size in range(n):
        free_count = n - z_size
        if free_count > n_lines:
            continue
        for zeros in itertools.combinations(range(n), z_size):
            free = [i for i in range(n) if i not in zeros]
            for act in itertools.combinations(range(n_lines), free_count):
                size = free_count + 1
                M = np.zeros((size, size))
                rhs = np.zeros(size)
                for r, a in enumerate(act):
                    M[r, :free_count] = coeffs[a, free]
                    M[r, -1] = -1.0
                    rhs[r] = -offsets[a]
                M[-1, :free_count] = 1.0
                rhs[-1] = 1.0
                try:
                    sol = np.linalg.solve(M, rhs)
                except np.linalg.LinAlgError:
                    continue
                u = np.zeros(n)
                u[free] = sol[:free_count]
                w = sol[-1]
                if np.min(u) < -1e-9:
                    continue
                if np.max(offsets + coeffs @ u) > w + 1e-9:
                    continue
                if w < best_w - 1e-12:
                    best_w, best_u = w, u
    if best_u is None:
        raise LPNumericalFailure("vertex enumeration found no feasible point")
    return float(best_w), clean_strategy(best_u)


def min_simplex_max_linear(lines):
    """Minimize max_l (offset_l + u'coeffs_l) over the probability simplex.

    ``lines`` is a nonempty list of (offset, coeffs) with all coefficient
    arrays of one length.  Returns (value, u_star).
    """
    offsets = np.array([off for off, _ in lines], dtype=float)
    coeffs = np.array([np.asarray(cf, dtype=float) for _, cf in lines])
    if coeffs.ndim != 2 or coeffs.shape[0] == 0 or coeffs.shape[1] == 0:
        raise ValueError("need a nonempty list of equal-length lines")
    n_lines, n = coeffs.shape
    if n == 1:
        return float(np.max(offsets + coeffs[:, 0])), np.ones(1)
    if n_lines == 1:
        j = int(np.argmin(coeffs[0]))
        u = np.zeros(n)
        u[j] = 1.0
        return float(offsets[0] + coeffs[0, j]), u

    # epigraph LP with the level variable shifted to be nonnegative: every
    # feasible level is at least the largest per-line minimum, so w = z - lo
    # has w >= 0.  Columns are [u, w, slacks]; rows are the lines
    # (u'c_l - w + s_l = lo - offset_l) plus the simplex constraint.
    lo = float(np.max(offsets + coeffs.min(axis=1)))
    ncols = n + 1 + n_lines
    A = np.zeros((n_lines + 1, ncols))
    b = np.zeros(n_lines + 1)
    A[:n_lines, :n] = coeffs
    A[:n_lines, n] = -1.0
    A[:n_lines, n + 1 :] = np.eye(n_lines)
    b[:n_lines] = lo - offsets
    A[n_lines, :n] = 1.0
    b[n_lines] = 1.0
    c = np.zeros(ncols)
    c[n] = 1.0
    try:
        x, obj = simplex_solve(c, A, b)
        u = clean_strategy(x[:n])
        value = obj + lo
        attained = float(np.max(offsets + coeffs @ u))
        if abs(attained - value) > 1e-7 * max(1.0, abs(value)):
            raise LPNumericalFailure("simplex solution failed its certificate")
        # report the value the cleaned strategy actually attains, so the
        # returned pair is always self-consistent
        return attained, u
    except LPNumericalFailure:
        # ill-scaled bundles can defeat the pivoting tolerances; fall back
        # to exact vertex enumeration, which these tiny sizes afford
        return _enumerate_min_max(offsets, coeffs)


def _pure_saddle(M):
    row_max = M.max(axis=1)
    col_min = M.min(axis=0)
    minmax = row_max.min()
    maxmin = col_min.max()
    if minmax != maxmin:
        return None
    i = int(np.argmin(row_max))
    j = int(np.argmax(col_min))
    return float(M[i, j]), i, j


def solve_matrix_game(M, tol=1e-8):
    """Solve min_u max_v u'Mv over mixed strategies; u indexes rows.

    Detects pure saddles directly (lowest-index arg ties); otherwise solves
    both players' epigraph LPs and cross-checks the duality gap.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("payoff matrix must be 2-D and nonempty")
    if not np.all(np.isfinite(M)):
        raise ValueError("payoff entries must be finite")
    n, m = M.shape

    pure = _pure_saddle(M)
    if pure is not None:
        value, i, j = pure
        u = np.zeros(n)
        u[i] = 1.0
        v = np.zeros(m)
        v[j] = 1.0
        return SaddleSolution(value, u, v)

    value_min, u = min_simplex_max_linear([(0.0, M[:, j]) for j in range(m)])
    neg_value_max, v = min_simplex_max_linear([(0.0, -M[i, :]) for i in range(n)])
    value_max = -neg_value_max
    if abs(value_min - value_max) > max(tol, 1e-8):
        raise LPNumericalFailure(
            f"duality gap {abs(value_min - value_max):.3e} exceeds tolerance"
        )
    return SaddleSolution(value_min, u, v)


def best_response_value(M, u):
    """The maximizer's best pure response to a mixed row strategy.

    Returns (value, column index), lowest index on ties.
    """
    scores = np.asarray(u, dtype=float) @ np.asarray(M, dtype=float)
    j = int(np.argmax(scores))
    return float(scores[j]), j
