"""Finite weighted-sup-norm spaces, value tables, and alternating Bellman operators.

The library works with problems split into a minimizer half-stage and a
maximizer half-stage: an evaluator ``eval1(x1, u, J2)`` prices the
minimizer's states against the maximizer's table, and ``eval2(x2, v, J1)``
does the mirror.  Everything here is finite and index-addressed, and all
distances are weighted sup-norms, which is the norm in which the
contraction guarantees hold.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair, MaxItersExceeded

_ZERO_DISTANCE = 1e-13


@dataclass(frozen=True)
class WeightedSpace:
    """A finite state space with strictly positive norm weights."""

    size: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", w)
        if self.size < 1:
            raise ValueError("space must contain at least one state")
        if w.shape != (self.size,):
            raise ValueError("need one weight per state")
        if not np.all(w > 0):
            raise ValueError("norm weights must be strictly positive")

    @classmethod
    def unit(cls, size):
        return cls(size, np.ones(size))


@dataclass(frozen=True)
class ValueTable:
    """A real value per state, normed against its space's weights."""

    space: WeightedSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        if v.shape != (self.space.size,):
            raise ValueError("need one value per state")
        if not np.all(np.isfinite(v)):
            raise ValueError("table entries must be finite")

    @classmethod
    def zeros(cls, space):
        return cls(space, np.zeros(space.size))

    def norm(self):
        return float(np.max(np.abs(self.values) / self.space.weights))

    def diff_norm(self, other):
        return float(np.max(np.abs(self.values - other.values) / self.space.weights))

    # richer table types distinguish the exact norm from a cheap certified
    # upper bound used in stopping rules; for plain tables they coincide
    diff_bound = diff_norm

    def pointwise_min(self, other):
        return ValueTable(self.space, np.minimum(self.values, other.values))

    def pointwise_max(self, other):
        return ValueTable(self.space, np.maximum(self.values, other.values))

    def with_updates(self, subset, new_values):
        out = self.values.copy()
        out[subset] = new_values
        return ValueTable(self.space, out)

    def le(self, other, slack=1e-12):
        """Pointwise <= check; returns (ok, witness)."""
        gap = self.values - other.values
        if np.all(gap <= slack):
            return True, None
        x = int(np.argmax(gap))
        return False, {"state": x, "left": float(self.values[x]), "right": float(other.values[x])}


@dataclass(frozen=True)
class PolicyPair:
    """A minimizer policy and a maximizer policy.

    For explicit problems both entries index into the per-state action
    lists.  Backends with richer controls (mixed strategies) store their
    own representation in ``mu``.
    """

    mu: np.ndarray
    nu: np.ndarray


def update_policy(policy, subset, entries):
    """Functional update of a policy array on a state subset."""
    out = np.array(policy, copy=True)
    out[subset] = entries
    return out


def weighted_sup_norm(table):
    """max over states of |J(x)| / xi(x)."""
    return table.norm()


def product_norm(j1, j2):
    """Two-table variant: the larger of the two per-space norms."""
    return max(j1.norm(), j2.norm())


@dataclass(frozen=True)
class SeparatedProblem:
    """A two-player fixed-point problem over explicit finite spaces.

    ``eval1(x1, u, j2_values)`` and ``eval2(x2, v, j1_values)`` receive the
    opposite side's table as a plain array.  ``alpha`` is the asserted
    contraction modulus of the joint fixed-policy operator; it is not
    enforced at construction but can be certified with
    :func:`estimate_modulus`.
    """

    space1: WeightedSpace
    space2: WeightedSpace
    actions1: tuple
    actions2: tuple
    eval1: callable
    eval2: callable
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "actions1", tuple(tuple(a) for a in self.actions1))
        object.__setattr__(self, "actions2", tuple(tuple(a) for a in self.actions2))
        if len(self.actions1) != self.space1.size or len(self.actions2) != self.space2.size:
            raise ValueError("need one action list per state")
        if any(len(a) == 0 for a in self.actions1 + self.actions2):
            raise ValueError("action lists must be nonempty")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("asserted modulus must lie in [0, 1)")

    # -- table construction ------------------------------------------------

    def zero1(self):
        return ValueTable.zeros(self.space1)

    def zero2(self):
        return ValueTable.zeros(self.space2)

    def first_policies(self):
        return PolicyPair(
            mu=np.zeros(self.space1.size, dtype=int),
            nu=np.zeros(self.space2.size, dtype=int),
        )

    # -- half-stage operators ----------------------------------------------

    def min_eval_values(self, subset, mu, m2):
        vals = [self.eval1(int(x), self.actions1[x][mu[x]], m2.values) for x in subset]
        return np.asarray(vals, dtype=float)

    def min_improve(self, subset, m2):
        values = np.empty(len(subset))
        picks = np.empty(len(subset), dtype=int)
        for i, x in enumerate(subset):
            scores = [self.eval1(int(x), a, m2.values) for a in self.actions1[x]]
            picks[i] = int(np.argmin(scores))
            values[i] = scores[picks[i]]
        return values, picks

    def max_eval_entries(self, subset, nu, m1):
        vals = [self.eval2(int(x), self.actions2[x][nu[x]], m1.values) for x in subset]
        return np.asarray(vals, dtype=float)

    def max_improve(self, subset, m1, mu=None):
        values = np.empty(len(subset))
        picks = np.empty(len(subset), dtype=int)
        for i, x in enumerate(subset):
            scores = [self.eval2(int(x), a, m1.values) for a in self.actions2[x]]
            picks[i] = int(np.argmax(scores))
            values[i] = scores[picks[i]]
        return values, picks

    def t1_policy(self, mu, j2):
        subset = np.arange(self.space1.size)
        return ValueTable(self.space1, self.min_eval_values(subset, mu, j2))

    def t2_policy(self, nu, j1):
        subset = np.arange(self.space2.size)
        return ValueTable(self.space2, self.max_eval_entries(subset, nu, j1))

    def t1_greedy(self, j2):
        subset = np.arange(self.space1.size)
        values, mu = self.min_improve(subset, j2)
        return ValueTable(self.space1, values), mu

    def t2_greedy(self, j1, mu=None):
        subset = np.arange(self.space2.size)
        values, nu = self.max_improve(subset, j1, mu)
        return ValueTable(self.space2, values), nu

    def update_table2(self, table, subset, entries):
        return table.with_updates(subset, entries)

    # -- sampling hooks for the numerical certifiers -------------------------

    def random_table1(self, rng):
        return ValueTable(self.space1, rng.uniform(-1, 1, self.space1.size) * self.space1.weights)

    def random_table2(self, rng):
        return ValueTable(self.space2, rng.uniform(-1, 1, self.space2.size) * self.space2.weights)

    def random_policies(self, rng):
        mu = np.array([rng.integers(len(a)) for a in self.actions1])
        nu = np.array([rng.integers(len(a)) for a in self.actions2])
        return PolicyPair(mu, nu)

    def random_ordered_table2(self, rng):
        lo = self.random_table2(rng)
        hi = ValueTable(self.space2, lo.values + rng.uniform(0, 1, self.space2.size))
        return lo, hi


# -- free-function operation surface -----------------------------------------


def apply_T1_mu(problem, mu, j2):
    """Apply the minimizer's fixed-policy half-stage operator."""
    return problem.t1_policy(mu, j2)


def apply_T2_nu(problem, nu, j1):
    """Apply the maximizer's fixed-policy half-stage operator."""
    return problem.t2_policy(nu, j1)


def apply_T1(problem, j2):
    """Pointwise min over the minimizer's actions; returns (table, argmin policy)."""
    return problem.t1_greedy(j2)


def apply_T2(problem, j1):
    """Pointwise max over the maximizer's actions; returns (table, argmax policy)."""
    return problem.t2_greedy(j1)


@dataclass(frozen=True)
class VIResult:
    j1: object
    j2: object
    iterations: int
    residuals: tuple


def value_iterate(problem, j1_0=None, j2_0=None, tol=1e-8, max_iters=10**6):
    """Iterate (J1, J2) <- (T1 J2, T2 J1) until the product-norm change <= tol.

    Geometric convergence at the problem's modulus; raises
    :class:`MaxItersExceeded` when the budget runs out, which usually means
    the input is not contractive or the tolerance is too tight.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    j1 = problem.zero1() if j1_0 is None else j1_0
    j2 = problem.zero2() if j2_0 is None else j2_0
    residuals = []
    for k in range(1, max_iters + 1):
        n1, _ = problem.t1_greedy(j2)
        n2, _ = problem.t2_greedy(j1)
        res = max(j1.diff_bound(n1), j2.diff_bound(n2))
        residuals.append(res)
        j1, j2 = n1, n2
        if res <= tol:
            return VIResult(j1, j2, k, tuple(residuals))
    raise MaxItersExceeded(
        f"value iteration residual {residuals[-1]:.3e} > {tol:.3e} after {max_iters} sweeps"
    )


def bellman_residual(problem, j1, j2):
    """Product-norm distance between (J1, J2) and one greedy sweep of it."""
    n1, _ = problem.t1_greedy(j2)
    n2, _ = problem.t2_greedy(j1)
    return max(j1.diff_norm(n1), j2.diff_norm(n2))


def policy_pair_value(problem, policies, tol=1e-10, max_iters=10**6):
    """Evaluate a fixed policy pair by iterating its joint operator to tol."""
    j1, j2 = problem.zero1(), problem.zero2()
    for _ in range(max_iters):
        n1 = problem.t1_policy(policies.mu, j2)
        n2 = problem.t2_policy(policies.nu, j1)
        res = max(j1.diff_bound(n1), j2.diff_bound(n2))
        j1, j2 = n1, n2
        if res <= tol:
            return j1, j2
    raise MaxItersExceeded("policy-pair evaluation did not converge")


def estimate_modulus(problem, samples=100, seed=0):
    """Largest observed contraction ratio of the fixed-policy joint operator.

    Samples random table pairs and policy pairs and returns
    max ||T_{mu,nu} a - T_{mu,nu} b|| / ||a - b||.  For a valid model this
    never exceeds the asserted modulus (up to 1e-10 of float slack).
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    worst = 0.0
    usable = 0
    for _ in range(samples):
        a1, a2 = problem.random_table1(rng), problem.random_table2(rng)
        b1, b2 = problem.random_table1(rng), problem.random_table2(rng)
        dist = max(a1.diff_norm(b1), a2.diff_norm(b2))
        if dist <= _ZERO_DISTANCE:
            continue
        usable += 1
        pol = problem.random_policies(rng)
        ta1, ta2 = problem.t1_policy(pol.mu, a2), problem.t2_policy(pol.nu, a1)
        tb1, tb2 = problem.t1_policy(pol.mu, b2), problem.t2_policy(pol.nu, b1)
        moved = max(ta1.diff_norm(tb1), ta2.diff_norm(tb2))
        worst = max(worst, moved / dist)
    if usable == 0:
        raise DegeneratePair("all sampled table pairs coincided")
    return worst


@dataclass(frozen=True)
class CheckResult:
    """Boolean verdict plus the first counterexample found, if any."""

    ok: bool
    witness: dict | None = None

    def __bool__(self):
        return self.ok


def check_monotone(problem, samples=100, seed=0, slack=1e-9):
    """Sample ordered tables and verify both half-stage operators preserve order."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        pol = problem.random_policies(rng)
        lo2, hi2 = problem.random_ordered_table2(rng)
        out_lo = problem.t1_policy(pol.mu, lo2)
        out_hi = problem.t1_policy(pol.mu, hi2)
        ok, w = out_lo.le(out_hi, slack)
        if not ok:
            return CheckResult(False, {"side": 1, **w})
        lo1 = problem.random_table1(rng)
        hi1 = ValueTable(problem.space1, lo1.values + rng.uniform(0, 1, problem.space1.size))
        out_lo = problem.t2_policy(pol.nu, lo1)
        out_hi = problem.t2_policy(pol.nu, hi1)
        ok, w = out_lo.le(out_hi, slack)
        if not ok:
            return CheckResult(False, {"side": 2, **w})
    return CheckResult(True)
