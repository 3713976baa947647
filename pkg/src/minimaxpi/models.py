"""Concrete problem classes and their mappings into separated form.

Covers discounted and terminating finite-state Markov games, minimax
control with explicitly separated players, minimax control over one state
space (with optional finite stochastic disturbances), and the two-stage
scaling that splits one discount factor across the minimizer and
maximizer half-stages.

The reformulated Markov game keeps the maximizer's side implicit: its
tables are stored per game state as bundles of matrix columns and
evaluated lazily at any mixed strategy, with the minimizer's improvement
solved exactly by LP rather than by discretizing the simplex.
"""

from dataclasses import dataclass

import numpy as np

from .core import PolicyPair, SeparatedProblem, ValueTable, WeightedSpace
from .errors import InvalidBeta, MaxItersExceeded, NonContractive
from .matrix_game import min_simplex_max_linear, solve_matrix_game

_PROB_TOL = 1e-10


def _values(table):
    return table.values if hasattr(table, "values") else np.asarray(table, dtype=float)


# ---------------------------------------------------------------------------
# Markov games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscountedMarkovGame:
    """Repeated matrix games coupled by controlled Markov transitions.

    ``payoffs`` has shape (states, n, m); ``transitions[x, i, j, y]`` is the
    probability of moving to y when the players pick pure moves (i, j) at x.
    Terminating games may have substochastic rows (the missing mass is
    absorbed cost-free) but must still be certified contractive before use.
    """

    payoffs: np.ndarray
    transitions: np.ndarray
    alpha: float
    terminating: bool = False
    weights: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.payoffs, dtype=float)
        q = np.asarray(self.transitions, dtype=float)
        object.__setattr__(self, "payoffs", a)
        object.__setattr__(self, "transitions", q)
        if a.ndim != 3:
            raise ValueError("payoffs must have shape (states, n, m)")
        s, n, m = a.shape
        if q.shape != (s, n, m, s):
            raise ValueError("transitions must have shape (states, n, m, states)")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))):
            raise ValueError("entries must be finite")
        if np.min(q) < -_PROB_TOL:
            raise ValueError("transition probabilities must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        sums = q.sum(axis=3)
        if self.terminating:
            if np.max(sums) > 1.0 + _PROB_TOL:
                raise ValueError("terminating rows must sum to at most 1")
        elif np.max(np.abs(sums - 1.0)) > _PROB_TOL:
            raise ValueError("transition rows must sum to 1")
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def state_count(self):
        return self.payoffs.shape[0]

    @property
    def moves(self):
        return self.payoffs.shape[1], self.payoffs.shape[2]

    @property
    def space(self):
        if self.weights is None:
            return WeightedSpace.unit(self.state_count)
        return WeightedSpace(self.state_count, self.weights)

    def contraction_factor(self):
        """Exact sup-norm modulus bound of the fixed-policy stage operator."""
        xi = self.space.weights
        mass = (self.transitions * xi[None, None, None, :]).sum(axis=3)
        return self.alpha * float(np.max(mass / xi[:, None, None]))


def stage_matrix(game, x, j, scale=None):
    """The one-shot payoff matrix at x against a continuation table."""
    scale = game.alpha if scale is None else scale
    return game.payoffs[x] + scale * (game.transitions[x] @ _values(j))


def markov_H(game, x, u, v, j):
    """Expected stage payoff plus discounted continuation: u'(A(x) + a*sum Q J)v."""
    return float(np.asarray(u) @ stage_matrix(game, x, j) @ np.asarray(v))


def transition_probs(game, x, u, v):
    """Next-state distribution row under mixed strategies: (u'Q_xy v)_y."""
    return np.einsum("ijy,i,j->y", game.transitions[x], np.asarray(u), np.asarray(v))


@dataclass(frozen=True)
class ShapleyVIResult:
    values: np.ndarray
    iterations: int
    residuals: tuple


def shapley_value_iteration(game, tol=1e-8, max_iters=10**6):
    """Fixed-point iteration on the stage-game value operator.

    Each sweep replaces J(x) with the exact value of the matrix game formed
    by the current continuation, so the iterates contract at the game's
    modulus toward the equilibrium value vector.
    """
    xi = game.space.weights
    j = np.zeros(game.state_count)
    residuals = []
    for k in range(1, max_iters + 1):
        new = np.array([solve_matrix_game(stage_matrix(game, x, j)).value
                        for x in range(game.state_count)])
        res = float(np.max(np.abs(new - j) / xi))
        residuals.append(res)
        j = new
        if res <= tol:
            return ShapleyVIResult(j, k, tuple(residuals))
    raise MaxItersExceeded("stage-game value iteration did not reach tol")


def equilibrium_policies(game, j):
    """Per-state saddle strategies of the stage games at a value table."""
    sols = [solve_matrix_game(stage_matrix(game, x, j)) for x in range(game.state_count)]
    mu = np.array([s.u_star for s in sols])
    nu = np.array([s.v_star for s in sols])
    return mu, nu


# ---------------------------------------------------------------------------
# Two-stage scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaScaling:
    """Per-half-stage discount splitter; needs beta > 1 and alpha*beta < 1."""

    beta: float

    def __post_init__(self):
        if not self.beta > 1.0:
            raise InvalidBeta(f"beta must exceed 1, got {self.beta}")

    def check_against(self, alpha):
        if not alpha * self.beta < 1.0:
            raise InvalidBeta(f"alpha*beta = {alpha * self.beta:.6f} must be below 1")


def default_beta(alpha):
    """The symmetric choice: both half-stages contract at sqrt(alpha)."""
    return BetaScaling(1.0 / np.sqrt(alpha))


def _as_beta(beta, alpha):
    if beta is None:
        beta = default_beta(alpha)
    elif not isinstance(beta, BetaScaling):
        beta = BetaScaling(float(beta))
    beta.check_against(alpha)
    return beta


# ---------------------------------------------------------------------------
# Column-bundle tables: the implicit maximizer side of a reformulated game
# ---------------------------------------------------------------------------


def _sup_gap(cols_a, cols_b):
    """sup over the simplex of max_j(u'a_j) - max_k(u'b_k)."""
    best = -np.inf
    for j in range(cols_a.shape[1]):
        lines = [(0.0, cols_b[:, k] - cols_a[:, j]) for k in range(cols_b.shape[1])]
        val, _ = min_simplex_max_linear(lines)
        best = max(best, -val)
    return best


@dataclass(frozen=True)
class ColumnMaxTable:
    """Per-state bundles of matrix columns, read as max_j u'col_j at any u.

    This stores the maximizer-side tables of a reformulated Markov game as
    a finite set of numbers: one column after an evaluation step, the full
    matrix after an improvement step.
    """

    space: WeightedSpace
    cols: tuple

    def __post_init__(self):
        cols = tuple(np.asarray(c, dtype=float) for c in self.cols)
        object.__setattr__(self, "cols", cols)
        if len(cols) != self.space.size:
            raise ValueError("need one column bundle per state")
        if any(c.ndim != 2 or c.shape[1] == 0 or not np.all(np.isfinite(c)) for c in cols):
            raise ValueError("bundles must be finite 2-D arrays with at least one column")

    @classmethod
    def zeros(cls, space, n):
        return cls(space, tuple(np.zeros((n, 1)) for _ in range(space.size)))

    def value_at(self, x, u):
        return float(np.max(np.asarray(u) @ self.cols[x]))

    def pointwise_max(self, other):
        merged = tuple(np.hstack((a, b)) for a, b in zip(self.cols, other.cols))
        return ColumnMaxTable(self.space, merged)

    def with_updates(self, subset, entries):
        out = list(self.cols)
        for x, entry in zip(subset, entries):
            out[x] = entry
        return ColumnMaxTable(self.space, tuple(out))

    def gap_to(self, other):
        """Largest weighted one-sided excess of self over other (exact)."""
        worst = -np.inf
        for x, (a, b) in enumerate(zip(self.cols, other.cols)):
            worst = max(worst, _sup_gap(a, b) / self.space.weights[x])
        return worst

    def diff_norm(self, other):
        if self is other:
            return 0.0
        return max(self.gap_to(other), other.gap_to(self))

    def diff_bound(self, other):
        """Cheap certified upper bound on diff_norm; exact when bundles align."""
        if self is other:
            return 0.0
        if all(a.shape == b.shape for a, b in zip(self.cols, other.cols)):
            return max(
                float(np.max(np.abs(a - b))) / self.space.weights[x]
                for x, (a, b) in enumerate(zip(self.cols, other.cols))
            )
        return self.diff_norm(other)

    def norm(self):
        zero = ColumnMaxTable.zeros(self.space, self.cols[0].shape[0])
        return self.diff_norm(zero)

    def le(self, other, slack=1e-12):
        for x, (a, b) in enumerate(zip(self.cols, other.cols)):
            gap = _sup_gap(a, b)
            if gap > slack:
                return False, {"state": x, "excess": float(gap)}
        return True, None


# ---------------------------------------------------------------------------
# The reformulated Markov game as a separated problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovSeparatedProblem:
    """A discounted Markov game split into alternating half-stages.

    The minimizer's states are the game states; the maximizer's states are
    (state, mixed strategy) pairs kept implicit through
    :class:`ColumnMaxTable`.  The minimizer's policy is one mixed strategy
    per state, the maximizer's a column index per state.  The solved
    minimizer table recovers the game values after multiplying back the
    stage scaling.
    """

    game: DiscountedMarkovGame
    beta: BetaScaling

    def __post_init__(self):
        self.beta.check_against(self.game.alpha)
        modulus = max(1.0 / self.beta.beta,
                      self.beta.beta * self.game.contraction_factor())
        if modulus >= 1.0:
            raise NonContractive(
                f"scaled half-stages have modulus {modulus:.6f} >= 1"
            )
        object.__setattr__(self, "alpha", modulus)

    @property
    def space1(self):
        return self.game.space

    @property
    def space2(self):
        return self.game.space

    @property
    def n(self):
        return self.game.moves[0]

    @property
    def m(self):
        return self.game.moves[1]

    def zero1(self):
        return ValueTable.zeros(self.space1)

    def zero2(self):
        return ColumnMaxTable.zeros(self.space2, self.n)

    def first_policies(self):
        mu = np.zeros((self.game.state_count, self.n))
        mu[:, 0] = 1.0
        return PolicyPair(mu, np.zeros(self.game.state_count, dtype=int))

    def original_values(self, j1):
        """Game equilibrium values recovered from the minimizer's table."""
        return self.beta.beta * _values(j1)

    def _matrix(self, x, m1):
        return stage_matrix(self.game, x, m1, scale=self.game.alpha * self.beta.beta)

    # -- half-stage kernels ---------------------------------------------------

    def min_eval_values(self, subset, mu, m2):
        return np.array([m2.value_at(int(x), mu[x]) / self.beta.beta for x in subset])

    def min_improve(self, subset, m2):
        values = np.empty(len(subset))
        picks = np.empty((len(subset), self.n))
        for i, x in enumerate(subset):
            cols = m2.cols[int(x)]
            val, u = min_simplex_max_linear([(0.0, cols[:, k]) for k in range(cols.shape[1])])
            values[i] = val / self.beta.beta
            picks[i] = u
        return values, picks

    def max_eval_entries(self, subset, nu, m1):
        return [self._matrix(int(x), m1)[:, [nu[x]]] for x in subset]

    def max_improve(self, subset, m1, mu=None):
        entries = []
        picks = np.empty(len(subset), dtype=int)
        for i, x in enumerate(subset):
            mat = self._matrix(int(x), m1)
            entries.append(mat)
            weight = mu[x] if mu is not None else np.full(self.n, 1.0 / self.n)
            picks[i] = int(np.argmax(weight @ mat))
        return entries, picks

    def t1_policy(self, mu, j2):
        subset = np.arange(self.game.state_count)
        return ValueTable(self.space1, self.min_eval_values(subset, mu, j2))

    def t2_policy(self, nu, j1):
        subset = np.arange(self.game.state_count)
        return ColumnMaxTable(self.space2, tuple(self.max_eval_entries(subset, nu, j1)))

    def t1_greedy(self, j2):
        subset = np.arange(self.game.state_count)
        values, mu = self.min_improve(subset, j2)
        return ValueTable(self.space1, values), mu

    def joint_policy_fixed_point(self, policies):
        """Exact tables of a fixed policy pair via one dense linear solve.

        With both policies frozen the coupled half-stage equations collapse
        to a linear system in the minimizer's table.
        """
        s = self.game.state_count
        cols = np.arange(s), policies.nu
        costs = np.einsum("xi,xij->xj", policies.mu, self.game.payoffs)[cols]
        probs = np.einsum("xi,xijy->xjy", policies.mu, self.game.transitions)[cols]
        j1 = np.linalg.solve(np.eye(s) - self.game.alpha * probs,
                             costs / self.beta.beta)
        j1 = ValueTable(self.space1, j1)
        return j1, self.t2_policy(policies.nu, j1)

    def t2_greedy(self, j1, mu=None):
        subset = np.arange(self.game.state_count)
        entries, nu = self.max_improve(subset, j1, mu)
        return ColumnMaxTable(self.space2, tuple(entries)), nu

    def update_table2(self, table, subset, entries):
        return table.with_updates(subset, entries)

    # -- sampling hooks -------------------------------------------------------

    def random_table1(self, rng):
        return ValueTable(self.space1, rng.uniform(-1, 1, self.game.state_count)
                          * self.space1.weights)

    def random_table2(self, rng):
        cols = tuple(
            rng.uniform(-1, 1, (self.n, rng.integers(1, self.m + 1)))
            * self.space2.weights[x]
            for x in range(self.game.state_count)
        )
        return ColumnMaxTable(self.space2, cols)

    def random_policies(self, rng):
        mu = rng.dirichlet(np.ones(self.n), self.game.state_count)
        nu = rng.integers(self.m, size=self.game.state_count)
        return PolicyPair(mu, nu)

    def random_ordered_table2(self, rng):
        lo = self.random_table2(rng)
        shifts = rng.uniform(0, 1, self.game.state_count)
        hi = ColumnMaxTable(self.space2,
                            tuple(c + s for c, s in zip(lo.cols, shifts)))
        return lo, hi


def separate_markov_game(game, beta=None):
    """Split a discounted Markov game into contractive alternating half-stages."""
    return MarkovSeparatedProblem(game, _as_beta(beta, game.alpha))


# ---------------------------------------------------------------------------
# Minimax control with explicitly separated players
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparatedMinimaxModel:
    """Alternating-move control: the players own disjoint state spaces.

    ``next1[x1][u]`` is the maximizer state reached by the minimizer's move
    u with stage cost ``cost1[x1][u]``; ``next2``/``cost2`` mirror.
    """

    space1: WeightedSpace
    space2: WeightedSpace
    next1: tuple
    cost1: tuple
    next2: tuple
    cost2: tuple
    alpha: float

    def __post_init__(self):
        n1 = tuple(np.asarray(a, dtype=int) for a in self.next1)
        c1 = tuple(np.asarray(a, dtype=float) for a in self.cost1)
        n2 = tuple(np.asarray(a, dtype=int) for a in self.next2)
        c2 = tuple(np.asarray(a, dtype=float) for a in self.cost2)
        object.__setattr__(self, "next1", n1)
        object.__setattr__(self, "cost1", c1)
        object.__setattr__(self, "next2", n2)
        object.__setattr__(self, "cost2", c2)
        if len(n1) != self.space1.size or len(n2) != self.space2.size:
            raise ValueError("need one move list per state")
        for nxt, cst, bound in ((n1, c1, self.space2.size), (n2, c2, self.space1.size)):
            for a, c in zip(nxt, cst):
                if a.size == 0 or a.shape != c.shape:
                    raise ValueError("each state needs matching nonempty move/cost lists")
                if np.min(a) < 0 or np.max(a) >= bound:
                    raise ValueError("transition target out of range")
                if not np.all(np.isfinite(c)):
                    raise ValueError("costs must be finite")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("discount must lie in (0, 1)")


def separated_model_to_problem(model):
    """Wrap an alternating-move control model as a separated problem."""

    def eval1(x1, u, j2):
        return model.cost1[x1][u] + model.alpha * j2[model.next1[x1][u]]

    def eval2(x2, v, j1):
        return model.cost2[x2][v] + model.alpha * j1[model.next2[x2][v]]

    xi1, xi2 = model.space1.weights, model.space2.weights
    reach1 = max(
        float(np.max(xi2[nxt] / xi1[x])) for x, nxt in enumerate(model.next1)
    )
    reach2 = max(
        float(np.max(xi1[nxt] / xi2[x])) for x, nxt in enumerate(model.next2)
    )
    modulus = model.alpha * max(reach1, reach2)
    if modulus >= 1.0:
        raise NonContractive(f"weighted transitions give modulus {modulus:.6f} >= 1")
    return SeparatedProblem(
        space1=model.space1,
        space2=model.space2,
        actions1=tuple(tuple(range(a.size)) for a in model.next1),
        actions2=tuple(tuple(range(a.size)) for a in model.next2),
        eval1=eval1,
        eval2=eval2,
        alpha=modulus,
    )


# ---------------------------------------------------------------------------
# Minimax control over one state space (optionally with random disturbances)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimaxControlModel:
    """Discounted control against an antagonist choosing after the controller.

    ``outcomes[x][u][v]`` lists (probability, stage cost, next state)
    triples; a single triple with probability one is the deterministic
    case, several triples fold a finite stochastic disturbance into exact
    expectations.
    """

    space: WeightedSpace
    outcomes: tuple
    alpha: float

    def __post_init__(self):
        if len(self.outcomes) != self.space.size:
            raise ValueError("need outcome lists for every state")
        canon = []
        for x, per_u in enumerate(self.outcomes):
            if len(per_u) == 0:
                raise ValueError("every state needs at least one control")
            rows = []
            for per_v in per_u:
                if len(per_v) == 0:
                    raise ValueError("every (state, control) needs an adversary move")
                cells = []
                for triples in per_v:
                    arr = np.asarray(triples, dtype=float).reshape(-1, 3)
                    if abs(arr[:, 0].sum() - 1.0) > _PROB_TOL or np.min(arr[:, 0]) < -_PROB_TOL:
                        raise ValueError(f"outcome distribution at state {x} must sum to 1")
                    nxt = arr[:, 2].astype(int)
                    if np.min(nxt) < 0 or np.max(nxt) >= self.space.size:
                        raise ValueError("outcome target out of range")
                    if not np.all(np.isfinite(arr[:, 1])):
                        raise ValueError("costs must be finite")
                    cells.append(arr)
                rows.append(tuple(cells))
            canon.append(tuple(rows))
        object.__setattr__(self, "outcomes", tuple(canon))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("discount must lie in (0, 1)")

    @classmethod
    def deterministic(cls, space, next_state, cost, alpha):
        """Build from dense next/cost tables indexed [x][u][v]."""
        outcomes = tuple(
            tuple(
                tuple(
                    [[1.0, cost[x][u][v], next_state[x][u][v]]]
                    for v in range(len(next_state[x][u]))
                )
                for u in range(len(next_state[x]))
            )
            for x in range(len(next_state))
        )
        return cls(space, outcomes, alpha)


def control_state_pairs(model):
    """Deterministic enumeration of the adversary's (state, control) states."""
    return [(x, u) for x in range(model.space.size)
            for u in range(len(model.outcomes[x]))]


def minimax_control_to_problem(model, beta=None):
    """Split minimax control into half-stages over explicit (x, u) pair states."""
    beta = _as_beta(beta, model.alpha)
    pairs = control_state_pairs(model)
    index = {pair: k for k, pair in enumerate(pairs)}
    xi1 = model.space.weights
    xi2 = np.array([xi1[x] for x, _ in pairs])
    space2 = WeightedSpace(len(pairs), xi2)
    ab = model.alpha * beta.beta
    cells = tuple(
        tuple((arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].astype(int))
              for arr in model.outcomes[x][u])
        for x, u in pairs
    )

    def eval1(x1, u, j2):
        return j2[index[(x1, u)]] / beta.beta

    def eval2(x2, v, j1):
        p, g, nxt = cells[x2][v]
        return float(p @ (g + ab * j1[nxt]))

    reach = max(
        float((p @ xi1[nxt]) / xi2[k])
        for k, per_v in enumerate(cells)
        for p, _, nxt in per_v
    )
    modulus = max(1.0 / beta.beta, ab * reach)
    if modulus >= 1.0:
        raise NonContractive(f"weighted half-stages give modulus {modulus:.6f} >= 1")
    return SeparatedProblem(
        space1=model.space,
        space2=space2,
        actions1=tuple(tuple(range(len(per_u))) for per_u in model.outcomes),
        actions2=tuple(tuple(range(len(model.outcomes[x][u]))) for x, u in pairs),
        eval1=eval1,
        eval2=eval2,
        alpha=modulus,
    )


def markov_game_to_control(game):
    """Pure-strategy reduction of a Markov game to a minimax control model.

    Substochastic rows gain an absorbing cost-free terminal state so the
    stage operator is reproduced exactly for pure policy pairs.
    """
    s, (n, m) = game.state_count, game.moves
    deficit = 1.0 - game.transitions.sum(axis=3)
    terminal = bool(np.max(deficit) > _PROB_TOL)
    size = s + 1 if terminal else s
    xi = game.space.weights
    weights = np.append(xi, np.min(xi)) if terminal else xi
    outcomes = []
    for x in range(s):
        per_u = []
        for i in range(n):
            per_v = []
            for j in range(m):
                cost = game.payoffs[x, i, j]
                triples = [[p, cost, y] for y, p in enumerate(game.transitions[x, i, j])
                           if p > _PROB_TOL]
                if terminal and deficit[x, i, j] > _PROB_TOL:
                    triples.append([deficit[x, i, j], cost, s])
                per_v.append(triples)
            per_u.append(tuple(per_v))
        outcomes.append(tuple(per_u))
    if terminal:
        outcomes.append((([[1.0, 0.0, s]],),))
    return MinimaxControlModel(WeightedSpace(size, weights), tuple(outcomes), game.alpha)
