import itertools

import numpy as np
import pytest

from minimaxpi.matrix_game import (_enumerate_min_max, best_response_value,
                                   clean_strategy, min_simplex_max_linear,
                                   solve_matrix_game)


def saddle_certificates(M, sol, tol):
    M = np.asarray(M, dtype=float)
    assert float(np.max(sol.u_star @ M)) <= sol.value + tol
    assert float(np.min(M @ sol.v_star)) >= sol.value - tol
    assert abs(sol.u_star.sum() - 1.0) <= 1e-9
    assert abs(sol.v_star.sum() - 1.0) <= 1e-9
    assert np.min(sol.u_star) >= 0.0 and np.min(sol.v_star) >= 0.0


class TestSolveMatrixGame:
    def test_matching_pennies(self):
        sol = solve_matrix_game([[1, -1], [-1, 1]])
        assert sol.value == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(sol.u_star, [0.5, 0.5], atol=1e-9)
        assert np.allclose(sol.v_star, [0.5, 0.5], atol=1e-9)

    def test_single_entry(self):
        sol = solve_matrix_game([[2.5]])
        assert sol.value == 2.5
        assert np.allclose(sol.u_star, [1.0]) and np.allclose(sol.v_star, [1.0])

    def test_pure_saddle_by_support_enumeration(self):
        M = np.array([[1.0, 2.0], [3.0, 4.0]])
        # oracle: scan all pure pairs for the saddle condition
        saddles = [(i, j) for i, j in itertools.product(range(2), range(2))
                   if M[i, j] == M[i, :].max() and M[i, j] == M[:, j].min()]
        assert saddles == [(0, 1)]
        sol = solve_matrix_game(M)
        assert sol.value == 2.0
        assert np.allclose(sol.u_star, [1.0, 0.0])
        assert np.allclose(sol.v_star, [0.0, 1.0])

    def test_duality_on_random_games(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            M = rng.uniform(-5, 5, (n, m))
            sol = solve_matrix_game(M)
            # value of the maximizer's own program must agree
            maxmin = max(float(np.min(M @ v)) for v in np.eye(m)) if m == 1 \
                else None
            saddle_certificates(M, sol, 1e-8)
            best_reply = float(np.max(sol.u_star @ M))
            held = float(np.min(M @ sol.v_star))
            assert abs(best_reply - held) <= 1e-8

    def test_shift_and_scale_covariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            M = rng.uniform(-3, 3, (3, 3))
            base = solve_matrix_game(M)
            shifted = solve_matrix_game(M + 2.5)
            assert shifted.value == pytest.approx(base.value + 2.5, abs=1e-8)
            assert np.allclose(shifted.u_star, base.u_star, atol=1e-7)
            assert np.allclose(shifted.v_star, base.v_star, atol=1e-7)
            scaled = solve_matrix_game(3.0 * M)
            assert scaled.value == pytest.approx(3.0 * base.value, abs=1e-8)
            assert np.allclose(scaled.u_star, base.u_star, atol=1e-7)
            assert np.allclose(scaled.v_star, base.v_star, atol=1e-7)


class TestMinSimplexMaxLinear:
    def test_single_line_hits_vertex(self):
        value, u = min_simplex_max_linear([(0.0, np.array([3.0, 1.0]))])
        assert value == 1.0
        assert np.allclose(u, [0.0, 1.0])

    def test_matching_pennies_columns(self):
        value, u = min_simplex_max_linear(
            [(0.0, np.array([1.0, -1.0])), (0.0, np.array([-1.0, 1.0]))])
        assert value == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(u, [0.5, 0.5], atol=1e-9)

    def test_grid_search_oracle(self):
        rng = np.random.default_rng(2)
        lines = [(float(rng.uniform(-1, 1)), rng.uniform(-2, 2, 3)) for _ in range(3)]
        value, u = min_simplex_max_linear(lines)
        step = 1e-3
        best = np.inf
        for a in np.arange(0.0, 1.0 + step / 2, step):
            for b in np.arange(0.0, 1.0 - a + step / 2, step):
                point = np.array([a, b, 1.0 - a - b])
                best = min(best, max(off + point @ cf for off, cf in lines))
        assert abs(value - best) <= 1e-3

    def test_reproduces_game_value_from_columns(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            M = rng.uniform(-2, 2, (3, 4))
            sol = solve_matrix_game(M)
            value, _ = min_simplex_max_linear([(0.0, M[:, j]) for j in range(4)])
            assert abs(value - sol.value) <= 1e-9

    def test_enumeration_fallback_agrees_with_simplex(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n_lines, n = int(rng.integers(2, 6)), int(rng.integers(2, 5))
            offsets = rng.uniform(-2, 2, n_lines)
            coeffs = rng.uniform(-3, 3, (n_lines, n))
            v1, _ = min_simplex_max_linear(list(zip(offsets, coeffs)))
            v2, _ = _enumerate_min_max(offsets, coeffs)
            assert abs(v1 - v2) <= 1e-9

    def test_ill_scaled_near_duplicate_lines(self):
        # regression: near-identical tiny coefficients force a microscopic
        # pivot whose noise amplification defeated the plain simplex
        lines = [
            (0.0, np.array([5.0980627432384318e-01, -1.9606723173939699e-01])),
            (0.0, np.array([6.9772438424653416e-06, 6.9772438422432970e-06])),
            (0.0, np.array([8.8319863487987393e-01, -1.1812812717044197e-01])),
        ]
        value, u = min_simplex_max_linear(lines)
        offsets = np.array([off for off, _ in lines])
        coeffs = np.array([cf for _, cf in lines])
        expect, _ = _enumerate_min_max(offsets, coeffs)
        assert abs(value - expect) <= 1e-9
        assert abs(u.sum() - 1.0) <= 1e-9 and np.min(u) >= 0.0

    def test_repeated_and_constant_lines(self):
        lines = [(0.5, np.array([0.0, 0.0])),
                 (0.5, np.array([0.0, 0.0])),
                 (-1.0, np.array([1.0, 1.0]))]
        value, u = min_simplex_max_linear(lines)
        assert value == pytest.approx(0.5, abs=1e-12)
        assert abs(u.sum() - 1.0) <= 1e-9


class TestCleanStrategy:
    def test_tiny_negatives_clamped_and_renormalized(self):
        p = clean_strategy(np.array([-1e-12, 0.4, 0.6]))
        assert np.min(p) == 0.0
        assert p.sum() == pytest.approx(1.0, abs=1e-15)

    def test_far_from_simplex_rejected(self):
        from minimaxpi.errors import LPNumericalFailure
        with pytest.raises(LPNumericalFailure):
            clean_strategy(np.array([0.5, 0.2]))


class TestBestResponse:
    def test_row_readout(self):
        value, j = best_response_value([[1.0, 2.0], [3.0, 4.0]], [1.0, 0.0])
        assert (value, j) == (2.0, 1)

    def test_tie_breaks_to_first_column(self):
        value, j = best_response_value([[5.0, 5.0], [1.0, 1.0]], [0.3, 0.7])
        assert j == 0

    def test_loop_oracle(self):
        rng = np.random.default_rng(5)
        M = rng.uniform(-4, 4, (4, 5))
        u = clean_strategy(rng.dirichlet(np.ones(4)))
        value, j = best_response_value(M, u)
        scores = [sum(u[i] * M[i, col] for i in range(4)) for col in range(5)]
        assert value == pytest.approx(max(scores), abs=1e-12)
        assert j == int(np.argmax(scores))
