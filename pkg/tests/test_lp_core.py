import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicqr import PinballProblem, PinballRow, Status, brute_force_oracle, check_loss, solve
from semicqr.exceptions import InvalidProblemError, OracleTooLargeError
from semicqr.lp_core import kkt_residual


def intercept_problem(y, tau=0.5, weight=None, penalty=None):
    return PinballProblem(np.ones((len(y), 1)), y, tau, weight, penalty)


def random_problem(rng, m=None, p=None, penalty=False):
    m = m or int(rng.integers(3, 26))
    p = p or int(rng.integers(1, 4))
    X = rng.standard_normal((m, p))
    X[:, 0] = 1.0
    y = X @ rng.standard_normal(p) + rng.standard_normal(m)
    tau = rng.choice([0.1, 0.25, 0.5, 0.75, 0.9], m)
    w = rng.choice([0.0, 0.5, 1.0, 2.0], m)
    w[0] = 1.0
    pen = rng.choice([0.0, 0.3, 2.0], p) if penalty else None
    return PinballProblem(X, y, tau, w, pen)


class TestExamples:
    def test_median(self):
        assert solve(intercept_problem([1, 2, 3])).coefficients[0] == pytest.approx(2.0)

    def test_weighted_median(self):
        s = solve(intercept_problem([1, 2, 3], weight=[1, 2, 1]))
        assert s.coefficients[0] == pytest.approx(2.0) and s.objective == pytest.approx(1.0)

    def test_flat_optimum(self):
        s = solve(intercept_problem([1, 2, 3, 4], tau=0.25))
        assert s.objective == pytest.approx(1.5)
        assert 1 - 1e-9 <= s.coefficients[0] <= 2 + 1e-9

    def test_penalty_dominates(self):
        s = solve(intercept_problem([1, 2, 3], penalty=[10.0]))
        assert s.coefficients[0] == 0.0

    def test_oracle_on_flat_example(self):
        assert brute_force_oracle(intercept_problem([1, 2, 3, 4], 0.25)).objective == \
            pytest.approx(1.5)

    def test_two_by_three(self):
        P = PinballProblem([[1, 0], [1, 1], [1, 2]], [0, 2, 1], 0.5)
        assert solve(P).objective == pytest.approx(brute_force_oracle(P).objective, abs=1e-6)


class TestValidation:
    def test_empty(self):
        with pytest.raises(InvalidProblemError):
            PinballProblem(np.zeros((0, 1)), [], 0.5)
        with pytest.raises(InvalidProblemError):
            PinballProblem.from_rows([])

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
    def test_bad_tau(self, tau):
        with pytest.raises(InvalidProblemError):
            intercept_problem([1, 2], tau)

    def test_all_zero_weights(self):
        with pytest.raises(InvalidProblemError):
            intercept_problem([1, 2], weight=[0, 0])

    def test_negative_weight(self):
        with pytest.raises(InvalidProblemError):
            intercept_problem([1, 2], weight=[1, -1])

    def test_from_rows(self):
        rows = [PinballRow([1.0], y, 0.5, 1.0) for y in (1, 2, 3)]
        assert solve(PinballProblem.from_rows(rows)).coefficients[0] == pytest.approx(2)

    def test_oracle_too_large(self):
        rng = np.random.default_rng(0)
        with pytest.raises(OracleTooLargeError):
            brute_force_oracle(random_problem(rng, m=200, p=3), max_subsets=1000)


def test_check_loss():
    assert check_loss(np.array([-2.0, 3.0]), 0.25).tolist() == [1.5, 0.75]


def test_max_iterations_status():
    # an unconverged interior point is still reported optimal when the vertex
    # pivots certify optimality; otherwise the status says MaxIterations
    rng = np.random.default_rng(3)
    for _ in range(20):
        P = random_problem(rng, m=25, p=3)
        s = solve(P, max_iter=1)
        assert np.all(np.isfinite(s.coefficients))
        if s.status != Status.MAX_ITERATIONS:
            assert s.objective == pytest.approx(brute_force_oracle(P).objective, rel=1e-9)
    X = np.column_stack([np.ones(400), rng.standard_normal(400)])
    s = solve(PinballProblem(X, X @ [1.0, 2.0] + rng.standard_normal(400), 0.5), max_iter=0)
    assert s.status in (Status.MAX_ITERATIONS, Status.OPTIMAL)


def test_polish_repairs_drifting_interior_point():
    # this stream contains an instance whose interior point drifted off the
    # dual equality by ~1e-4 before the polish step existed
    rng = np.random.default_rng(101)
    for _ in range(300):
        P = random_problem(rng, penalty=False)
        o = brute_force_oracle(P).objective
        assert solve(P).objective == pytest.approx(o, rel=1e-9, abs=1e-12)


def test_objective_matches_coefficients():
    rng = np.random.default_rng(4)
    for _ in range(20):
        P = random_problem(rng, penalty=True)
        s = solve(P)
        assert s.objective == pytest.approx(P.objective(s.coefficients), rel=1e-12)


def test_oracle_agreement_with_penalties():
    rng = np.random.default_rng(5)
    for _ in range(100):
        P = random_problem(rng, penalty=True)
        o = brute_force_oracle(P)
        assert abs(solve(P).objective - o.objective) <= 1e-6 * (1 + o.objective)


def test_kkt_residual_small():
    rng = np.random.default_rng(6)
    for _ in range(30):
        P = random_problem(rng, penalty=True)
        s = solve(P)
        assert kkt_residual(P, s.coefficients) <= 1e-6 * (1 + s.objective)


def test_penalty_zeros_are_exact():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 4))
    y = X[:, 0] * 2 + rng.standard_normal(60)
    s = solve(PinballProblem(X, y, 0.5, penalty=[0.0, 8.0, 8.0, 8.0]))
    assert np.all(s.coefficients[1:] == 0.0)


def test_larger_problem_kkt():
    rng = np.random.default_rng(8)
    X = np.column_stack([np.ones(2000), rng.standard_normal((2000, 10))])
    y = X @ rng.standard_normal(11) + rng.standard_t(3, 2000)
    P = PinballProblem(X, y, 0.3)
    s = solve(P)
    assert s.status in (Status.OPTIMAL, Status.DEGENERATE)
    assert kkt_residual(P, s.coefficients) <= 1e-6 * (1 + s.objective)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 20))
def test_scale_equivariance(seed, s):
    P = random_problem(np.random.default_rng(seed))
    a = solve(P)
    b = solve(PinballProblem(P.X, s * P.y, P.tau, P.weight))
    assert b.objective == pytest.approx(s * a.objective, rel=1e-8, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_location_equivariance(seed, c):
    P = random_problem(np.random.default_rng(seed))
    a = solve(P)
    b = solve(PinballProblem(P.X, P.y + c, P.tau, P.weight))
    assert b.objective == pytest.approx(a.objective, rel=1e-8, abs=1e-7)
    shifted = a.coefficients.copy()
    shifted[0] += c
    assert P.objective(a.coefficients) == pytest.approx(
        PinballProblem(P.X, P.y + c, P.tau, P.weight).objective(shifted), rel=1e-10, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_duplicate_row_equals_double_weight(seed):
    P = random_problem(np.random.default_rng(seed))
    dup = PinballProblem(np.vstack([P.X, P.X[:1]]), np.append(P.y, P.y[0]),
                         np.append(P.tau, P.tau[0]), np.append(P.weight, P.weight[0]))
    w2 = P.weight.copy()
    w2[0] *= 2
    dbl = PinballProblem(P.X, P.y, P.tau, w2)
    assert solve(dup).objective == pytest.approx(solve(dbl).objective, rel=1e-8, abs=1e-9)
