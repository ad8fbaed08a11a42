import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unprompt import ridge
from unprompt.errors import DegenerateEdit, DimensionMismatch, LeverageSingular
from unprompt.ridge import RidgeProblem, RowEdit


def demo():
    return ridge.default_demo_problem()


def test_demo_instance_closed_form():
    p, i = demo()
    # theta* = (1*1 + 2*3) / (1 + 4 + 0.1); without row 0: 6 / (4 + 0.1)
    np.testing.assert_allclose(ridge.ridge_fit(p), [7 / 5.1], rtol=1e-14)
    delta, theta = ridge.exact_unlearn(p, i)
    np.testing.assert_allclose(theta, [6 / 4.1], rtol=1e-13)
    np.testing.assert_allclose(delta, [6 / 4.1 - 7 / 5.1], rtol=1e-12)
    assert ridge.leverage(p, 0) == pytest.approx(1 / 5.1)


def test_replace_label_only_closed_form():
    p, i = demo()
    _, theta = ridge.surrogate_unlearn(p, RowEdit.replace(i, [1.0], 2.0))
    np.testing.assert_allclose(theta, [(2.0 + 6.0) / 5.1], rtol=1e-13)


def test_replace_feature_uses_corrected_right_hand_side():
    # x_i 1 -> 2, y_i 1 -> 0.5: X^T y becomes 2*0.5 + 2*3 = 7, A = 4 + 4 + 0.1
    p, i = demo()
    _, theta = ridge.surrogate_unlearn(p, RowEdit.replace(i, [2.0], 0.5))
    np.testing.assert_allclose(theta, [7.0 / 8.1], rtol=1e-13)


def random_problem(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 30)), int(rng.integers(1, 8))
    return RidgeProblem(rng.standard_normal((n, d)), rng.standard_normal(n), float(10 ** rng.uniform(-3, 1))), rng


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_exact_unlearn_equals_refit(seed):
    p, rng = random_problem(seed)
    i = int(rng.integers(p.n))
    _, theta = ridge.exact_unlearn(p, i)
    assert ridge.rel_err(theta, ridge.retrain_oracle(p, RowEdit.remove(i))) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_surrogate_unlearn_equals_refit(seed):
    p, rng = random_problem(seed)
    i = int(rng.integers(p.n))
    e = RowEdit.replace(i, rng.standard_normal(p.d), float(rng.standard_normal()))
    _, theta = ridge.surrogate_unlearn(p, e)
    assert ridge.rel_err(theta, ridge.retrain_oracle(p, e)) <= 1e-9


def test_preservation_ratio_matches_shift_norms():
    p, i = demo()
    for y_new in (-2.0, 0.5, 3.0):
        rows = ridge.ridge_demo_sweep(p, i, [y_new])
        assert ridge.preservation_ratio(p, i, y_new) == pytest.approx(rows[0]["ratio"], rel=1e-10)


def test_demo_sweep_finds_preserving_surrogate():
    p, i = demo()
    rows = ridge.ridge_demo_sweep(p, i, np.linspace(-5, 5, 201))
    hit = ridge.find_preserving_surrogate(rows)
    assert hit is not None and hit["surrogate_shift"] < 0.5 * hit["exact_shift"]


def test_errors():
    p, _ = demo()
    with pytest.raises(DegenerateEdit):
        ridge.preservation_ratio(p, 0, 1.0)
    with pytest.raises(ValueError):
        ridge.surrogate_unlearn(p, RowEdit.remove(0))
    with pytest.raises(DimensionMismatch):
        ridge.surrogate_unlearn(p, RowEdit.replace(0, [1.0, 2.0], 0.0))
    with pytest.raises(IndexError):
        ridge.exact_unlearn(p, 5)
    with pytest.raises(DimensionMismatch):
        RidgeProblem(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        RidgeProblem(np.ones((3, 2)), np.ones(3), penalty=0.0)
    single = RidgeProblem(np.array([[1.0]]), np.array([1.0]), penalty=0.1)
    with pytest.raises(ValueError):
        ridge.exact_unlearn(single, 0)


def test_zero_penalty_leverage_one_is_singular():
    with pytest.warns(RuntimeWarning):
        p = RidgeProblem(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]]), np.ones(3), 0.0, allow_zero_penalty=True)
    with pytest.raises(LeverageSingular):
        ridge.exact_unlearn(p, 0)


def test_ridge_fit_small_cases():
    p = RidgeProblem(np.array([[1.0]]), np.array([2.0]), penalty=1e-12)
    assert ridge.ridge_fit(p)[0] == pytest.approx(2.0, rel=1e-9)
    z = RidgeProblem(np.ones((3, 2)), np.zeros(3), 0.5)
    np.testing.assert_array_equal(ridge.ridge_fit(z), [0.0, 0.0])


def test_ridge_fit_against_gradient_descent():
    rng = np.random.default_rng(20)
    X, y = rng.standard_normal((20, 5)), rng.standard_normal(20)
    p = RidgeProblem(X, y, 0.5)
    theta = np.zeros(5)
    for _ in range(100_000):
        theta -= 1e-3 * (X.T @ (X @ theta - y) + 0.5 * theta)
    np.testing.assert_allclose(ridge.ridge_fit(p), theta, atol=1e-6)


def test_perfectly_fit_row_has_zero_removal_delta():
    rng = np.random.default_rng(5)
    X, y = rng.standard_normal((6, 2)), rng.standard_normal(6)
    H = X @ np.linalg.solve(X.T @ X + 0.3 * np.eye(2), X.T)
    # choose y_2 so that the fit passes through row 2: y_2 = H[2] . y
    others = np.delete(np.arange(6), 2)
    y[2] = H[2, others] @ y[others] / (1 - H[2, 2])
    p = RidgeProblem(X, y, 0.3)
    assert p.X[2] @ ridge.ridge_fit(p) == pytest.approx(p.y[2], abs=1e-12)
    delta, _ = ridge.exact_unlearn(p, 2)
    np.testing.assert_allclose(delta, 0.0, atol=1e-12)


def test_two_row_removal_equals_one_row_fit():
    p, i = ridge.default_demo_problem()
    _, theta = ridge.exact_unlearn(p, i)
    one = RidgeProblem(p.X[1:], p.y[1:], p.penalty)
    np.testing.assert_allclose(theta, ridge.ridge_fit(one), rtol=1e-13)
    np.testing.assert_allclose(ridge.retrain_oracle(p, RowEdit.remove(i)), ridge.ridge_fit(one), rtol=1e-13)


def test_no_op_and_label_only_edits():
    rng = np.random.default_rng(9)
    p = RidgeProblem(rng.standard_normal((30, 6)), rng.standard_normal(30), 1.0)
    delta, theta = ridge.surrogate_unlearn(p, RowEdit.replace(4, p.X[4], p.y[4]))
    np.testing.assert_allclose(delta, 0.0, atol=1e-12)
    np.testing.assert_allclose(ridge.retrain_oracle(p, RowEdit.replace(4, p.X[4], p.y[4])), ridge.ridge_fit(p), rtol=1e-12)
    A = p.X.T @ p.X + np.eye(6)
    delta, _ = ridge.surrogate_unlearn(p, RowEdit.replace(4, p.X[4], p.y[4] + 2.5))
    np.testing.assert_allclose(delta, np.linalg.solve(A, p.X[4] * 2.5), rtol=1e-10)


def test_every_row_of_a_random_instance():
    rng = np.random.default_rng(30)
    p = RidgeProblem(rng.standard_normal((30, 6)), rng.standard_normal(30), 1.0)
    for i in range(30):
        _, theta = ridge.exact_unlearn(p, i)
        assert ridge.rel_err(theta, ridge.retrain_oracle(p, RowEdit.remove(i))) <= 1e-9


def test_preservation_ratio_forced_value_and_direct_norms():
    p, i = demo()
    theta = ridge.ridge_fit(p)
    lev = ridge.leverage(p, i)
    gap = abs(p.X[i] @ theta - p.y[i]) / abs(1 - lev)
    assert ridge.preservation_ratio(p, i, p.y[i] + gap) == pytest.approx(1.0, rel=1e-12)
    y_new = p.y[i] + 0.1
    d_exact, _ = ridge.exact_unlearn(p, i)
    d_sur, _ = ridge.surrogate_unlearn(p, RowEdit.replace(i, p.X[i], y_new))
    r = ridge.preservation_ratio(p, i, y_new)
    assert r > 1 and r == pytest.approx(np.linalg.norm(d_exact) / np.linalg.norm(d_sur), rel=1e-12)


def test_preservation_ratio_equals_norm_ratio_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p, _ = random_problem(int(rng.integers(10**6)))
        i = int(rng.integers(p.n))
        if not np.any(p.X[i]):
            continue
        y_new = p.y[i] + float(rng.uniform(0.1, 2.0)) * rng.choice([-1, 1])
        d_exact, _ = ridge.exact_unlearn(p, i)
        d_sur, _ = ridge.surrogate_unlearn(p, RowEdit.replace(i, p.X[i], y_new))
        expect = np.linalg.norm(d_exact) / np.linalg.norm(d_sur)
        assert abs(ridge.preservation_ratio(p, i, y_new) - expect) <= 1e-9 * max(1.0, expect)
