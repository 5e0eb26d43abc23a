import numpy as np
import pytest

from codec import recovery
from codec.coding import MeasurementMatrix, make_measurement_matrix, normalize_measurement, spectral_norm
from codec.recovery import (IHT_MAX_ITER, RecoveryProblem, hard_threshold, iht_solve,
                            matching_pursuit_warm_start, recover, recovery_rate_experiment)
from harness.checks import check_brute_force, check_iht_monotone, check_recovery_rate
from radio.channel import complex_gaussian


def _sparse_signal(rng, half_d, S):
    x = np.zeros(half_d, dtype=complex)
    x[rng.choice(half_d, S, replace=False)] = complex_gaussian(rng, S)
    return x


def test_problem_validation(rng):
    A = make_measurement_matrix(4, 8, rng)
    with pytest.raises(ValueError):
        RecoveryProblem(A=A, y=np.zeros(4), sparsity_budget=0)
    with pytest.raises(ValueError):
        RecoveryProblem(A=A, y=np.zeros(5), sparsity_budget=1)


def test_hard_threshold():
    x = np.array([1, -3, 2j, 3, 0.5])
    np.testing.assert_array_equal(hard_threshold(x, 2), [0, -3, 0, 3, 0])
    np.testing.assert_array_equal(hard_threshold(x, 9), x)


def test_mp_single_atom(rng):
    A = make_measurement_matrix(10, 30, rng)
    y = A.A[:, 7]
    x = matching_pursuit_warm_start(RecoveryProblem(A=A, y=y, sparsity_budget=1))
    np.testing.assert_array_equal(np.flatnonzero(x), [7])
    assert x[7] == pytest.approx(1.0)


def test_zero_measurement_gives_zero(rng):
    A = make_measurement_matrix(6, 12, rng)
    prob = RecoveryProblem(A=A, y=np.zeros(6), sparsity_budget=3)
    assert np.all(matching_pursuit_warm_start(prob) == 0)
    result = iht_solve(prob)
    assert np.all(result.x == 0)
    assert result.objective == 0


def test_mp_exact_on_orthonormal_dictionary(rng):
    A = make_measurement_matrix(32, 32, rng, kind="unitary")
    x_true = _sparse_signal(rng, 32, 2)
    x = matching_pursuit_warm_start(RecoveryProblem(A=A, y=A.A @ x_true, sparsity_budget=2))
    np.testing.assert_allclose(x, x_true, atol=1e-10)


def test_exact_solution_is_a_fixed_point(rng):
    A = make_measurement_matrix(40, 100, rng)
    x_true = _sparse_signal(rng, 100, 4)
    prob = RecoveryProblem(A=A, y=A.A @ x_true, sparsity_budget=4)
    result = iht_solve(prob, warm_start=x_true)
    assert result.iterations <= 1
    assert result.converged
    assert result.objective == pytest.approx(0.0, abs=1e-20)


def test_output_sparsity_and_history(rng):
    A = make_measurement_matrix(20, 80, rng)
    prob = RecoveryProblem(A=A, y=complex_gaussian(rng, 20), sparsity_budget=3)
    result = recover(prob)
    assert np.count_nonzero(result.x) <= 3
    assert result.objective >= 0
    assert len(result.history) == result.iterations + 1
    assert result.iterations <= IHT_MAX_ITER


def test_iteration_cap_reports_not_converged(rng):
    A = make_measurement_matrix(20, 80, rng)
    prob = RecoveryProblem(A=A, y=complex_gaussian(rng, 20), sparsity_budget=5)
    result = iht_solve(prob, max_iter=2, tol=0.0)
    assert result.iterations == 2
    assert not result.converged


def test_warm_start_never_hurts(rng):
    for _ in range(50):
        A = make_measurement_matrix(30, 120, rng)
        prob = RecoveryProblem(A=A, y=A.A @ _sparse_signal(rng, 120, 3), sparsity_budget=3)
        warm = iht_solve(prob, matching_pursuit_warm_start(prob)).objective
        cold = iht_solve(prob).objective
        assert warm <= cold + 1e-9


def test_recovery_is_deterministic(rng):
    A = make_measurement_matrix(20, 60, rng)
    prob = RecoveryProblem(A=A, y=complex_gaussian(rng, 20), sparsity_budget=4)
    a, b = recover(prob), recover(prob)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.history == b.history


def test_square_system_always_recovered():
    rate = recovery_rate_experiment(40, 40, 5, trials=20, rng=np.random.default_rng(0), kind="unitary")
    assert rate == 1.0


def test_underdetermined_negative_control():
    rate = recovery_rate_experiment(4, 200, 8, trials=20, rng=np.random.default_rng(0))
    assert rate <= 0.1


def test_iht_monotone():
    result = check_iht_monotone()
    assert result.passed, result.detail


def test_brute_force_optimum_small_instances():
    result = check_brute_force()
    assert result.passed, result.detail


def test_recovery_rate_quick():
    result = check_recovery_rate(trials=50, threshold=0.9)
    assert result.passed, result.detail


@pytest.mark.slow
def test_recovery_rate_full():
    result = check_recovery_rate()
    assert result.passed, result.detail


def test_problem_rejects_measured_norm_above_one(rng):
    A = 2 * make_measurement_matrix(6, 12, rng).A
    with pytest.raises(ValueError):
        RecoveryProblem(A=MeasurementMatrix(A=A, norm=spectral_norm(A)), y=np.zeros(6),
                        sparsity_budget=1)


def test_mp_pick_cap_ends_the_loop(monkeypatch):
    monkeypatch.setattr(recovery, "MP_RESIDUAL_FLOOR", 0.0)
    A = normalize_measurement(np.array([[1.0, np.sqrt(0.5), 0.0],
                                        [0.0, np.sqrt(0.5), 0.0]]))
    prob = RecoveryProblem(A=A, y=np.array([0.3 + 0.1j, 1.0]), sparsity_budget=3)
    x = matching_pursuit_warm_start(prob)
    assert x[2] == 0
    assert np.count_nonzero(x) == 2
    assert np.linalg.norm(A.A @ x - prob.y) < 1e-3 * np.linalg.norm(prob.y)
