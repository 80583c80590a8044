import numpy as np
import pytest
from scipy import linalg

from oracles import lyapunov_kron, random_psd, random_stable
from sparsid.models import NoiseSpec, SystemModel, UnstableSystemError, make_rng
from sparsid.powergrid import default_noise, generate_instance
from sparsid.stationary import (
    build_joint_covariance,
    estimate_stability_constants,
    lyapunov_residual,
    noise_rhs,
    solve_discrete_lyapunov,
    stationary_stats,
)


def test_zero_dynamics():
    np.testing.assert_array_equal(solve_discrete_lyapunov(np.zeros((3, 3)), np.eye(3)), np.eye(3))


def test_scalar():
    assert solve_discrete_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, abs=1e-15)


@pytest.mark.parametrize("method", ["kron", "doubling"])
def test_random_against_kron_oracle(method):
    rng = np.random.default_rng(11)
    A = random_stable(5, 0.8, rng)
    R = random_psd(5, rng)
    Q = solve_discrete_lyapunov(A, R, method=method)
    assert np.max(np.abs(Q - lyapunov_kron(A, R))) <= 1e-9
    np.testing.assert_array_equal(Q, Q.T)


def test_doubling_matches_scipy_for_larger_n():
    rng = np.random.default_rng(2)
    A = random_stable(80, 0.9, rng)
    R = random_psd(80, rng)
    Q = solve_discrete_lyapunov(A, R)  # auto picks doubling above n = 64
    ref = linalg.solve_discrete_lyapunov(A, R)
    assert np.max(np.abs(Q - ref)) <= 1e-8 * np.max(np.abs(ref))
    assert lyapunov_residual(A, Q, R) <= 1e-10


def test_rejects_marginal():
    with pytest.raises(UnstableSystemError):
        solve_discrete_lyapunov(np.eye(2) * (1 - 1e-10), np.eye(2))
    with pytest.raises(ValueError):
        solve_discrete_lyapunov(np.zeros((2, 2)), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_joint_covariance_blocks():
    np.testing.assert_array_equal(build_joint_covariance(np.eye(2), np.zeros((1, 2)), 1.0), np.eye(3))
    M = build_joint_covariance(np.eye(2), np.eye(2), 0.0)
    np.testing.assert_array_equal(M, np.block([[np.eye(2), np.eye(2)], [np.eye(2), np.eye(2)]]))


def test_joint_covariance_symmetric_random():
    rng = np.random.default_rng(4)
    Q = random_psd(6, rng)
    K = rng.standard_normal((3, 6))
    M = build_joint_covariance(Q, K, 0.7)
    assert np.max(np.abs(M - M.T)) <= 1e-14
    np.testing.assert_allclose(M[6:, :6], K @ Q, rtol=1e-12)
    np.testing.assert_allclose(M[6:, 6:], K @ Q @ K.T + 0.49 * np.eye(3), rtol=1e-12)


def test_stability_constants_normal_case():
    sys = SystemModel(0.5 * np.eye(2), np.eye(2), np.zeros((2, 2)))
    C, rho, horizon = estimate_stability_constants(sys)
    assert rho == pytest.approx(0.505)
    assert C == 1.0
    assert horizon >= 1


def test_stability_constants_nilpotent():
    sys = SystemModel([[0.0, 10.0], [0.0, 0.0]], np.zeros((2, 1)))
    C, rho, horizon = estimate_stability_constants(sys)
    assert rho == pytest.approx(0.01)
    assert C >= 10


def _certified(sys, C, rho, horizon):
    P = np.eye(sys.n)
    for tau in range(horizon + 1):
        bound = C * rho**tau * (1 + 1e-9)
        for mat in (P, P @ sys.B, sys.K0 @ P, sys.K0 @ P @ sys.B):
            assert np.linalg.norm(mat, 2) <= bound
        P = sys.A_cl @ P


def test_certificate_on_swing_grid():
    inst = generate_instance(8, make_rng(3))
    C, rho, horizon = estimate_stability_constants(inst.system)
    assert C >= 1 and 0 <= rho < 1
    _certified(inst.system, C, rho, horizon)


def test_stationary_stats_invariants():
    inst = generate_instance(6, make_rng(9))
    w, v = default_noise()
    st = stationary_stats(inst.system, w, v)
    rhs = noise_rhs(inst.system, w, v)
    assert lyapunov_residual(inst.system.A_cl, st.Q_star, rhs) <= 1e-10
    M = st.M_star
    assert np.max(np.abs(M - M.T)) == 0
    assert np.linalg.eigvalsh(M)[0] >= -1e-10 * np.linalg.norm(M, 2)


def test_rhs_uses_variances():
    sys = SystemModel([[0.0]], [[2.0]])
    rhs = noise_rhs(sys, NoiseSpec("uniform", 3.0), NoiseSpec("rademacher", 0.5))
    assert rhs[0, 0] == pytest.approx(3.0 + 0.25 * 4)
