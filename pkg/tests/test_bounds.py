import math
from dataclasses import replace

import numpy as np
import pytest

from sparsid.bounds import (
    TheoryParams,
    deterministic_error_bound,
    paper_lambda,
    theorem1_error_bound,
    theorem1_lambda,
    theorem1_min_T,
    theorem1_min_T_raw,
    theory_params,
)
from sparsid.diagnostics import assumption_report
from sparsid.lasso import LassoOptions, estimate_lasso
from sparsid.models import make_rng, noise_eta
from sparsid.powergrid import default_noise, generate_instance
from sparsid.simulation import assemble_regression, simulate_closed_loop
from sparsid.stationary import stationary_stats


def unit(**kw):
    # n + m = e * delta makes log((n+m)/delta) = 1; n, m are only used through that log
    base = dict(C=1.0, rho=0.0, eta=1.0, gamma=1.0, C_min=1.0, D_max=1.0, Psi_min=1.0,
                k=1, n=1, m=1, delta=2 / math.e)
    base.update(kw)
    with pytest.warns(UserWarning):
        return TheoryParams(**base)


def test_log_term_unit():
    assert unit().log_term == pytest.approx(1.0, abs=1e-15)


def test_unit_plug():
    p = unit()
    assert theorem1_lambda(p, 1) == pytest.approx(1.0)
    assert theorem1_error_bound(p, 1) == pytest.approx(1.0)
    assert theorem1_min_T(p) == 1


def test_scaling_laws():
    p = unit()
    assert theorem1_lambda(p, 8) / theorem1_lambda(p, 16) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert theorem1_error_bound(p, 8) / theorem1_error_bound(p, 16) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert theorem1_min_T_raw(unit(k=4)) == pytest.approx(16 * theorem1_min_T_raw(p), rel=1e-14)


@pytest.fixture(scope="module")
def grid_params():
    inst = generate_instance(20, make_rng(0))
    w, v = default_noise()
    return theory_params(inst.system, w, v, 0.05)


def test_grid_duplicate_expression(grid_params):
    p = grid_params
    dep = p.C / (1 - p.rho)
    L = math.log((p.n + p.m) / p.delta)
    assert theorem1_lambda(p, 1000) == pytest.approx(dep * p.eta**2 / p.gamma * (L / 1000) ** 0.5, rel=1e-12)
    raw = dep**4 * p.D_max**2 / (p.gamma**2 * p.C_min**2 * p.Psi_min**2) * p.k**2 * L
    assert theorem1_min_T(p) == math.ceil(raw)
    err = dep * p.D_max * p.eta**2 / p.gamma * (L / 1000) ** 0.5
    assert theorem1_error_bound(p, 1000) == pytest.approx(err, rel=1e-12)


def test_constants_scale_linearly(grid_params):
    p2 = replace(grid_params, c1=2.0, c3=3.0)
    assert theorem1_lambda(p2, 500) == pytest.approx(2 * theorem1_lambda(grid_params, 500))
    assert theorem1_error_bound(p2, 500) == pytest.approx(3 * theorem1_error_bound(grid_params, 500))


def test_params_validation():
    good = dict(C=1.0, rho=0.5, eta=1.0, gamma=0.5, C_min=0.5, D_max=1.0, Psi_min=0.5, k=1, n=2, m=1)
    TheoryParams(**good)
    with pytest.raises(ValueError):
        TheoryParams(**{**good, "gamma": 0.0})
    with pytest.raises(ValueError):
        TheoryParams(**{**good, "rho": 1.0})
    with pytest.warns(UserWarning, match="C_min"):
        TheoryParams(**{**good, "C_min": 2.0})


def test_paper_lambda():
    assert paper_lambda(math.exp(1 / 0.03), 0, 1) == pytest.approx(1.0, rel=1e-12)
    assert paper_lambda(40, 20, 100) / paper_lambda(40, 20, 200) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert paper_lambda(400, 200, 1000) == pytest.approx(math.sqrt(0.03 * np.log(600) / 1000), rel=1e-15)


def test_deterministic_bound_trivial():
    rng = np.random.default_rng(0)
    F = rng.standard_normal((4, 4))
    M = F @ F.T + np.eye(4)
    A = [0, 2]
    r = deterministic_error_bound(M, M, np.zeros(4), A, 3.0, 0.0)
    assert r.bound == 0 and r.deviation == 0 and r.precondition_met
    assert deterministic_error_bound(M, M, np.zeros(4), A, 3.0, 0.2).bound == pytest.approx(0.6)
    with pytest.raises(ValueError):
        deterministic_error_bound(M, M, np.zeros(4), [], 1.0, 0.1)


@pytest.mark.slow
def test_deterministic_bound_holds_on_recovered_columns():
    w, v = default_noise()
    eta = noise_eta(w, v)
    sys = generate_instance(3, make_rng(0)).system
    M_star = stationary_stats(sys, w, v).M_star
    D = assumption_report(sys.Psi_star, M_star).D_max
    T = 20000
    lam = paper_lambda(sys.n, sys.m, T)
    applicable = 0
    for seed in range(50):
        d = assemble_regression(simulate_closed_loop(sys, w, v, T, seed, keep_noise=True))
        est = estimate_lasso(d, LassoOptions(lam, tol=1e-12))
        M = d.X.T @ d.X / T
        G = d.X.T @ d.W / T
        for j in range(sys.n):
            A = np.flatnonzero(sys.Psi_star[:, j])
            if not np.array_equal(A, est.support[j]):
                continue
            b = deterministic_error_bound(M, M_star, G[:, j], A, D, lam, eta)
            if b.precondition_met:
                applicable += 1
                assert np.abs(est.Psi_hat[A, j] - sys.Psi_star[A, j]).max() <= b.bound
    assert applicable >= 10
