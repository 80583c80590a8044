import csv
import json

import numpy as np
import pytest

from sparsid.harness import (
    PAPER_REFERENCE,
    RESULT_COLUMNS,
    SweepConfig,
    linf_error,
    mismatch_error,
    normalized_l2_error,
    run_cell,
    run_estimator_comparison,
    run_gamma_histogram,
    run_recovery_sweep,
)


def test_mismatch_trivial():
    S = np.array([[True, False], [False, True]])
    assert mismatch_error(S, S) == 0
    assert mismatch_error([[1], []], [[], []], shape=(2, 2)) == 1


def test_mismatch_set_difference_oracle():
    rng = np.random.default_rng(0)
    a, b = rng.random((6, 4)) < 0.4, rng.random((6, 4)) < 0.4
    sa = {tuple(x) for x in np.argwhere(a)}
    sb = {tuple(x) for x in np.argwhere(b)}
    assert mismatch_error(a, b) == len(sa - sb) + len(sb - sa)


def test_l2_and_linf():
    P = np.random.default_rng(1).standard_normal((5, 3))
    assert normalized_l2_error(P, P) == 0
    assert normalized_l2_error(np.zeros_like(P), P) == pytest.approx(1.0)
    assert normalized_l2_error(2 * P, P) == pytest.approx(1.0)
    Q = P.copy()
    Q[2, 1] += 0.3
    assert linf_error(P, P) == 0
    assert linf_error(Q, P) == pytest.approx(0.3)
    R = P + np.random.default_rng(2).standard_normal(P.shape)
    assert linf_error(R, P) == max(abs(R[i, j] - P[i, j]) for i in range(5) for j in range(3))


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        SweepConfig(T_grid=[])
    with pytest.raises(ValueError):
        SweepConfig(trials=0)
    with pytest.raises(ValueError):
        SweepConfig(lambda_rule="fixed")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"generators": [3], "T_grid": [50], "trials": 2}))
    cfg = SweepConfig.from_json(path)
    assert cfg.generators == [3] and cfg.trials == 2
    assert SweepConfig(**cfg.to_dict()) == cfg


def test_row_accounting(tmp_path):
    cfg = SweepConfig(generators=[3, 4], T_grid=[200], trials=1)
    res = run_recovery_sweep(cfg, tmp_path)
    assert len(res.rows) == 2
    with open(tmp_path / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and list(rows[0]) == RESULT_COLUMNS
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["config"]["generators"] == [3, 4]
    for r in res.rows:
        assert 0 <= r["RME"] <= 1
        assert r["mismatch"] <= (r["n"] + r["m"]) * r["n"]
        assert r["RLT"] == r["T"] / (r["n"] + r["m"])


def test_comparison_flags_underdetermined_ls():
    cfg = SweepConfig(generators=[10], T_grid=[20], trials=1)
    rows = run_estimator_comparison(cfg).rows
    by = {r["estimator"]: r for r in rows}
    assert set(by) == {"LASSO", "LASSO+LS", "LS"}
    assert by["LS"]["status"] == "underdetermined" and by["LS"]["mismatch"] == ""
    assert by["LASSO"]["status"] == "ok"


def test_comparison_noiseless_oracle():
    cfg = SweepConfig(generators=[3], T_grid=[500], trials=2, lambda_rule="fixed",
                      lambda_value=1e-10, w_variance=0.0, tol=1e-14, max_sweeps=10**6)
    rows = run_estimator_comparison(cfg).rows
    assert len(rows) == 6
    for r in rows:
        assert r["status"] == "ok"
        assert r["linf_error"] <= 1e-6 and r["l2_error_normalized"] <= 1e-6


def test_cell_deterministic():
    cfg = SweepConfig(generators=[4], T_grid=[300], trials=1)
    a, b = run_cell(cfg, 4, 300, 0), run_cell(cfg, 4, 300, 0)
    for r in (a[0], b[0]):
        r.pop("seconds")
    assert a == b


def test_parallel_matches_serial(tmp_path):
    cfg = SweepConfig(generators=[3], T_grid=[100, 200], trials=2)
    run_recovery_sweep(cfg, tmp_path / "a")
    cfg.jobs = 2
    run_recovery_sweep(cfg, tmp_path / "b")

    def load(p):
        with open(p / "results.csv") as fh:
            return [{k: v for k, v in r.items() if k != "seconds"} for r in csv.DictReader(fh)]

    assert load(tmp_path / "a") == load(tmp_path / "b")


def test_failed_cell_is_recorded(monkeypatch):
    import sparsid.harness as h

    def boom(*a, **k):
        raise RuntimeError("simulated failure")

    monkeypatch.setattr(h, "simulate_closed_loop", boom)
    res = run_recovery_sweep(SweepConfig(generators=[3], T_grid=[50], trials=2))
    assert res.hard_failures == 2
    assert all("simulated failure" in r["error"] for r in res.rows)


def test_gamma_histogram(tmp_path):
    cfg = SweepConfig(generators=[5], instances=2, bins=4)
    (h,) = run_gamma_histogram(cfg, tmp_path)
    assert h.gammas.shape == (2,) and h.counts.sum() == 2
    with open(tmp_path / "gamma.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert (tmp_path / "histogram.csv").exists()


@pytest.mark.slow
def test_gamma_desk_scale_all_finite():
    (h,) = run_gamma_histogram(SweepConfig(generators=[50], instances=200))
    assert h.gammas.size == 200 and np.all(np.isfinite(h.gammas))
    assert 0 <= h.violation_fraction <= 1


def test_reference_values_recorded():
    assert PAPER_REFERENCE["lasso_over_lasso_ls_error_ratio"] == 1.91
    assert PAPER_REFERENCE["gamma_violation_rate_N200"] == 0.0515
    assert PAPER_REFERENCE["min_RLT_for_RME_0.1pct"] == {100: 3.83, 200: 1.42, 400: 0.50, 800: 0.16}


@pytest.mark.slow
def test_desk_scale_rme_non_increasing():
    cfg = SweepConfig(generators=[20], T_grid=[200, 500, 1000, 2000], trials=10)
    res = run_recovery_sweep(cfg)
    means = [res.column("RME", T=T).mean() for T in cfg.T_grid]
    assert all(b <= a for a, b in zip(means, means[1:]))
