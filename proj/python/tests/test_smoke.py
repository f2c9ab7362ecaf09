import math
from pathlib import Path

import numpy as np
import pytest

import mortjump

ROOT = Path(__file__).resolve().parents[2]


def test_version_and_cli():
    code, out, _ = mortjump.run_cli(["--version"])
    assert code == 0
    assert mortjump.__version__ in out


def test_waic_matches_numpy():
    rng = np.random.default_rng(1)
    ll = rng.normal(-1.0, 0.5, size=(200, 20))
    lpd = np.log(np.mean(np.exp(ll), axis=0)).sum()
    p_waic = ll.var(axis=0, ddof=1).sum()
    w = mortjump.waic(ll)
    assert w["lpd_hat"] == pytest.approx(lpd, abs=1e-10)
    assert w["p_waic"] == pytest.approx(p_waic, abs=1e-10)
    assert w["waic"] == pytest.approx(-2.0 * (lpd - p_waic), abs=1e-9)
    loo = mortjump.loo(ll)
    assert loo["pareto_k"].shape == (20,)
    assert loo["deviance"] == pytest.approx(-2.0 * loo["lpd_loo"])


def test_scores():
    assert mortjump.log_score([0.0], [1.0], 0.0) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
    assert mortjump.crps([1.0], 3.0) == pytest.approx(2.0)


def test_identification_round_trip():
    occ = [0, 0, 1, 1, 0, 0, 0, 0]
    sev = np.array([0, 0, 1.2, 0.8, 0, 0, 0, 0], dtype=float)
    j = mortjump.jump_path("ar", occ, sev, 0.4)
    assert mortjump.recover_ar_coefficient(j, 7) == pytest.approx(0.4, abs=1e-9)
    assert np.array_equal(mortjump.jump_path("ma", occ, sev, 0.0), mortjump.jump_path("liuli", occ, sev, 0.0))
    roots = mortjump.admissible_ma_roots(mortjump.jump_path("ma", occ, sev, 0.4), 7)
    assert any(abs(r - 0.4) < 1e-9 for r in roots)


def test_diagnostics_shapes():
    rng = np.random.default_rng(2)
    chains = rng.normal(size=(2, 1000))
    assert mortjump.rhat(chains) < 1.01
    assert mortjump.ess_bulk(chains) > 1000
    shifted = chains + np.array([[0.0], [10.0]])
    assert mortjump.rhat(shifted) > 2.0


def test_simulate_fit_forecast():
    sim = mortjump.simulate("ar", seed=3, n_ages=3, n_years=9)
    assert sim["log_rates"].shape == (3, 9)
    assert np.allclose(mortjump.improvement_rates(sim["log_rates"]), sim["improvements"], atol=1e-12)
    fit = mortjump.fit(sim["improvements"], model="ar", burn_in=100, samples=200, thin=2, seed=4)
    assert fit.draws.shape == (200, len(fit.columns))
    assert fit.loglik.shape == (200, 3 * 8)
    assert fit.columns[:3] == ["d", "sigma_xi", "sigma_r"]
    rows = {r["parameter"]: r for r in fit.summary()}
    assert "a" in rows
    fan = fit.forecast(sim["log_rates"][:, -1], horizon=5, seed=1)
    assert fan.shape == (200, 3, 5)


def test_errors_carry_codes():
    with pytest.raises(mortjump.MortjumpError) as info:
        mortjump.fit(np.zeros((3, 8)), model="arima")
    assert mortjump.error_code(info.value) == "InvalidConfig"
    with pytest.raises(mortjump.MortjumpError) as info:
        mortjump.waic(np.full((4, 3), np.nan))
    assert mortjump.error_code(info.value) == "InvalidLogLik"


def test_load_bundled_table():
    t = mortjump.load_table(str(ROOT / "data" / "synthetic_ar.csv"))
    assert t["deaths"].shape == (len(t["ages"]), len(t["years"]))
    assert t["improvements"].shape == (len(t["ages"]), len(t["years"]) - 1)
