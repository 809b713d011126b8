import json
import math

import numpy as np
import pytest

from hesim import presets, stats
from hesim.lattice import LatticeVertex, build_box_domain
from hesim.stats import (EnsembleConfig, EnsembleError, TestReport,
                         check_hit_hypothesis, estimate_hit_probability,
                         run_ensemble)


def small_cfg(**kw):
    base = dict(domain_kind="box", domain_params=(20, 10, 0),
                process="harmonic-explorer", n_samples=20, master_seed=77,
                horizon_T=0.04)
    base.update(kw)
    return EnsembleConfig(**base)


def test_ensemble_determinism_and_jobs_independence():
    a = run_ensemble(small_cfg(), jobs=1)
    b = run_ensemble(small_cfg(), jobs=4)
    assert np.array_equal(a.w_grid, b.w_grid)
    assert np.array_equal(a.n_steps, b.n_steps)
    assert a.grid_csv() == b.grid_csv()


def test_single_sample_matches_explorer_run():
    from hesim import explorer
    cfg = small_cfg(n_samples=1, horizon_T=None,
                    probes=((0, 1),))
    store = run_ensemble(cfg, jobs=1)
    st = explorer.run(build_box_domain(20, 10), 77, explorer.WALK,
                      sample_index=0)
    assert store.n_steps[0] == st.n
    tv = st.terminal_values()
    assert store.terminal[0, 0] == tv[LatticeVertex(0, 1)]


def test_sle_store_statistics():
    cfg = EnsembleConfig(domain_kind="box", domain_params=(), process="sle",
                         n_samples=400, master_seed=9, horizon_T=1.0,
                         kappa=4.0, sle_dt=1e-3)
    store = run_ensemble(cfg)
    for t in (0.25, 0.5, 1.0):
        wt = store.w_at(t)
        assert abs(wt.mean()) <= 4 * wt.std(ddof=1) / math.sqrt(cfg.n_samples)
        assert wt.var(ddof=1) / t == pytest.approx(4.0, rel=0.3)


def test_driving_bm_entries_on_sle():
    cfg = EnsembleConfig(domain_kind="box", domain_params=(), process="sle",
                         n_samples=600, master_seed=410, horizon_T=1.0,
                         kappa=4.0, sle_dt=1e-3)
    store = run_ensemble(cfg)
    entries = stats.test_driving_bm(store, (0.25, 0.5, 1.0),
                                    var_band=(0.15, 0.15), qv_tol=0.1)
    assert all(e.passed for e in entries), [e.name for e in entries if not e.passed]


def test_harmonic_profile_decays():
    a = stats.test_harmonic_profile(60)
    b = stats.test_harmonic_profile(120)
    assert b["max_deviation"] < a["max_deviation"]
    assert a["n_vertices"] > 0


def test_hit_hypothesis_checker():
    d = build_box_domain(64, 32)
    check_hit_hypothesis(d, complex(16.5, 0.0), 12.0)   # fine
    with pytest.raises(EnsembleError):
        # a ball straddling the split sees both arcs in one component
        check_hit_hypothesis(d, complex(0.5, 0.0), 6.0)


def test_estimate_hit_probability_monotone():
    d = build_box_domain(40, 20)
    z = complex(10.5, 0.0)
    out = [estimate_hit_probability(d, z, r, 8.0, M=300, seed=6)
           for r in (4.0, 2.0, 1.0)]
    freqs = [o["frequency"] for o in out]
    assert freqs[0] >= freqs[1] >= freqs[2]
    assert all(0.0 <= f <= 1.0 for f in freqs)
    with pytest.raises(EnsembleError):
        estimate_hit_probability(d, z, 9.0, 8.0, M=10, seed=6)


def test_report_json_shape():
    rep, files = presets.driving_fixtures()
    doc = json.loads(rep.to_json())
    assert doc["preset"] == "driving-fixtures"
    assert isinstance(doc["passed"], bool)
    assert {"name", "property", "statistic", "expected", "tolerance",
            "passed", "samples"} <= set(doc["tests"][0])
    assert rep.csv().splitlines()[0] == "name,statistic,expected,tolerance,passed"
    assert "driving_fixtures_stats.csv" in files


def test_report_pure_function_of_config():
    r1, f1 = presets.h_martingale(seed=31, M=200)
    r2, f2 = presets.h_martingale(seed=31, M=200)
    assert r1.to_json() == r2.to_json()
    assert f1 == f2


def test_unknown_preset():
    with pytest.raises(KeyError):
        presets.run_preset("nope")


def test_compare_he_sle_null():
    """Two independent SLE(4) tip ensembles look alike under the KS tests."""
    t_grid = np.array([0.25, 0.5, 1.0])
    cfg = EnsembleConfig(domain_kind="box", domain_params=(), process="sle",
                         n_samples=220, master_seed=19, horizon_T=1.0,
                         kappa=4.0, sle_dt=1e-3)
    a = presets._sle_tip_store(cfg, t_grid)
    cfg2 = EnsembleConfig(domain_kind="box", domain_params=(), process="sle",
                          n_samples=220, master_seed=20, horizon_T=1.0,
                          kappa=4.0, sle_dt=1e-3)
    b = presets._sle_tip_store(cfg2, t_grid)
    entries = stats.compare_he_sle(a, b, t_grid)
    assert sum(e.passed for e in entries) >= len(entries) - 1


def test_he_vs_sle_preset_smoke():
    rep, files = presets.he_vs_sle(seed=23, scale=40, M=120)
    assert isinstance(rep, TestReport)
    assert "he_vs_sle_stats.csv" in files
