import math

import pytest

import uldyn


def test_version():
    assert uldyn.__version__.count(".") == 2


def test_exact_moments_stationary_limit():
    m = uldyn.exact_moments(2.0, 4.0, 50.0)
    assert m["mean"] == [0.0, 0.0]
    assert m["cov"][0][0] == pytest.approx(1.0 / 2.0, rel=1e-10)
    assert m["cov"][1][1] == pytest.approx(1.0 / 4.0, rel=1e-10)
    assert m["cov"][0][1] == pytest.approx(0.0, abs=1e-12)


def test_semigroup_at_zero_is_identity():
    M = uldyn.semigroup(1.0, 4.0, 0.0)
    assert M == [[1.0, 0.0], [0.0, 1.0]]


def test_prefactor_worked_values():
    assert uldyn.epsilon_bar(1.0, 4.0, 0.75, 1.0) == pytest.approx(0.5, rel=1e-12)
    assert uldyn.cbar(1.0, 1.0, 1.0, 1.0, 1.5) == pytest.approx(0.25, rel=1e-12)
    assert uldyn.upper_rate_constant(1.0, 4.0, 1.0) == pytest.approx(math.sqrt(1.25), rel=1e-12)


def test_simulate_deterministic_and_finite():
    a = uldyn.simulate("rmm", "quadratic:u=1", 2, 1.0, 4.0, 1.0, 32, seed=7)
    b = uldyn.simulate("rmm", "quadratic:u=1", 2, 1.0, 4.0, 1.0, 32, seed=7)
    assert a == b
    assert a["queries"] == 64
    assert all(math.isfinite(x) for x in a["x"] + a["v"])
    em = uldyn.simulate("em", "quadratic:u=1", 2, 1.0, 4.0, 1.0, 32, seed=7)
    assert em["queries"] == 32


def test_estimate_p_forbidden_region():
    r = uldyn.estimate_p(1.0, 0.1, 2.0, 4.0, 1.0, trials=200, Ns_fine=64, seed=3)
    assert r["forbidden"] is True
    assert r["hits"] == 0


def test_lattice_utilities():
    assert uldyn.scd_chain_count(4) == 6
    assert uldyn.scd_chain_count(12) == 924
    assert uldyn.upsilon(0, 2) == 3
    assert all(uldyn.level_variance_identity_holds(n) for n in range(1, 31))


def test_converge_smoke():
    out = uldyn.converge("rmm", "quadratic:u=1", 1, 1.0, 4.0, 1.0, [8, 16, 32, 64], 80, seed=5)
    assert out["experiment"] == "converge"
    assert out["results"]["slope"] < -1.0
    assert len(out["results"]["points"]) == 4


def test_weak_smoke():
    out = uldyn.weak(1.0, 4.0, 1.0, [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    assert out["results"]["worst_slope"] >= 2.5
    assert all(c["pass"] for c in out["checks"])
