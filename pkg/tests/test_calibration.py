import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gopa.calibration import (
    DegenerateBranching,
    InfeasibleTarget,
    NoAdmissibleValue,
    PrivacyTarget,
    c_squared,
    check_lemma1,
    corollary1_plan,
    kout_coefficient,
    kout_conditions,
    minimal_k,
    reference_grid,
    simulate_admissible,
    simulation_norms,
    solve_kappa,
    theta_for,
    utility_noise_floor,
)
from gopa.graph import star_norm_sq


def oracle_sigma_delta(n, rho, topo, k=None, eps=0.1):
    """Closed-form plan redone in 50-digit arithmetic."""
    mp.mp.dps = 50
    n_H = int(rho * n)
    dp = mp.mpf(1) / n_H ** 2
    d = 10 * dp
    a = mp.mpf("3.75") if topo == "k_out" else mp.mpf("1.25")
    r = mp.log(d / a) / mp.log(dp / mp.mpf("1.25"))
    kappa = r / (1 - r)
    s_eta = 2 * mp.log(mp.mpf("1.25") / dp) / (n_H * mp.mpf(eps) ** 2)
    if topo == "complete":
        s = kappa * s_eta
    elif topo == "worst_case":
        s = kappa * s_eta * n_H ** 2 / 3
    else:
        b = mp.floor((k - 1) * mp.mpf(rho) / 3) - 1
        s = kappa * s_eta * n_H * (1 / b + (12 + 6 * mp.log(n_H)) / n_H)
    return float(mp.sqrt(s))


# --- check_lemma1 / theta -------------------------------------------------

def test_dp_conditions_passes_reference_point():
    r = check_lemma1(0.1, 1e-7, 3.06e-4)
    assert r.passed
    assert r.slack_first > 0 and r.slack_second > 0


def test_dp_conditions_fails_large_theta():
    r = check_lemma1(0.1, 1e-3, 0.01)
    assert not r.passed
    assert r.slack_first < 0


def test_dp_conditions_small_theta_passes():
    for theta in (1e-6, 1e-9, 1e-12):
        assert check_lemma1(0.1, 1e-10, theta).passed


def test_dp_conditions_rejects_nonpositive():
    with pytest.raises(ValueError):
        check_lemma1(0.1, 0.0, 1e-3)


def test_theta_complete_example():
    assert theta_for("complete", 10**4, 0.3729, 2.646) == pytest.approx(3.06e-4, rel=2e-3)


def test_theta_worst_case_limit():
    base = 1 / (0.5 * 100)
    assert theta_for("worst_case", 100, 0.5, 1e300) == pytest.approx(base, rel=1e-12)


def test_kout_coefficient_example():
    expected = 1 / 33 + (12 + 6 * math.log(1e4)) / 1e4
    assert kout_coefficient(10**4, 105, 1.0) == pytest.approx(expected, rel=1e-12)
    assert kout_coefficient(10**4, 105, 1.0) == pytest.approx(0.03703, abs=1e-5)


def test_kout_degenerate():
    with pytest.raises(DegenerateBranching):
        theta_for("k_out", 100, 1.0, 1.0, k=6, rho=1.0)
    with pytest.raises(ValueError):
        theta_for("k_out", 100, 1.0, 1.0, k=None)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1.01, 10))
def test_theta_decreasing(se, sd, f):
    for topo, k in (("complete", None), ("worst_case", None), ("k_out", 40)):
        t = theta_for(topo, 500, se, sd, k)
        assert theta_for(topo, 500, se * f, sd, k) < t
        assert theta_for(topo, 500, se, sd * f, k) < t


# --- kappa / plans --------------------------------------------------------

@given(st.floats(1e-12, 1e-3), st.floats(2.0, 1e4), st.sampled_from([1.25, 3.75]))
def test_kappa_round_trip(dp, factor, a):
    d = min(dp * factor, 0.5)
    try:
        kappa = solve_kappa(d, dp, a)
    except InfeasibleTarget:
        return
    back = a * (dp / 1.25) ** (kappa / (kappa + 1))
    assert abs(back - d) / d <= 1e-9


def test_kappa_infeasible():
    with pytest.raises(InfeasibleTarget):
        solve_kappa(1e-9, 1e-4, 1.25)
    with pytest.raises(InfeasibleTarget):
        solve_kappa(2.0, 1e-4, 1.25)


def test_c_squared():
    assert c_squared(1e-8) == pytest.approx(2 * math.log(1.25e8))


@pytest.mark.parametrize("topo,rho,ref,tol", [
    ("complete", 0.5, 2.1, 0.01),
    ("worst_case", 0.5, 6114.8, 0.01),
    ("complete", 1.0, 1.7, 0.06),
    ("worst_case", 1.0, 9655.0, 0.06),
    ("k_out", 1.0, 44.7, 0.01),
])
def test_reference_cells(topo, rho, ref, tol):
    plan = corollary1_plan(PrivacyTarget.standard(10_000, rho, topo))
    assert abs(plan.sigma_delta - ref) / ref <= tol
    assert plan.sigma_delta == pytest.approx(oracle_sigma_delta(10_000, rho, topo, plan.k), rel=1e-10)
    assert plan.check.passed


def test_kout_reference_k():
    plan = corollary1_plan(PrivacyTarget.standard(10_000, 1.0, "k_out"))
    assert plan.k == 105
    assert plan.kappa == pytest.approx(14.49, abs=0.01)
    assert plan.sigma_eta_sq == pytest.approx(0.3729, abs=1e-4)


def test_kout_half_honest_discrepancy():
    plan = corollary1_plan(PrivacyTarget.standard(10_000, 0.5, "k_out"))
    assert abs(plan.k - 203) <= 15
    assert abs(plan.sigma_delta - 34.4) / 34.4 <= 0.35
    row = [r for r in reference_grid() if r.topology == "k_out" and r.rho == 0.5][0]
    assert row.note


def test_minimal_k_conditions():
    n, rho = 10_000, 1.0
    d = 10 / n ** 2
    k = minimal_k(n, rho, d)
    assert all(kout_conditions(n, k, rho, d / 3).values())
    assert not all(kout_conditions(n, k - 1, rho, d / 3).values())


def test_minimal_k_small_population():
    with pytest.raises(InfeasibleTarget):
        minimal_k(80, 1.0, 1e-3)


def test_sigma_eta_formula():
    plan = corollary1_plan(PrivacyTarget.standard(2000, 0.5, "complete"))
    assert plan.sigma_eta_sq == pytest.approx(plan.c_sq / (plan.n_H * plan.epsilon ** 2), rel=1e-14)


@given(st.integers(200, 50_000), st.sampled_from([0.5, 0.75, 1.0]),
       st.sampled_from(["complete", "worst_case", "k_out"]), st.floats(0.05, 0.9))
def test_plan_closure(n, rho, topo, eps):
    plan = corollary1_plan(PrivacyTarget.standard(n, rho, topo, eps))
    assert plan.theta > 0
    assert check_lemma1(plan.epsilon, plan.delta, plan.theta).passed


def test_target_validation():
    with pytest.raises(ValueError):
        PrivacyTarget(1.5, 1e-3, 1e-4, 100)
    with pytest.raises(ValueError):
        PrivacyTarget(0.1, 1e-3, 1e-4, 100, rho=0)
    with pytest.raises(ValueError):
        PrivacyTarget(0.1, 1e-3, 1e-4, 100, topology="ring")


# --- utility --------------------------------------------------------------

def test_utility_full_honest_equals_curator():
    plan = corollary1_plan(PrivacyTarget.standard(10_000, 1.0, "complete"))
    u = utility_noise_floor(plan)
    assert u["variance"] == pytest.approx(u["curator"], rel=1e-14)


def test_utility_half_honest_ratio():
    plan = corollary1_plan(PrivacyTarget.standard(10_000, 0.5, "complete"))
    assert utility_noise_floor(plan)["ratio"] == pytest.approx(2.0, rel=1e-12)


def test_utility_arithmetic():
    plan = corollary1_plan(PrivacyTarget.standard(10_000, 1.0, "complete"))
    assert utility_noise_floor(plan)["variance"] == pytest.approx(3.729e-5, rel=1e-3)


# --- simulation -----------------------------------------------------------

def test_simulation_reproducible():
    a = simulate_admissible(200, 1.0, 4, 30, rng_seed=5)
    b = simulate_admissible(200, 1.0, 4, 30, rng_seed=5)
    assert a.as_dict() == b.as_dict()


def test_simulation_complete_short_circuit():
    norms, conn = simulation_norms(50, 1.0, 49, 10)
    assert conn == 10
    assert np.all(norms == float(star_norm_sq(50)))


def test_simulation_small_table_row():
    r = simulate_admissible(100, 1.0, 3, 200, rng_seed=1)
    assert r.connect_rate == 1.0
    assert abs(r.sigma_delta - 60.8) / 60.8 <= 0.2
    assert r.sigma_delta_p999 <= r.sigma_delta + 1e-12


def test_simulation_all_disconnected():
    with pytest.raises(NoAdmissibleValue):
        simulate_admissible(100, 0.2, 1, 5, rng_seed=0)


def test_simulation_beats_closed_form():
    n, rho = 300, 1.0
    k = minimal_k(n, rho, 10 / n ** 2)
    norms, conn = simulation_norms(n, rho, k, 20, rng_seed=2)
    assert conn == 20
    assert norms.max() <= kout_coefficient(n, k, rho)
