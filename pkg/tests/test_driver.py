import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_minmax import C_CODATA, Constants, ConvergenceError, DomainError, PotentialSpec, gamma_kappa
from dirac_minmax.driver import (
    DensityRecord,
    MinMaxResult,
    Scan1DConfig,
    TrialFamily,
    default_density_grid,
    dft_fallacy_scan,
    expand_bracket,
    fig5_scan,
    golden_section,
    grid_local_maxima,
    inner_maximize,
    maxmin_spurious,
    outer_minimize,
    shower_scan,
    spurious_offset,
    virial_check,
)

from conftest import exact_shift


# --- scalar optimizers -------------------------------------------------------


def test_golden_section_quadratic():
    x, fx = golden_section(lambda x: (x - 2.0) ** 2 + 1.0, 0.0, 5.0, tol=1e-12)
    assert x == pytest.approx(2.0, abs=1e-6)
    assert fx == pytest.approx(1.0, abs=1e-12)


def test_golden_section_plateau_resolves_left():
    x, _ = golden_section(lambda x: 0.0, 1.0, 2.0, tol=1e-9)
    assert x == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.05, 50.0), st.floats(0.05, 50.0))
def test_expand_bracket_contains_minimum(x0, xm):
    f = lambda x: (math.log(x) - math.log(xm)) ** 2  # noqa: E731
    a, b, c = expand_bracket(f, x0, bounds=(0.0, math.inf))
    assert a < b < c
    assert f(b) <= f(a) and f(b) <= f(c)
    assert a <= xm <= c


def test_expand_bracket_respects_bounds():
    a, b, c = expand_bracket(lambda x: (x - 0.95) ** 2, 0.1, bounds=(0.0, 1.0))
    assert 0.0 < a < b < c < 1.0
    assert a < 0.95 < c


def test_expand_bracket_failures():
    with pytest.raises(ConvergenceError):
        expand_bracket(lambda x: x, 1.0, max_steps=10)
    with pytest.raises(DomainError):
        expand_bracket(lambda x: x * x, 0.0)


def test_scan_config_validation():
    assert len(Scan1DConfig(0.5, 2.0, 7).grid()) == 7
    with pytest.raises(DomainError):
        Scan1DConfig(2.0, 1.0)
    with pytest.raises(DomainError):
        Scan1DConfig(0.0, 1.0, 2)


def test_trial_family_validation(pot1):
    with pytest.raises(DomainError):
        TrialFamily("gaussian")
    with pytest.raises(DomainError):
        TrialFamily("exact-power", 2)
    with pytest.raises(DomainError):
        TrialFamily().upper(0.0, pot1)
    assert TrialFamily("exact-power").power(pot1) == pytest.approx(gamma_kappa(-1, pot1) - 1)
    assert TrialFamily("sto", 3).seed(pot1) == 3.0
    assert TrialFamily().seed(PotentialSpec(0.0)) == 1.0


# --- inner maximization ------------------------------------------------------


def test_inner_kb_hydrogen(s1, pot1, c):
    res = inner_maximize(s1, "kb", pot1)
    assert res.certified
    # 2x2 stationarity for Z = 1, zeta = 1
    assert res.lambda_star == pytest.approx(c * (math.sqrt(1 + 1 / c**2) - 1), abs=1e-7)
    assert res.lambda_star == pytest.approx(1 / (2 * c), rel=1e-4)


@pytest.mark.parametrize("family", ["kb", "same-radial", "paper-kappa", "resolvent"])
def test_inner_free_particle(s1, c, family):
    pot = PotentialSpec(0.0)
    res = inner_maximize(s1, family, pot)
    # the kappa label is undefined without a charge; the scale search is not
    assert res.kappa_param is None
    assert res.eps_max == pytest.approx(math.sqrt(c**4 + c**2), rel=1e-14)


def test_inner_families_agree_on_1s(s1, pot1):
    kb = inner_maximize(s1, "kb", pot1)
    pk = inner_maximize(s1, "paper-kappa", pot1)
    sr = inner_maximize(s1, "same-radial", pot1)
    # sigma.p of a 1s Slater is proportional to the 1s radial
    assert pk.eps_shift == pytest.approx(kb.eps_shift, abs=1e-13)
    assert sr.eps_shift == pytest.approx(kb.eps_shift, abs=1e-13)
    assert pk.kappa_param is not None and pk.kappa_param > 0
    res = inner_maximize(s1, "resolvent", pot1)
    assert res.lambda_star is None
    assert res.eps_shift >= kb.eps_shift - 1e-12


def test_inner_unknown_family(s1, pot1):
    with pytest.raises(DomainError):
        inner_maximize(s1, "bogus", pot1)


@given(st.floats(0.2, 3.0), st.floats(1.0, 95.0), st.sampled_from(["kb", "same-radial"]))
def test_inner_max_bounds_exact_ground(zscale, Z, family):
    pot = PotentialSpec(Z)
    u = TrialFamily().upper(zscale * Z, pot)
    res = inner_maximize(u, family, pot)
    assert res.eps_shift >= pot.exact_1s_shifted() - 1e-10


@given(st.floats(0.05, 3.0), st.floats(1.0, 95.0))
def test_spurious_root_below_minus_mc2(zscale, Z):
    pot = PotentialSpec(Z)
    _, off = spurious_offset(TrialFamily().upper(zscale * Z, pot), "kb", pot)
    assert off < 0


# --- outer minimization ------------------------------------------------------


@pytest.mark.parametrize("Z", [1.0, 20.0, 90.0])
@pytest.mark.parametrize("family", ["kb", "same-radial", "paper-kappa"])
def test_outer_sto_reaches_exact_level(Z, family):
    pot = PotentialSpec(Z)
    res = outer_minimize(TrialFamily(), family, pot)
    assert res.certified
    assert res.eps_shift == pytest.approx(exact_shift(Z), abs=1e-10 * max(1.0, Z))
    assert res.zeta_star == pytest.approx(Z / gamma_kappa(-1, pot), rel=1e-7)
    assert abs(virial_check(res, pot)) <= 1e-7


@pytest.mark.parametrize("Z", [1.0, 20.0, 90.0])
def test_outer_exact_power(Z):
    pot = PotentialSpec(Z)
    res = outer_minimize(TrialFamily("exact-power"), "same-radial", pot)
    assert res.eps_shift - pot.exact_1s_shifted() == pytest.approx(0.0, abs=1e-10)
    assert res.zeta_star == pytest.approx(Z, rel=1e-7)


def test_outer_resolvent_sto_is_above_exact(pot1):
    res = outer_minimize(TrialFamily(), "resolvent", pot1)
    gap = res.eps_shift - pot1.exact_1s_shifted()
    assert 0 < gap < 1e-8


def test_outer_zeta_range_and_edge(pot1):
    res = outer_minimize(TrialFamily(), "kb", pot1, Scan1DConfig(0.5, 2.0, 21))
    assert res.zeta_star == pytest.approx(1.0000266267, rel=1e-8)
    assert len(res.trace) == 22
    with pytest.raises(ConvergenceError, match="edge"):
        outer_minimize(TrialFamily(), "kb", pot1, Scan1DConfig(1.5, 3.0, 11))


def test_minmax_result_rejects_non_minimum():
    with pytest.raises(DomainError):
        MinMaxResult(0.0, -0.5, 1.0, 0.0, ((1.0, 0.0, -0.6),), TrialFamily(), "kb", True)


def test_virial_off_optimum_is_large(pot1):
    res = outer_minimize(TrialFamily(), "kb", pot1)
    off = MinMaxResult(res.eps_minmax, res.eps_shift, 1.5, res.lambda_star, (), res.trial, "kb", False)
    assert abs(virial_check(off, pot1)) > 0.1


def test_nonrelativistic_limit():
    pot = PotentialSpec(1.0, Constants(c=C_CODATA * 100))
    res = outer_minimize(TrialFamily(), "kb", pot)
    assert res.eps_shift == pytest.approx(-0.5, abs=1e-7)


# --- scans -------------------------------------------------------------------


def test_maxmin_approaches_minus_mc2_from_below(pot1):
    zetas = np.geomspace(1e-3, 2.0, 50)
    (z, sup), recs = maxmin_spurious(TrialFamily(), "kb", pot1, zetas)
    vals = np.array([r.values["eps_minus_plus_mc2"] for r in recs])
    assert np.all(vals < 0)
    assert z == pytest.approx(1e-3)
    assert abs(sup) < 1.2e-3
    # monotone in zeta for the 1s family
    assert np.all(np.diff(vals) < 0)


def test_grid_local_maxima():
    assert grid_local_maxima([0, 1, 0, 2, 2, 1]) == [1, 3]
    assert grid_local_maxima([1, 2, 3]) == []


def test_shower_scan_shapes(pot1, c):
    zetas = [0.96, 1.0, 1.04]
    lams = np.linspace(0, 0.0146, 30)
    recs, maxima = shower_scan(zetas, lams, TrialFamily(), "kb", pot1)
    assert len(recs) == 90 and len(maxima) == 3
    for z, m in zip(zetas, maxima):
        traj = [r.values["eps_minus_mc2"] for r in recs if r.params["zeta"] == z]
        assert max(traj) <= m.values["eps_max_minus_mc2"] + 1e-14
    # the grid contains lambda ~ 1/2c so each trajectory peaks near it
    peaks = grid_local_maxima([r.values["eps_minus_mc2"] for r in recs[:30]])
    assert len(peaks) == 1
    assert lams[peaks[0]] == pytest.approx(1 / (2 * c), abs=lams[1])


def test_fig5_scan_branches(pot1):
    zetas = [0.3, 1.0, 2.5]
    recs = fig5_scan(zetas, pot1)
    for r in recs:
        assert r.values["eps_plus_minus_mc2"] >= pot1.exact_1s_shifted() - 1e-12
        assert r.values["eps_minus_plus_mc2"] < 0
    at1 = recs[1].values["eps_plus_minus_mc2"]
    assert at1 == pytest.approx(pot1.exact_1s_shifted(), abs=1e-8)


def test_dft_fallacy_same_energy_different_density(pot1):
    recs = dft_fallacy_scan([1, 2, 3], pot1)
    g = gamma_kappa(-1, pot1)
    r = default_density_grid(1.0)
    for rec in recs:
        assert isinstance(rec, DensityRecord)
        assert abs(rec.deviation) < 1e-12
        assert rec.zeta_star == pytest.approx(rec.n / g, rel=1e-8)
        assert rec.density.shape == r.shape
        assert np.all(rec.density >= 0)
    d1, d2 = recs[0].density, recs[1].density
    assert np.max(np.abs(d1 - d2)) > 0.1 * np.max(d1)


def test_dft_density_normalized_on_wide_grid(pot1):
    r = np.linspace(1e-4, 60.0, 20001)
    rec = dft_fallacy_scan([2], pot1, r)[0]
    assert np.trapezoid(rec.density, r) == pytest.approx(1.0, abs=1e-6)
