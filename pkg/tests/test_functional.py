import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh

from dirac_minmax import (
    Component,
    ConvergenceError,
    DomainError,
    Explicit,
    KineticBalance,
    PaperKappa,
    PotentialSpec,
    RadialFunction,
    SameRadial,
    coupling_curvature,
    energy,
    gamma_kappa,
    sigma_p_apply,
)
from dirac_minmax.core import Constants
from dirac_minmax.functional import (
    coupling_profile,
    family_spec,
    materialize_lower,
    paper_kappa_for_scale,
    paper_kappa_scale,
)
from dirac_minmax.integrals import overlap


def _upper(p, z, kappa=-1):
    return Component(RadialFunction.normalized_slater(p, z), kappa)


def test_materialize_examples(pot1):
    z, lam = 1.4, 0.01
    lo = materialize_lower(_upper(0, z), KineticBalance(lam), pot1)
    n = RadialFunction.normalized_slater(0, z).terms[0].coeff
    assert lo.kappa == 1
    assert lo.radial.terms[0].coeff == pytest.approx(-lam * z * n)
    lo = materialize_lower(_upper(1, z), SameRadial(lam), pot1)
    assert lo.kappa == 1 and lo.radial.terms[0].power == 1.0
    ex = Component(RadialFunction.slater(0, 3.0), 1)
    assert materialize_lower(_upper(0, z), Explicit(ex), pot1) == ex


def test_paper_kappa_coefficient(pot1, c):
    # zeta^-1 sqrt((1-g)/(1+g)) = alpha/(1+g) at |kappa| = 1, zeta = 1
    g = gamma_kappa(-1, pot1)
    expected = (1 / c) / (1 + g)
    assert expected == pytest.approx(3.64872e-3, abs=1e-8)
    assert paper_kappa_scale(-1, 1.0, pot1) == pytest.approx(math.sqrt((1 - g) / (1 + g)), rel=1e-12)
    u = _upper(0, 1.0)
    lo = materialize_lower(u, PaperKappa(-1), pot1)
    ref = sigma_p_apply(u.radial, -1).radial.terms[0].coeff * expected
    assert lo.radial.terms[0].coeff == pytest.approx(ref, rel=1e-12)


@given(st.floats(1e-3, 0.999), st.floats(0.3, 3.0), st.floats(0.5, 90.0))
def test_paper_kappa_inverse_roundtrip(s, zeta, Z):
    pot = PotentialSpec(Z)
    lam = s / zeta
    kappa = paper_kappa_for_scale(lam, zeta, pot)
    assert paper_kappa_scale(kappa, zeta, pot) == pytest.approx(lam, rel=1e-9)


def test_paper_kappa_inverse_domain():
    with pytest.raises(DomainError):
        paper_kappa_for_scale(2.0, 1.0, PotentialSpec(1.0))
    with pytest.raises(DomainError):
        paper_kappa_for_scale(0.1, 1.0, PotentialSpec(0.0))


def test_zero_coupling_is_bare_potential(pot1):
    b = energy(_upper(0, 1.0), KineticBalance(0.0), pot1)
    assert b.eps_shift == pytest.approx(-1.0, rel=1e-15)
    assert b.norm_l == 0.0 and b.cross == 0.0


def test_kb_quotient_equals_2x2(pot1, c):
    H = np.array([[c * c - 1, c], [c, -c * c - 1]])
    u = _upper(0, 1.0)
    for lam in [1e-4, 3.6e-3, 0.05, -0.2]:
        b = energy(u, KineticBalance(lam), pot1)
        # zeta = 1: sigma.p u has unit norm, so lower = lam * (normalized sigma.p u)
        v = np.array([1.0, lam])
        ref = v @ H @ v / (v @ v)
        assert b.eps == pytest.approx(ref, rel=1e-12)


@given(st.floats(0.2, 4.0), st.floats(-0.5, 0.5), st.floats(0.0, 90.0), st.sampled_from(["kb", "same-radial"]),
       st.sampled_from([0.0, 1.0, 2.0]))
def test_breakdown_identity(z, lam, Z, fam, p):
    pot = PotentialSpec(Z)
    b = energy(_upper(p, z), family_spec(fam, lam), pot)
    assert b.identity_residual() <= 1e-12
    assert b.norm_u > 0 and b.norm_l >= 0


@given(st.floats(0.2, 4.0), st.floats(-0.1, 0.1), st.floats(0.0, 90.0), st.sampled_from(["kb", "same-radial"]))
def test_profile_matches_direct_energy(z, lam, Z, fam):
    pot = PotentialSpec(Z)
    u = _upper(1.0, z)
    prof = coupling_profile(u, family_spec(fam, 1.0), pot)
    assert prof.shifted(lam) == pytest.approx(energy(u, family_spec(fam, lam), pot).eps_shift,
                                             rel=1e-11, abs=1e-11)


@given(st.floats(0.2, 5.0), st.floats(0.0, 90.0), st.sampled_from(["kb", "same-radial"]),
       st.sampled_from([0.0, 1.0, 2.0]))
def test_stationary_values_are_2x2_eigenvalues(z, Z, fam, p):
    pot = PotentialSpec(Z)
    u = _upper(p, z)
    prof = coupling_profile(u, family_spec(fam, 1.0), pot)
    (lam_max, up), (lam_min, lo) = prof.stationary()
    a, d, b = prof._pencil()
    w = eigh(np.array([[a, b], [b, d]]), eigvals_only=True)
    assert up == pytest.approx(w[1], rel=1e-10, abs=1e-10)
    assert lo == pytest.approx(w[0], rel=1e-12)
    assert prof.shifted(lam_max) == pytest.approx(up, rel=1e-10, abs=1e-10)
    assert prof.lower_root_offset() == pytest.approx(lo + 2 * pot.mc2, rel=1e-6, abs=1e-9)
    # larger root is a maximum of eps(lam), smaller one a minimum
    grid = lam_max * np.linspace(0.5, 1.5, 41)
    assert max(prof.shifted(x) for x in grid) <= up + 1e-12 * max(1, abs(up))


def test_free_particle_optimized_energy():
    pot = PotentialSpec(0.0)
    c = pot.c
    u = _upper(0, 1.0)
    prof = coupling_profile(u, KineticBalance(1 / c), pot)
    (lam, shift), _ = prof.stationary()
    eps = pot.mc2 + shift
    assert eps**2 == pytest.approx(c**4 + c**2, rel=1e-14)


def test_curvature_signs(pot1, s1):
    prof = coupling_profile(s1, KineticBalance(1.0), pot1)
    (lmax, _), (lmin, _) = prof.stationary()
    assert coupling_curvature(s1, KineticBalance(1.0), pot1, lmax) < 0
    assert coupling_curvature(s1, KineticBalance(1.0), pot1, lmin) > 0
    assert coupling_curvature(s1, SameRadial(1.0), pot1, -lmax) < 0


def _analytic_second_derivative(prof, lam):
    # eps = N(lam)/D(lam) with quadratic N, D
    A = prof.pot_d - 2 * prof.mc2 * prof.norm_d
    B = 2 * prof.c * prof.cross_unit
    N = prof.pot_u + B * lam + A * lam * lam
    Np, Npp = B + 2 * A * lam, 2 * A
    D = prof.norm_u + prof.norm_d * lam * lam
    Dp, Dpp = 2 * prof.norm_d * lam, 2 * prof.norm_d
    return Npp / D - 2 * Np * Dp / D**2 - N * Dpp / D**2 + 2 * N * Dp**2 / D**3


@pytest.mark.parametrize("lam", [3.6486e-3, 1e-2, -0.5])
def test_curvature_matches_analytic(pot1, s1, lam):
    prof = coupling_profile(s1, KineticBalance(1.0), pot1)
    fd = coupling_curvature(s1, KineticBalance(1.0), pot1, lam)
    assert fd == pytest.approx(_analytic_second_derivative(prof, lam), rel=1e-6)


def test_curvature_noise_is_reported(pot1, s1, monkeypatch):
    # a flat quotient has zero curvature, which must not be reported as a sign
    from dirac_minmax import functional
    from dirac_minmax.functional import CouplingProfile

    mc2 = pot1.mc2
    flat = CouplingProfile(1.0, 1.0, -1.0, 2 * mc2 - 1.0, 0.0, pot1.c, mc2)
    monkeypatch.setattr(functional, "coupling_profile", lambda *a: flat)
    with pytest.raises(ConvergenceError):
        coupling_curvature(s1, KineticBalance(1.0), pot1, 0.01)


def test_curvature_at_inflection_is_truncation_sized(pot1, s1):
    from scipy.optimize import brentq

    prof = coupling_profile(s1, KineticBalance(1.0), pot1)
    (lmax, _), _ = prof.stationary()
    infl = brentq(lambda x: _analytic_second_derivative(prof, x), lmax, 1e3 * lmax, xtol=1e-20)
    peak = abs(_analytic_second_derivative(prof, lmax))
    assert abs(prof.second_difference(infl, 1e-5 * infl)[0]) < 1e-9 * peak


@given(st.floats(0.2, 5.0), st.floats(-0.3, 0.3), st.floats(0.0, 90.0))
def test_stencil_is_cancellation_free(z, lam, Z):
    pot = PotentialSpec(Z)
    prof = coupling_profile(_upper(1.0, z), KineticBalance(1.0), pot)
    val, noise = prof.second_difference(lam, 1e-5 * abs(lam) + 1e-8)
    ref = _analytic_second_derivative(prof, lam)
    assert abs(val - ref) <= 1e-6 * abs(ref) + 10 * noise


def test_scale_covariance_nonrelativistic():
    pot = PotentialSpec(1.0, Constants(c=137.035999084 * 100))
    s = 1.7
    u1, u2 = _upper(0, 1.0), _upper(0, s)
    p1 = coupling_profile(u1, KineticBalance(1.0), pot)
    p2 = coupling_profile(u2, KineticBalance(1.0), pot.with_charge(s))
    e1 = p1.stationary()[0][1]
    e2 = p2.stationary()[0][1]
    assert e2 == pytest.approx(s * s * e1, rel=1e-8)


def test_same_radial_equals_kb_for_1s(pot1, s1):
    a = coupling_profile(s1, KineticBalance(1.0), pot1).stationary()[0][1]
    b = coupling_profile(s1, SameRadial(1.0), pot1).stationary()[0][1]
    assert a == pytest.approx(b, rel=1e-14)


def test_unknown_family():
    with pytest.raises(DomainError):
        family_spec("bogus", 1.0)
    assert overlap(RadialFunction.slater(0, 1.0), RadialFunction.slater(0, 1.0)) == 0.25
