"""Energy expectation value of a constrained two-component trial spinor.

The lower component is generated from the upper one by a coupling rule.  Four
rules are supported; the first three are one-parameter families in which the
lower component is ``lam * direction`` for a fixed direction function, so the
energy as a function of ``lam`` is the Rayleigh quotient of a 2x2 pencil.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    Component,
    ConvergenceError,
    DomainError,
    PotentialSpec,
    SpinorTrial,
    gamma_kappa,
    sigma_p_apply,
)
from .integrals import overlap, potential_element


@dataclass(frozen=True)
class KineticBalance:
    """``l = lam * sigma.p u``."""

    lam: float


@dataclass(frozen=True)
class PaperKappa:
    """``l = zeta^-1 [(1 - g)/(1 + g)]^(1/2) sigma.p u`` with ``g = gamma_kappa(kappa_param)``.

    ``zeta`` defaults to the single exponent of the upper component.
    """

    kappa_param: float
    zeta: float | None = None


@dataclass(frozen=True)
class SameRadial:
    """Lower radial equals ``lam`` times the upper radial, channel ``-kappa_u``."""

    lam: float


@dataclass(frozen=True)
class Explicit:
    lower: Component


CouplingSpec = Union[KineticBalance, PaperKappa, SameRadial, Explicit]

FAMILIES = ("kb", "same-radial", "paper-kappa")


def family_spec(family: str, lam: float) -> CouplingSpec:
    """One-parameter coupling of the named family at scale ``lam``.

    For ``paper-kappa`` the scale is the effective prefactor of ``sigma.p u``.
    """
    if family == "kb":
        return KineticBalance(lam)
    if family == "same-radial":
        return SameRadial(lam)
    if family == "paper-kappa":
        return _PaperKappaScale(lam)
    raise DomainError(f"unknown coupling family {family!r}")


@dataclass(frozen=True)
class _PaperKappaScale:
    # paper-kappa family addressed by its effective scale instead of kappa
    lam: float


def _upper_zeta(u: Component, spec: PaperKappa) -> float:
    if spec.zeta is not None:
        return spec.zeta
    z = u.radial.single_zeta
    if z is None:
        raise DomainError("PaperKappa needs an explicit zeta for multi-exponent uppers")
    return z


def paper_kappa_scale(kappa_param: float, zeta: float, pot: PotentialSpec) -> float:
    """Prefactor ``zeta^-1 [(1-g)/(1+g)]^(1/2)``, evaluated as ``alpha Z / (zeta |k| (1+g))``."""
    g = gamma_kappa(kappa_param, pot)
    return abs(pot.alpha_z) / (zeta * abs(kappa_param) * (1.0 + g))


def paper_kappa_for_scale(lam: float, zeta: float, pot: PotentialSpec) -> float:
    """Inverse of :func:`paper_kappa_scale`; ``lam * zeta`` must lie in ``(0, 1)``."""
    s = lam * zeta
    if not 0 < s < 1:
        raise DomainError(f"scale {lam} unreachable by the kappa family at zeta={zeta}")
    if pot.Z == 0:
        raise DomainError("kappa family is degenerate for Z = 0")
    return abs(pot.alpha_z) * (1 + s * s) / (2 * s)


def coupling_direction(u: Component, spec, pot: PotentialSpec) -> tuple[Component, float]:
    """Split the lower component into ``scale * direction``."""
    if isinstance(spec, KineticBalance):
        return sigma_p_apply(u.radial, u.kappa), spec.lam
    if isinstance(spec, PaperKappa):
        zeta = _upper_zeta(u, spec)
        return sigma_p_apply(u.radial, u.kappa), paper_kappa_scale(spec.kappa_param, zeta, pot)
    if isinstance(spec, _PaperKappaScale):
        return sigma_p_apply(u.radial, u.kappa), spec.lam
    if isinstance(spec, SameRadial):
        return Component(u.radial, -u.kappa), spec.lam
    if isinstance(spec, Explicit):
        return spec.lower, 1.0
    raise DomainError(f"unsupported coupling {spec!r}")


def materialize_lower(u: Component, spec, pot: PotentialSpec) -> Component:
    direction, scale = coupling_direction(u, spec, pot)
    return direction.scaled(scale)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Pieces of the energy quotient.

    ``eps_shift`` is ``eps - mc^2`` computed without cancellation; prefer it
    whenever differences of order 1e-12 hartree matter.
    """

    eps: float
    eps_shift: float
    norm_u: float
    norm_l: float
    pot_u: float
    pot_l: float
    cross: float
    mc2: float

    def identity_residual(self) -> float:
        """Relative residual of ``eps (nu + nl) = mc^2 (nu - nl) + pot_u + pot_l + cross``."""
        lhs = self.eps * (self.norm_u + self.norm_l)
        rhs = self.mc2 * (self.norm_u - self.norm_l) + self.pot_u + self.pot_l + self.cross
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)

    @property
    def mean_potential(self) -> float:
        return (self.pot_u + self.pot_l) / (self.norm_u + self.norm_l)


def _cross(u: Component, lower: Component, pot: PotentialSpec) -> float:
    # sigma.p only connects kappa with -kappa
    if lower.kappa != -u.kappa or lower.radial.is_zero:
        return 0.0
    g = sigma_p_apply(u.radial, u.kappa)
    return 2.0 * pot.c * overlap(g.radial, lower.radial)


def trial_energy(t: SpinorTrial, pot: PotentialSpec) -> EnergyBreakdown:
    """Energy quotient of an explicit spinor ``(u, l)``."""
    u, lo = t.upper, t.lower
    nu = overlap(u.radial, u.radial)
    nl = overlap(lo.radial, lo.radial)
    vu = potential_element(u.radial, u.radial, pot)
    vl = potential_element(lo.radial, lo.radial, pot) if not lo.radial.is_zero else 0.0
    cross = _cross(u, lo, pot)
    if nu + nl <= 0:
        raise DomainError("spinor has zero norm")
    shift = (-2.0 * pot.mc2 * nl + vu + vl + cross) / (nu + nl)
    return EnergyBreakdown(pot.mc2 + shift, shift, nu, nl, vu, vl, cross, pot.mc2)


def energy(u: Component, spec, pot: PotentialSpec) -> EnergyBreakdown:
    lower = materialize_lower(u, spec, pot)
    return trial_energy(SpinorTrial(u, lower, coupling=spec), pot)


@dataclass(frozen=True)
class CouplingProfile:
    """Energy along ``l = lam * direction`` for a fixed upper component.

    All matrix elements are computed once; evaluating the quotient is then
    scalar arithmetic.
    """

    norm_u: float
    norm_d: float
    pot_u: float
    pot_d: float
    cross_unit: float  # (sigma.p u, d)
    c: float
    mc2: float

    def shifted(self, lam: float) -> float:
        """``eps(lam) - mc^2``."""
        num = self.pot_u + lam * lam * (self.pot_d - 2.0 * self.mc2 * self.norm_d)
        num += 2.0 * self.c * lam * self.cross_unit
        return num / (self.norm_u + lam * lam * self.norm_d)

    def energy(self, lam: float) -> float:
        return self.mc2 + self.shifted(lam)

    def _pencil(self) -> tuple[float, float, float]:
        a = self.pot_u / self.norm_u
        d = self.pot_d / self.norm_d - 2.0 * self.mc2
        b = self.c * self.cross_unit / math.sqrt(self.norm_u * self.norm_d)
        return a, d, b

    def stationary(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """``((lam_max, shift_max), (lam_min, shift_min))`` from the 2x2 pencil.

        Computed without subtracting nearly equal numbers: the upper root is
        ``a + b^2 / (h + sqrt(h^2 + b^2))`` with ``h = (a - d)/2``.
        """
        a, d, b = self._pencil()
        h = 0.5 * (a - d)
        root = math.hypot(h, b)
        ratio = math.sqrt(self.norm_u / self.norm_d)
        if b == 0.0:
            return (0.0, a), (math.inf, d)
        up = a + b * b / (h + root)
        lo = d - b * b / (h + root)
        t_up = b / (h + root)
        t_lo = -(h + root) / b
        return (t_up * ratio, up), (t_lo * ratio, lo)

    def lower_root_offset(self) -> float:
        """``eps_min + mc^2`` of the lower pencil root, without forming ``-2 mc^2``."""
        a, d, b = self._pencil()
        h = 0.5 * (a - d)
        if b == 0.0:
            return self.pot_d / self.norm_d
        return self.pot_d / self.norm_d - b * b / (h + math.hypot(h, b))

    def second_difference(self, lam: float, h: float) -> tuple[float, float]:
        """``(f(lam+h) - 2 f(lam) + f(lam-h)) / h^2`` and its roundoff scale.

        ``f = N/D`` with quadratic ``N`` and ``D``; the increments
        ``f(lam +- h) - f(lam)`` are expanded in ``h`` before dividing, so no
        two nearly equal energies are ever subtracted.
        """
        n0, n1 = self.pot_u, 2.0 * self.c * self.cross_unit
        n2 = self.pot_d - 2.0 * self.mc2 * self.norm_d
        d0, d2 = self.norm_u, self.norm_d
        N = n0 + lam * (n1 + lam * n2)
        D = d0 + d2 * lam * lam
        Np, Dp = n1 + 2.0 * n2 * lam, 2.0 * d2 * lam
        Dplus, Dminus = d0 + d2 * (lam + h) ** 2, d0 + d2 * (lam - h) ** 2
        slope = Np * D - N * Dp
        bend = n2 * D - N * d2
        t1 = slope * (-4.0 * d2 * lam) / (Dplus * Dminus)
        t2 = bend * (1.0 / Dplus + 1.0 / Dminus)
        value = (t1 + t2) / D
        scale = (abs(Np * D) + abs(N * Dp)) * abs(4.0 * d2 * lam) / (Dplus * Dminus)
        scale += (abs(n2 * D) + abs(N * d2)) * (1.0 / Dplus + 1.0 / Dminus)
        return value, 8.0 * np.finfo(float).eps * scale / D


def coupling_profile(u: Component, spec, pot: PotentialSpec) -> CouplingProfile:
    direction, _ = coupling_direction(u, spec, pot)
    d = direction.radial
    return CouplingProfile(
        norm_u=overlap(u.radial, u.radial),
        norm_d=overlap(d, d),
        pot_u=potential_element(u.radial, u.radial, pot),
        pot_d=potential_element(d, d, pot),
        cross_unit=_cross(u, direction, pot) / (2.0 * pot.c),
        c=pot.c,
        mc2=pot.mc2,
    )


def fd_step(lam: float) -> float:
    return max(1e-5 * abs(lam), 1e-8)


def coupling_curvature(u: Component, spec, pot: PotentialSpec, at_lambda: float) -> float:
    """``d^2 eps / d lam^2`` at ``at_lambda`` from the central three-point stencil.

    ``lam`` is the prefactor of the family's direction (for the kappa family,
    the effective prefactor of ``sigma.p u``).  Raises ``ConvergenceError``
    when the estimate is not clearly above its roundoff scale.
    """
    prof = coupling_profile(u, spec, pot)
    curv, noise = prof.second_difference(at_lambda, fd_step(at_lambda))
    if not abs(curv) > 10 * noise:
        raise ConvergenceError(
            f"finite-difference curvature {curv:.3e} is within roundoff noise {noise:.3e}"
        )
    return float(curv)
