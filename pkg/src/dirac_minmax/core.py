"""Constants, Slater-type radial algebra and the radial sigma.p reduction.

Everything here is an immutable value.  A radial function is a finite sum of
generalized Slater terms ``coeff * r**power * exp(-zeta * r)``; angular
structure enters only through the relativistic quantum number ``kappa`` of
the spinor block that carries the radial function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

C_CODATA = 137.035999084

# r**2 * (r**p)**2 must be integrable at the origin
MIN_POWER = -1.5


class DiracError(Exception):
    """Base class for all library errors."""


class DomainError(DiracError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class BranchError(DomainError):
    """Energy on the wrong side of the positive/negative branch boundary."""


class ConvergenceError(DiracError, RuntimeError):
    """A numerical procedure did not reach its tolerance."""


class BasisError(ConvergenceError):
    """Overlap matrix is not safely positive definite."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


@dataclass(frozen=True)
class Constants:
    """Atomic units: hbar = m = e = 1 and ``c = 1/alpha``."""

    c: float = C_CODATA
    m: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"speed of light must be positive, got {self.c}")
        if self.m != 1.0:
            raise DomainError("atomic units fix m = 1")

    @property
    def alpha(self) -> float:
        return 1.0 / self.c

    @property
    def mc2(self) -> float:
        return self.m * self.c**2

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "c": self.c, "m": self.m}


DEFAULT_CONSTANTS = Constants()


@dataclass(frozen=True)
class PotentialSpec:
    """Point nucleus of charge ``Z``: potential energy ``-Z/r``.

    A negative ``Z`` (repulsive field) is accepted so that charge-conjugate
    problems can be posed; ``|alpha Z| < 1`` is always required.
    """

    Z: float
    const: Constants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if not math.isfinite(self.Z):
            raise DomainError("Z must be finite")
        if abs(self.const.alpha * self.Z) >= 1.0:
            raise DomainError(f"alpha*Z >= 1 (Z={self.Z}, c={self.const.c})")

    @property
    def c(self) -> float:
        return self.const.c

    @property
    def mc2(self) -> float:
        return self.const.mc2

    @property
    def alpha_z(self) -> float:
        return self.const.alpha * self.Z

    def with_charge(self, Z: float) -> "PotentialSpec":
        return PotentialSpec(Z, self.const)

    def exact_1s_shifted(self) -> float:
        """Exact ground level ``E_1s - mc^2`` for ``kappa = -1``.

        Written as ``-Z^2 / (1 + gamma)`` to avoid cancellation against ``mc^2``.
        """
        # mc^2 (alpha Z)^2 = Z^2 hartree for any c
        return -self.Z**2 / (1.0 + gamma_kappa(-1, self))

    def exact_1s(self) -> float:
        """``E_1s = mc^2 sqrt(1 - (alpha Z)^2)``."""
        return self.mc2 + self.exact_1s_shifted()


def _check_kappa(kappa: int) -> int:
    if int(kappa) != kappa or kappa == 0:
        raise DomainError(f"kappa must be a nonzero integer, got {kappa}")
    return int(kappa)


def orbital_l(kappa: int) -> int:
    """Nonrelativistic orbital angular momentum of channel ``kappa``."""
    kappa = _check_kappa(kappa)
    return kappa if kappa > 0 else -kappa - 1


def gamma_kappa(kappa: float, pot: PotentialSpec) -> float:
    """``sqrt(kappa^2 - (alpha Z)^2) / |kappa|``, the reduced power at the origin.

    ``kappa`` may be any nonzero real (the coupling-operator family varies it
    continuously).
    """
    if kappa == 0:
        raise DomainError("kappa must be nonzero")
    az = abs(pot.alpha_z)
    if az >= abs(kappa):
        raise DomainError(f"alpha*Z={az} >= |kappa|={abs(kappa)}")
    return math.sqrt((abs(kappa) - az) * (abs(kappa) + az)) / abs(kappa)


@dataclass(frozen=True)
class RadialTerm:
    coeff: float
    power: float
    zeta: float

    def __post_init__(self):
        if not self.zeta > 0:
            raise DomainError(f"zeta must be positive, got {self.zeta}")
        if not self.power > MIN_POWER:
            raise DomainError(
                f"power {self.power} <= {MIN_POWER}: r^2 f^2 not integrable at 0"
            )


@dataclass(frozen=True)
class RadialFunction:
    terms: tuple[RadialTerm, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise DomainError("radial function needs at least one term")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def slater(cls, power: float, zeta: float, coeff: float = 1.0) -> "RadialFunction":
        return cls((RadialTerm(coeff, power, zeta),))

    @classmethod
    def normalized_slater(cls, power: float, zeta: float) -> "RadialFunction":
        """``N r^power e^(-zeta r)`` with unit radial norm."""
        a = 2 * power + 2
        log_norm2 = (a + 1) * math.log(2 * zeta) - math.lgamma(a + 1)
        return cls.slater(power, zeta, math.exp(0.5 * log_norm2))

    @classmethod
    def from_terms(cls, triples: Iterable[tuple[float, float, float]]) -> "RadialFunction":
        return cls(tuple(RadialTerm(*t) for t in triples))

    def __mul__(self, s: float) -> "RadialFunction":
        return RadialFunction(tuple(RadialTerm(t.coeff * s, t.power, t.zeta) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> "RadialFunction":
        return self * -1.0

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return RadialFunction(self.terms + other.terms).simplified()

    def simplified(self) -> "RadialFunction":
        """Merge terms sharing ``(power, zeta)``; order of first appearance kept."""
        merged: dict[tuple[float, float], float] = {}
        for t in self.terms:
            key = (t.power, t.zeta)
            merged[key] = merged.get(key, 0.0) + t.coeff
        kept = [RadialTerm(cf, p, z) for (p, z), cf in merged.items() if cf != 0.0]
        if not kept:
            first = self.terms[0]
            kept = [RadialTerm(0.0, first.power, first.zeta)]
        return RadialFunction(tuple(kept))

    def scaled_exponents(self, factor: float) -> "RadialFunction":
        return RadialFunction(
            tuple(RadialTerm(t.coeff, t.power, t.zeta * factor) for t in self.terms)
        )

    @property
    def is_zero(self) -> bool:
        return all(t.coeff == 0.0 for t in self.terms)

    @property
    def min_power(self) -> float:
        return min(t.power for t in self.terms if t.coeff != 0.0) if not self.is_zero else 0.0

    @property
    def single_zeta(self) -> float | None:
        zetas = {t.zeta for t in self.terms}
        return zetas.pop() if len(zetas) == 1 else None

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for t in self.terms:
            out = out + t.coeff * r**t.power * np.exp(-t.zeta * r)
        return out

    def derivative(self) -> "RadialFunction":
        triples = []
        for t in self.terms:
            if t.power != 0.0:
                triples.append((t.coeff * t.power, t.power - 1.0, t.zeta))
            triples.append((-t.coeff * t.zeta, t.power, t.zeta))
        return RadialFunction.from_terms(triples).simplified()


@dataclass(frozen=True)
class Component:
    """A radial function living in the angular channel ``kappa``."""

    radial: RadialFunction
    kappa: int

    def __post_init__(self):
        object.__setattr__(self, "kappa", _check_kappa(self.kappa))

    def scaled(self, s: float) -> "Component":
        return Component(self.radial * s, self.kappa)


def sigma_p_apply(f: RadialFunction, kappa_u: int) -> Component:
    """Radial image of ``sigma.p`` (without the factor ``-i``).

    ``g = f' + (1 + kappa_u) f / r`` in channel ``-kappa_u``.  With this
    convention ``||g||^2 = <p^2>_f`` and the adjoint is ``-(sigma.p)`` taken
    in the opposite channel, so ``c (sigma.p u, l)`` is the Hermitian
    upper/lower coupling.
    """
    kappa_u = _check_kappa(kappa_u)
    triples = []
    for t in f.terms:
        lead = t.coeff * (t.power + 1.0 + kappa_u)
        if lead != 0.0:
            triples.append((lead, t.power - 1.0, t.zeta))
        triples.append((-t.coeff * t.zeta, t.power, t.zeta))
    return Component(RadialFunction.from_terms(triples).simplified(), -kappa_u)


@dataclass(frozen=True)
class SpinorTrial:
    upper: Component
    lower: Component
    coupling: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.upper.radial.is_zero and self.lower.radial.is_zero:
            raise DomainError("spinor trial has zero norm")


def charge_conjugate(t: SpinorTrial) -> SpinorTrial:
    """Radial form of ``psi_C = i gamma_y psi*``.

    The radial functions trade places and both block channels flip sign.  In
    the ``sigma_p_apply`` phase convention no extra sign is needed: the image
    is a stationary state of the problem with ``-Z`` at energy ``-eps``.
    """
    return SpinorTrial(
        upper=Component(t.lower.radial, -t.upper.kappa),
        lower=Component(t.upper.radial, -t.lower.kappa),
        coupling=t.coupling,
    )
