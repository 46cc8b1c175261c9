"""Nested min-max optimization and the scans built on it.

Inner step: maximize the energy over the coupling scale for a fixed upper
component.  Outer step: minimize the inner maximum over the orbital exponent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    Component,
    ConvergenceError,
    DomainError,
    PotentialSpec,
    RadialFunction,
    SpinorTrial,
    gamma_kappa,
)
from .functional import (
    FAMILIES,
    CouplingProfile,
    coupling_profile,
    family_spec,
    materialize_lower,
    paper_kappa_for_scale,
)
from .integrals import radial_density
from .rosicky_mark import stationary_negative, stationary_positive

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
COUPLINGS = FAMILIES + ("resolvent",)


@dataclass(frozen=True)
class Scan1DConfig:
    lo: float
    hi: float
    points: int = 50
    optimizer_tol: float = 1e-10
    value_tol: float = 1e-12

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"scan needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < 3:
            raise DomainError("scan needs at least 3 points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class TrialFamily:
    """Upper components ``N r^p e^(-zeta r)`` in channel ``kappa``.

    ``sto``: ``p = n - 1``.  ``exact-power``: ``p = gamma - 1``, the power of
    the exact ground state, which depends on ``Z``.
    """

    kind: str = "sto"
    n: int = 1
    kappa: int = -1

    def __post_init__(self):
        if self.kind not in ("sto", "exact-power"):
            raise DomainError(f"unknown trial kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.kind == "exact-power" and self.n != 1:
            raise DomainError("exact-power trial is defined for n = 1 only")

    def power(self, pot: PotentialSpec) -> float:
        if self.kind == "sto":
            return float(self.n - 1)
        return gamma_kappa(self.kappa, pot) - 1.0

    def upper(self, zeta: float, pot: PotentialSpec) -> Component:
        if not zeta > 0:
            raise DomainError(f"zeta must be positive, got {zeta}")
        return Component(RadialFunction.normalized_slater(self.power(pot), zeta), self.kappa)

    def seed(self, pot: PotentialSpec) -> float:
        return self.n * abs(pot.Z) if pot.Z else 1.0


# ----------------------------------------------------------------------------
# scalar optimization


def expand_bracket(f: Callable[[float], float], x0: float, factor: float = 2.0,
                   bounds: tuple[float, float] = (-math.inf, math.inf),
                   max_steps: int = 80) -> tuple[float, float, float]:
    """Triple ``a < b < c`` with ``f(b) <= min(f(a), f(c))`` for minimization.

    Steps are multiplicative in ``|x|`` starting from ``x0 != 0``; a step that
    would leave the open interval ``bounds`` goes halfway to the bound instead.
    """
    if x0 == 0:
        raise DomainError("bracket seed must be nonzero")
    lo_b, hi_b = bounds

    def clip(x: float, toward: float) -> float:
        if lo_b < x < hi_b:
            return x
        edge = lo_b if x <= lo_b else hi_b
        return 0.5 * (toward + edge)

    a, b, c = sorted((x0 / factor, x0, x0 * factor))
    a, c = clip(a, b), clip(c, b)
    fa, fb, fc = f(a), f(b), f(c)
    for _ in range(max_steps):
        if fb <= fa and fb <= fc:
            return a, b, c
        if fa < fc:
            # downhill toward smaller x
            new = a / factor if a > 0 else a * factor
            new = clip(new, a)
            c, fc, b, fb = b, fb, a, fa
            a, fa = new, f(new)
        else:
            new = c * factor if c > 0 else c / factor
            new = clip(new, c)
            a, fa, b, fb = b, fb, c, fc
            c, fc = new, f(new)
    raise ConvergenceError(f"no interior optimum bracketed from seed {x0}")


def golden_section(f: Callable[[float], float], a: float, c: float,
                   tol: float = 1e-10, max_iter: int = 300) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, c]``; returns ``(x, f(x))``.

    Stops when the bracket is narrower than ``tol * max(1, |x|)``.  Ties keep
    the left segment, so plateaus resolve to the smallest parameter.
    """
    x1 = c - INV_GOLDEN * (c - a)
    x2 = a + INV_GOLDEN * (c - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if c - a <= tol * max(1.0, abs(x1)):
            break
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - INV_GOLDEN * (c - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_GOLDEN * (c - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _derivatives(f: Callable[[float], float], x: float, h: float) -> tuple[float, float]:
    """Five-point first derivative and three-point second derivative."""
    fm2, fm1, f0, fp1, fp2 = (f(x + k * h) for k in (-2, -1, 0, 1, 2))
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (fm1 - 2 * f0 + fp1) / (h * h)
    return d1, d2


# ----------------------------------------------------------------------------
# inner maximization


@dataclass(frozen=True)
class InnerResult:
    lambda_star: float | None
    eps_max: float
    eps_shift: float
    certified: bool
    kappa_param: float | None = None


def lambda_seed(prof: CouplingProfile) -> float:
    """Nonrelativistic estimate: the lower component ``sigma.p u / 2c`` projected on the direction."""
    return prof.cross_unit / (2.0 * prof.c * prof.norm_d)


def _family_bounds(family: str, u: Component) -> tuple[float, float]:
    if family == "paper-kappa":
        zeta = u.radial.single_zeta
        if zeta is None:
            raise DomainError("kappa family needs a single-exponent upper component")
        return 0.0, 1.0 / zeta
    return -math.inf, math.inf


def inner_maximize(u: Component, family: str, pot: PotentialSpec,
                   tol: float = 1e-10) -> InnerResult:
    """Maximum of the energy over the coupling family for fixed ``u``.

    ``resolvent`` uses the optimal local coupling directly (no scale
    parameter).  The one-parameter families are searched by bracket
    expansion from the nonrelativistic seed and golden section, then
    certified by comparing with ``lam* +- h``.
    """
    if family == "resolvent":
        sol = stationary_positive(u, pot)
        return InnerResult(None, sol.eps0, sol.offset, True)
    if family not in FAMILIES:
        raise DomainError(f"unknown coupling family {family!r}")
    prof = coupling_profile(u, family_spec(family, 1.0), pot)
    if prof.cross_unit == 0.0:
        raise DomainError("coupling direction is orthogonal to sigma.p u")
    neg = lambda lam: -prof.shifted(lam)  # noqa: E731
    bounds = _family_bounds(family, u)
    a, _, c = expand_bracket(neg, lambda_seed(prof) if family != "paper-kappa"
                             else min(lambda_seed(prof), 0.5 * bounds[1]), bounds=bounds)
    lam, val = golden_section(neg, a, c, tol)
    h = max(10 * tol, 1e-4 * abs(lam))
    certified = prof.shifted(lam - h) < -val and prof.shifted(lam + h) < -val
    shift = -val
    kappa = None
    if family == "paper-kappa" and pot.Z != 0:
        kappa = paper_kappa_for_scale(lam, u.radial.single_zeta, pot)
    return InnerResult(lam, pot.mc2 + shift, shift, certified, kappa)


def spurious_offset(u: Component, family: str, pot: PotentialSpec) -> tuple[float, float]:
    """Negative-branch minimum over the coupling scale: ``(lambda_min, eps + mc^2)``."""
    if family in ("resolvent", "paper-kappa"):
        family = "kb"
    prof = coupling_profile(u, family_spec(family, 1.0), pot)
    (_, _), (lam_min, _) = prof.stationary()
    return lam_min, prof.lower_root_offset()


# ----------------------------------------------------------------------------
# outer minimization


@dataclass(frozen=True)
class MinMaxResult:
    eps_minmax: float
    eps_shift: float
    zeta_star: float
    lambda_star: float | None
    trace: tuple[tuple[float, float | None, float], ...]
    trial: TrialFamily
    family: str
    certified: bool
    kappa_param: float | None = None

    def __post_init__(self):
        if self.trace and min(t[2] for t in self.trace) < self.eps_shift - 1e-9 * max(1.0, abs(self.eps_shift)):
            raise DomainError("eps_minmax must be the minimum over the trace")


def outer_objective(trial: TrialFamily, family: str, pot: PotentialSpec) -> Callable[[float], InnerResult]:
    def inner_at(zeta: float) -> InnerResult:
        return inner_maximize(trial.upper(zeta, pot), family, pot)

    return inner_at


def outer_minimize(trial: TrialFamily, family: str, pot: PotentialSpec,
                   zeta_range: Scan1DConfig | None = None, seed: float | None = None,
                   polish_steps: int = 4) -> MinMaxResult:
    """Minimize the inner maximum over ``zeta``.

    With ``zeta_range`` the grid is scanned first and the minimum must be
    interior; otherwise a bracket is grown from ``seed`` (default ``n Z``).
    The golden-section estimate is then refined by Newton steps on
    finite-difference derivatives, since value noise limits golden section
    to about ``1e-8`` relative accuracy in ``zeta``.
    """
    inner_at = outer_objective(trial, family, pot)
    cache: dict[float, InnerResult] = {}

    def shift_at(z: float) -> float:
        if z not in cache:
            cache[z] = inner_at(z)
        return cache[z].eps_shift

    trace: list[tuple[float, float | None, float]] = []
    if zeta_range is not None:
        grid = zeta_range.grid()
        values = [shift_at(z) for z in grid]
        trace.extend((float(z), cache[z].lambda_star, v) for z, v in zip(grid, values))
        i = int(np.argmin(values))
        if i == 0 or i == len(grid) - 1:
            raise ConvergenceError(
                f"outer minimum at range edge zeta={grid[i]} (non-interior)"
            )
        a, c = grid[i - 1], grid[i + 1]
        tol = zeta_range.optimizer_tol
    else:
        x0 = seed if seed is not None else trial.seed(pot)
        a, b, c = expand_bracket(shift_at, x0, bounds=(0.0, math.inf))
        trace.extend((z, cache[z].lambda_star, cache[z].eps_shift) for z in (a, b, c))
        tol = 1e-10
    zeta, val = golden_section(shift_at, a, c, tol)

    for _ in range(polish_steps):
        h = 1e-3 * zeta
        d1, d2 = _derivatives(shift_at, zeta, h)
        if not d2 > 0:
            break
        step = -d1 / d2
        if abs(step) > h or not a < zeta + step < c:
            break
        cand = zeta + step
        if shift_at(cand) > val + 1e-13 * max(1.0, abs(val)):
            break
        zeta, val = cand, shift_at(cand)
        if abs(step) < 1e-12 * zeta:
            break

    best = cache[zeta]
    trace.append((zeta, best.lambda_star, best.eps_shift))
    certified = a < zeta < c and best.certified
    return MinMaxResult(
        eps_minmax=best.eps_max,
        eps_shift=best.eps_shift,
        zeta_star=zeta,
        lambda_star=best.lambda_star,
        trace=tuple(trace),
        trial=trial,
        family=family,
        certified=certified,
        kappa_param=best.kappa_param,
    )


def virial_check(result: MinMaxResult, pot: PotentialSpec) -> float:
    """``d/ds eps`` under ``u(r) -> s^(3/2) u(s r)`` at ``s = 1``, i.e. ``zeta dE/dzeta``."""
    inner_at = outer_objective(result.trial, result.family, pot)
    zeta = result.zeta_star
    d1, _ = _derivatives(lambda z: inner_at(z).eps_shift, zeta, 1e-3 * zeta)
    return zeta * d1


# ----------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScanRecord:
    params: dict
    values: dict


def maxmin_spurious(trial: TrialFamily, family: str, pot: PotentialSpec,
                    zetas: Sequence[float]) -> tuple[tuple[float, float], list[ScanRecord]]:
    """Negative-branch minima per ``zeta``; returns ``((zeta, sup), records)``.

    Values are ``eps + mc^2``, all negative; their supremum approaches zero
    from below as ``zeta -> 0``.
    """
    records = []
    for z in zetas:
        lam, off = spurious_offset(trial.upper(float(z), pot), family, pot)
        records.append(ScanRecord({"zeta": float(z)}, {"eps_minus_plus_mc2": off, "lambda": lam}))
    k = int(np.argmax([r.values["eps_minus_plus_mc2"] for r in records]))
    return (records[k].params["zeta"], records[k].values["eps_minus_plus_mc2"]), records


def grid_local_maxima(values: Sequence[float]) -> list[int]:
    v = np.asarray(values)
    return [i for i in range(1, len(v) - 1) if v[i] > v[i - 1] and v[i] >= v[i + 1]]


def shower_scan(zetas: Sequence[float], lambdas: Sequence[float], trial: TrialFamily,
                family: str, pot: PotentialSpec) -> tuple[list[ScanRecord], list[ScanRecord]]:
    """Energy trajectories ``eps(lam)`` for each ``zeta`` plus each trajectory's maximum."""
    records, maxima = [], []
    for z in zetas:
        u = trial.upper(float(z), pot)
        prof = coupling_profile(u, family_spec(family, 1.0), pot)
        for lam in lambdas:
            records.append(ScanRecord({"zeta": float(z), "lambda": float(lam)},
                                      {"eps_minus_mc2": prof.shifted(float(lam))}))
        inner = inner_maximize(u, family, pot)
        maxima.append(ScanRecord({"zeta": float(z)},
                                 {"lambda_star": inner.lambda_star, "eps_max_minus_mc2": inner.eps_shift}))
    return records, maxima


def fig5_scan(zetas: Sequence[float], pot: PotentialSpec,
              trial: TrialFamily = TrialFamily()) -> list[ScanRecord]:
    """Both stationary branches and their mean potentials along ``zeta``."""
    out = []
    for z in zetas:
        u = trial.upper(float(z), pot)
        plus = stationary_positive(u, pot)
        minus = stationary_negative(u, pot, 1)
        out.append(ScanRecord({"zeta": float(z)}, {
            "eps_plus_minus_mc2": plus.offset,
            "eps_minus_plus_mc2": minus.offset,
            "pot_plus": plus.mean_potential,
            "pot_minus": minus.mean_potential,
        }))
    return out


@dataclass(frozen=True)
class DensityRecord:
    n: int
    zeta_star: float
    lambda_star: float
    eps: float
    eps_shift: float
    deviation: float
    density: np.ndarray = field(repr=False, compare=False)


def default_density_grid(Z: float, points: int = 200) -> np.ndarray:
    return np.linspace(0.02, 8.0, points) / max(abs(Z), 1e-12)


def dft_fallacy_scan(n_list: Sequence[int], pot: PotentialSpec,
                     r_grid: Sequence[float] | None = None) -> list[DensityRecord]:
    """Min-max with ``r^(n-1) e^(-zeta r)`` uppers and same-radial lowers, per ``n``.

    Every ``n`` reaches the same ground energy while the densities differ,
    so an energy match says nothing about the density.
    """
    r = default_density_grid(pot.Z) if r_grid is None else np.asarray(r_grid, dtype=float)
    exact = pot.exact_1s_shifted()
    out = []
    for n in n_list:
        trial = TrialFamily("sto", int(n))
        res = outer_minimize(trial, "same-radial", pot)
        u = trial.upper(res.zeta_star, pot)
        lower = materialize_lower(u, family_spec("same-radial", res.lambda_star), pot)
        dens = radial_density(SpinorTrial(u, lower), r)
        out.append(DensityRecord(int(n), res.zeta_star, res.lambda_star, res.eps_minmax,
                                 res.eps_shift, res.eps_shift - exact, dens))
    return out
