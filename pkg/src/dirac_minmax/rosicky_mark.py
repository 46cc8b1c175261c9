"""Stationary energy of a fixed upper component under the optimal coupling.

Positive branch: the optimal lower component is the local resolvent
``l = c (eps + mc^2 + Z/r)^-1 sigma.p u`` and the stationary energy is the
root of the scalar equation

    h(eps) = (eps - mc^2)(u,u) - (u,Vu) - c^2 (g, [eps + mc^2 - V]^-1 g) = 0,

with ``g = sigma.p u``.  ``h`` is strictly increasing for ``eps > -mc^2``.
Negative branch: the resolvent is singular there, so the lowest root of a
finite problem over ``{u}`` plus a growing lower space is used instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import eigh

from .core import (
    BasisError,
    BranchError,
    Component,
    ConvergenceError,
    DomainError,
    PotentialSpec,
    RadialFunction,
    sigma_p_apply,
)
from .integrals import (
    TIGHT_QUADRATURE,
    QuadratureConfig,
    overlap,
    potential_element,
    resolvent_weighted,
    squared_potential_element,
)

N_PROBES = 64
BISECTION_WIDTH = 1e-13  # in units of mc^2
SECANT_STEPS = 5


@dataclass(frozen=True)
class StationarySolution:
    """``offset`` is ``eps0 - mc^2`` on the positive branch, ``eps0 + mc^2`` on the negative."""

    eps0: float
    offset: float
    branch: str
    residual: float
    lower_norm_fraction: float
    mean_potential: float
    history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.branch not in ("positive", "negative"):
            raise DomainError(f"unknown branch {self.branch!r}")


def _rm_pieces(u: Component):
    nu = overlap(u.radial, u.radial)
    g = sigma_p_apply(u.radial, u.kappa)
    return nu, g


def rm_residual(u: Component, pot: PotentialSpec, shift: float, cfg=TIGHT_QUADRATURE) -> float:
    """``h`` at ``eps = mc^2 + shift``."""
    nu, g = _rm_pieces(u)
    vu = potential_element(u.radial, u.radial, pot)
    denom = shift + 2.0 * pot.mc2
    return shift * nu - vu - pot.c**2 * resolvent_weighted(g.radial, denom, pot.Z, 1, 0.0, cfg)


def stationary_positive(
    u: Component, pot: PotentialSpec, cfg: QuadratureConfig = TIGHT_QUADRATURE
) -> StationarySolution:
    """Positive-branch root of the stationarity equation for upper component ``u``."""
    if pot.Z < 0:
        raise BranchError("positive-branch resolvent requires an attractive potential")
    mc2, c2 = pot.mc2, pot.c**2
    nu, g = _rm_pieces(u)
    vu = potential_element(u.radial, u.radial, pot)

    def h(shift: float) -> float:
        denom = shift + 2.0 * mc2
        return shift * nu - vu - c2 * resolvent_weighted(g.radial, denom, pot.Z, 1, 0.0, cfg)

    # probes in eps + mc^2, logarithmic over (1e-9 mc^2, 5 mc^2)
    denoms = np.geomspace(1e-9 * mc2, 5.0 * mc2, N_PROBES)
    shifts = denoms - 2.0 * mc2
    values = []
    lo = hi = None
    for s in shifts:
        values.append(h(s))
        if len(values) > 1 and values[-2] < 0 <= values[-1]:
            lo, hi = shifts[len(values) - 2], s
            h_lo, h_hi = values[-2], values[-1]
            break
    if lo is None:
        raise ConvergenceError(
            "no sign change of the stationarity residual; scanned values: "
            + ", ".join(f"{v:.3e}" for v in values)
        )
    while hi - lo > BISECTION_WIDTH * mc2:
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if hm < 0:
            lo, h_lo = mid, hm
        else:
            hi, h_hi = mid, hm
    # secant polish from the bracket ends
    x0, f0, x1, f1 = lo, h_lo, hi, h_hi
    if abs(f0) < abs(f1):
        x0, f0, x1, f1 = x1, f1, x0, f0
    history = [abs(f1)]
    for _ in range(SECANT_STEPS):
        if f1 == f0 or f1 == 0.0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        f2 = h(x2)
        history.append(abs(f2))
        if abs(f2) >= abs(f1):
            break
        x0, f0, x1, f1 = x1, f1, x2, f2
    shift = x1
    denom = shift + 2.0 * mc2
    nl = c2 * resolvent_weighted(g.radial, denom, pot.Z, 2, 0.0, cfg)
    vl = -pot.Z * c2 * resolvent_weighted(g.radial, denom, pot.Z, 2, -1.0, cfg) if pot.Z else 0.0
    return StationarySolution(
        eps0=float(mc2 + shift),
        offset=float(shift),
        branch="positive",
        residual=float(f1),
        lower_norm_fraction=float(nl / (nu + nl)),
        mean_potential=float((vu + vl) / (nu + nl)),
        history=tuple(history),
    )


def optimal_lower(u: Component, pot: PotentialSpec, eps0: float, r_grid: Sequence[float]) -> np.ndarray:
    """Pointwise optimal lower radial ``c g r / ((eps0 + mc^2) r + Z)``."""
    denom = eps0 + pot.mc2
    if not denom > 0:
        raise BranchError(f"eps0 + mc^2 = {denom} <= 0: optimal lower defined on positive branch only")
    r = np.asarray(r_grid, dtype=float)
    g = sigma_p_apply(u.radial, u.kappa).radial
    return pot.c * g(r) * r / (denom * r + pot.Z)


class SeriesEnergy(NamedTuple):
    eps_plus: float
    eps_minus: float


def series_energy(u: Component, pot: PotentialSpec, order: int) -> SeriesEnergy:
    """Expansion of the two stationary roots in powers of ``1/c^2``.

    Order 0 is ``mc^2 + <p^2>/2 + <V>`` with ``u`` normalized.  From order 1
    on, expectation values are taken over ``u`` scaled so that the spinor
    ``(u, sigma.p u / 2c)`` has unit norm, which is the normalization under
    which the first correction is ``<sigma.p V sigma.p> / 4c^2``; order 2 adds
    ``<sigma.p V^2 sigma.p> / 8c^4``.  The negative root is reported at its
    leading order ``-mc^2 - <p^2>/2``.
    """
    if order not in (0, 1, 2):
        raise DomainError("order must be 0, 1 or 2")
    mc2, c2 = pot.mc2, pot.c**2
    nu, g = _rm_pieces(u)
    gg = overlap(g.radial, g.radial)
    vu = potential_element(u.radial, u.radial, pot)
    eps_minus = -mc2 - 0.5 * gg / nu
    if order == 0:
        return SeriesEnergy(mc2 + 0.5 * gg / nu + vu / nu, eps_minus)
    ntot = nu + gg / (4.0 * c2)
    plus = 0.5 * gg + vu + potential_element(g.radial, g.radial, pot) / (4.0 * c2)
    if order == 2:
        plus += squared_potential_element(g.radial, g.radial, pot) / (8.0 * c2 * c2)
    return SeriesEnergy(mc2 + plus / ntot, eps_minus)


def even_tempered_ladder(zeta_ref: float, count: int) -> list[float]:
    """``zeta_ref * [2, 1/2, 4, 1/4, ...]``; prefixes are nested."""
    out = []
    k = 1
    while len(out) < count:
        out.append(zeta_ref * 2.0**k)
        if len(out) < count:
            out.append(zeta_ref * 2.0**-k)
        k += 1
    return out


def _lower_space(u: Component, lower_dim: int) -> list[RadialFunction]:
    g = sigma_p_apply(u.radial, u.kappa).radial
    zetas = [t.zeta for t in u.radial.terms]
    zeta_ref = sum(zetas) / len(zetas)
    space = [g]
    for z in even_tempered_ladder(zeta_ref, lower_dim - 1):
        space.append(RadialFunction.normalized_slater(0.0, z))
    return space


def stationary_negative(u: Component, pot: PotentialSpec, lower_dim: int = 1) -> StationarySolution:
    """Lowest root over ``{u}`` plus a ``lower_dim``-dimensional lower space.

    The lower space is ``sigma.p u`` followed by nested even-tempered Slater
    functions in channel ``-kappa_u``.  The matrix is shifted by ``+mc^2`` so
    the returned offset ``eps0 + mc^2`` carries full precision.
    """
    if lower_dim < 1:
        raise DomainError("lower_dim must be >= 1")
    mc2, c = pot.mc2, pot.c
    space = _lower_space(u, lower_dim)
    g = space[0]
    n = 1 + lower_dim
    H = np.zeros((n, n))
    S = np.zeros((n, n))
    nu = overlap(u.radial, u.radial)
    vu = potential_element(u.radial, u.radial, pot)
    H[0, 0] = 2.0 * mc2 * nu + vu
    S[0, 0] = nu
    for j, lj in enumerate(space, start=1):
        H[0, j] = H[j, 0] = c * overlap(g, lj)
        for k, lk in enumerate(space[: j], start=1):
            S[j, k] = S[k, j] = overlap(lj, lk)
            H[j, k] = H[k, j] = potential_element(lj, lk, pot)
    s_eigs = np.linalg.eigvalsh(S)
    if s_eigs[0] <= 0 or s_eigs[-1] / s_eigs[0] > 1e12:
        raise BasisError("lower space is numerically linearly dependent",
                         {"overlap_eigenvalues": s_eigs.tolist()})
    w, v = eigh(H, S)
    off, vec = float(w[0]), v[:, 0]
    residual = float(np.linalg.norm(H @ vec - off * (S @ vec)))
    nl = float(vec[1:] @ S[1:, 1:] @ vec[1:])
    nuv = vec[0] ** 2 * nu
    vl = float(vec[1:] @ (H[1:, 1:]) @ vec[1:])
    return StationarySolution(
        eps0=off - mc2,
        offset=off,
        branch="negative",
        residual=residual,
        lower_norm_fraction=float(nl / (nuv + nl)),
        mean_potential=float((vec[0] ** 2 * vu + vl) / (nuv + nl)),
    )
