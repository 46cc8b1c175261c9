"""Finite-basis Dirac matrices: blocks, diagonalization, partitioned min-max, NEPP."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cholesky, eigh, solve

from .core import (
    BasisError,
    Component,
    ConvergenceError,
    DomainError,
    PotentialSpec,
    RadialFunction,
    sigma_p_apply,
)
from .integrals import overlap, potential_element

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class BasisSet:
    uppers: tuple[Component, ...]
    lowers: tuple[Component, ...]

    def __post_init__(self):
        uppers, lowers = tuple(self.uppers), tuple(self.lowers)
        if not uppers:
            raise DomainError("basis needs at least one upper function")
        for block in (uppers, lowers):
            if len({f.kappa for f in block}) > 1:
                raise DomainError("all functions of a block must share kappa")
        object.__setattr__(self, "uppers", uppers)
        object.__setattr__(self, "lowers", lowers)

    @property
    def size(self) -> int:
        return len(self.uppers) + len(self.lowers)


def even_tempered_uppers(zeta0: float, ratio: float, count: int, power: float = 0.0,
                         kappa: int = -1) -> list[Component]:
    """Normalized ``r^power e^(-zeta r)`` with ``zeta = zeta0 * ratio^k``."""
    if count < 1 or zeta0 <= 0 or ratio <= 0:
        raise DomainError("even-tempered set needs count >= 1 and positive zeta0, ratio")
    return [
        Component(RadialFunction.normalized_slater(power, zeta0 * ratio**k), kappa)
        for k in range(count)
    ]


def _normalized(f: RadialFunction) -> RadialFunction:
    n = overlap(f, f)
    if not n > 0:
        raise DomainError("cannot normalize a zero function")
    return f * (1.0 / math.sqrt(n))


def kinetic_balance_basis(uppers: Sequence[Component], detune: float = 1.0) -> BasisSet:
    """Lowers are the normalized ``sigma.p`` images of the uppers.

    ``detune != 1`` multiplies every exponent of each balanced lower by that
    factor, breaking the balance (used to exhibit variational collapse).
    """
    lowers = []
    for u in uppers:
        g = sigma_p_apply(u.radial, u.kappa)
        radial = g.radial if detune == 1.0 else g.radial.scaled_exponents(detune)
        lowers.append(Component(_normalized(radial), g.kappa))
    return BasisSet(tuple(uppers), tuple(lowers))


def same_radial_basis(uppers: Sequence[Component]) -> BasisSet:
    """Lowers reuse the upper radials in channel ``-kappa``."""
    return BasisSet(tuple(uppers), tuple(Component(u.radial, -u.kappa) for u in uppers))


def conjugate_basis(basis: BasisSet) -> BasisSet:
    """Image of the basis under charge conjugation: blocks trade places."""
    return BasisSet(basis.lowers, basis.uppers)


@dataclass(frozen=True)
class MatrixBlocks:
    """Blocks of ``H`` and ``S``; ``mc2`` kept so shifted forms can be built exactly."""

    Huu: np.ndarray
    Hul: np.ndarray
    Hll: np.ndarray
    Suu: np.ndarray
    Sll: np.ndarray
    mc2: float
    Vuu: np.ndarray = field(repr=False, default=None)
    Vll: np.ndarray = field(repr=False, default=None)

    @property
    def n_upper(self) -> int:
        return self.Huu.shape[0]

    @property
    def n_lower(self) -> int:
        return self.Hll.shape[0]

    def full(self, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """``(H - shift*S, S)`` assembled; shifts of +-mc^2 are formed from the
        potential blocks directly to avoid cancellation."""
        nu, nl = self.n_upper, self.n_lower
        S = np.zeros((nu + nl, nu + nl))
        S[:nu, :nu] = self.Suu
        S[nu:, nu:] = self.Sll
        H = np.zeros_like(S)
        if shift == self.mc2 and self.Vuu is not None:
            H[:nu, :nu] = self.Vuu
            H[nu:, nu:] = self.Vll - 2.0 * self.mc2 * self.Sll
        else:
            H[:nu, :nu] = self.Huu - shift * self.Suu
            H[nu:, nu:] = self.Hll - shift * self.Sll
        H[:nu, nu:] = self.Hul
        H[nu:, :nu] = self.Hul.T
        return H, S


def _check_overlap(S: np.ndarray, label: str) -> None:
    if S.size == 0:
        return
    w = np.linalg.eigvalsh(S)
    cond = w[-1] / w[0] if w[0] > 0 else math.inf
    if not w[0] > 0 or cond > CONDITION_LIMIT:
        raise BasisError(
            f"{label} overlap is not safely positive definite (condition {cond:.3e})",
            {"block": label, "min_eigenvalue": float(w[0]), "max_eigenvalue": float(w[-1]),
             "condition": float(cond)},
        )
    cholesky(S)


def build_blocks(basis: BasisSet, pot: PotentialSpec) -> MatrixBlocks:
    """``Huu = mc^2 S + V``, ``Hll = -mc^2 S + V``, ``Hul_ij = c (sigma.p u_i, l_j)``."""
    ups, los = basis.uppers, basis.lowers
    nu, nl = len(ups), len(los)
    Suu = np.array([[overlap(a.radial, b.radial) for b in ups] for a in ups])
    Sll = np.array([[overlap(a.radial, b.radial) for b in los] for a in los]).reshape(nl, nl)
    Vuu = np.array([[potential_element(a.radial, b.radial, pot) for b in ups] for a in ups])
    Vll = np.array([[potential_element(a.radial, b.radial, pot) for b in los] for a in los]).reshape(nl, nl)
    Hul = np.zeros((nu, nl))
    for i, u in enumerate(ups):
        g = sigma_p_apply(u.radial, u.kappa)
        for j, lo in enumerate(los):
            if lo.kappa == g.kappa:
                Hul[i, j] = pot.c * overlap(g.radial, lo.radial)
    _check_overlap(Suu, "upper")
    _check_overlap(Sll, "lower")
    mc2 = pot.mc2
    return MatrixBlocks(mc2 * Suu + Vuu, Hul, -mc2 * Sll + Vll, Suu, Sll, mc2, Vuu, Vll)


@dataclass(frozen=True)
class SpectrumClassification:
    """Three-way split of a finite Dirac spectrum.

    Cut points are ``-mc^2 (1 - tol_gap)`` and ``mc^2``; the default
    ``tol_gap = 1`` puts the lower cut at zero.
    """

    negative_branch: tuple[float, ...]
    gap: tuple[float, ...]
    positive_branch: tuple[float, ...]
    tol_gap: float = 1.0

    @classmethod
    def classify(cls, eigenvalues: Sequence[float], mc2: float, tol_gap: float = 1.0):
        low_cut = -mc2 * (1.0 - tol_gap)
        neg = tuple(float(e) for e in eigenvalues if e < low_cut)
        gap = tuple(float(e) for e in eigenvalues if low_cut <= e < mc2)
        pos = tuple(float(e) for e in eigenvalues if e >= mc2)
        return cls(neg, gap, pos, tol_gap)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    classification: SpectrumClassification
    shifted: np.ndarray  # eigenvalues - mc^2, computed from the shifted pencil

    def __iter__(self):
        # allows ``w, v, cls = diagonalize(...)``
        return iter((self.eigenvalues, self.eigenvectors, self.classification))

    @property
    def gap_indices(self) -> np.ndarray:
        return np.array([i for i, e in enumerate(self.eigenvalues)
                         if e in self.classification.gap], dtype=int)

    def lowest_gap_shifted(self) -> float:
        idx = self.gap_indices
        if idx.size == 0:
            raise DomainError("no eigenvalue in the gap")
        return float(self.shifted[idx[0]])


def _generalized_eigh(H: np.ndarray, S: np.ndarray):
    w, v = eigh(H, S)
    res = np.linalg.norm(H @ v - (S @ v) * w, axis=0)
    scale = np.linalg.norm(H, 2)
    if np.any(res > 1e-10 * max(scale, 1.0)):
        raise ConvergenceError(f"eigen-residual {res.max():.3e} exceeds tolerance")
    return w, v


def diagonalize(blocks: MatrixBlocks, tol_gap: float = 1.0) -> Spectrum:
    """Generalized symmetric-definite eigenproblem of the full Dirac matrix.

    Solved on the pencil shifted by ``mc^2`` so near-``mc^2`` levels keep
    their absolute precision; eigenvalues are returned ascending.
    """
    H, S = blocks.full(shift=blocks.mc2)
    w, v = _generalized_eigh(H, S)
    eig = w + blocks.mc2
    return Spectrum(eig, v, SpectrumClassification.classify(eig, blocks.mc2, tol_gap), w)


@dataclass(frozen=True)
class PartitionedResult:
    eps: float
    shifted: float
    iterations: int
    trace: tuple[float, ...]


def _effective_root(blocks: MatrixBlocks, shift: float, root_index: int) -> float:
    """``root_index``-th eigenvalue (minus mc^2) of the energy-dependent upper problem."""
    mc2 = blocks.mc2
    Vuu = blocks.Vuu if blocks.Vuu is not None else blocks.Huu - mc2 * blocks.Suu
    Vll = blocks.Vll if blocks.Vll is not None else blocks.Hll + mc2 * blocks.Sll
    # (eps S - Hll) = shift*S + 2 mc^2 S - V
    M = shift * blocks.Sll + 2.0 * mc2 * blocks.Sll - Vll
    try:
        cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eps*Sll - Hll not positive definite at shift {shift}") from exc
    eff = Vuu + blocks.Hul @ solve(M, blocks.Hul.T, assume_a="pos")
    eff = 0.5 * (eff + eff.T)
    w = eigh(eff, blocks.Suu, eigvals_only=True)
    return float(w[root_index])


def partitioned_minmax(blocks: MatrixBlocks, root_index: int = 0, max_iter: int = 100,
                       tol: float = 1e-13) -> PartitionedResult:
    """Fixed point ``eps = lambda_k(eps)`` of the upper-space effective problem.

    For a fixed upper vector, eliminating the lower coefficients through
    ``(eps Sll - Hll)^-1`` is the maximization over the lower space; the
    fixed point is the ``root_index``-th positive-branch eigenvalue.  The
    iteration is a secant method on ``F(eps) = lambda_k(eps) - eps``.
    """
    if not 0 <= root_index < blocks.n_upper:
        raise DomainError("root_index out of range")
    Vuu = blocks.Vuu if blocks.Vuu is not None else blocks.Huu - blocks.mc2 * blocks.Suu
    x0 = float(eigh(Vuu, blocks.Suu, eigvals_only=True)[root_index])
    f0 = _effective_root(blocks, x0, root_index) - x0
    x1 = x0 + f0
    trace = [x0, x1]
    for it in range(1, max_iter + 1):
        f1 = _effective_root(blocks, x1, root_index) - x1
        if abs(f1) <= tol * max(1.0, abs(x1)) or f1 == f0:
            return PartitionedResult(blocks.mc2 + x1, x1, it, tuple(trace))
        x0, f0, x1 = x1, f1, x1 - f1 * (x1 - x0) / (f1 - f0)
        trace.append(x1)
    raise ConvergenceError(
        "partitioned min-max did not converge; iterates: " + ", ".join(f"{x:.12g}" for x in trace)
    )


def nepp_apply(blocks: MatrixBlocks, E_g: float, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """``(H + V - shift S, S)`` with ``V = sum_neg S|v>(E_g - eps)<v|S`` over negative-branch vectors.

    The eigenvectors are S-orthonormal and complete, so ``H - shift S`` equals
    ``S C diag(eps - shift) C^T S``; the projected matrix is assembled in that
    form with every negative-branch level replaced by ``E_g``.  This avoids
    adding ``V`` (of size ``2 mc^2``) to ``H`` and cancelling it again.  Pass
    ``shift = E_g`` to keep the mapped levels accurate to roundoff of the gap
    scale instead of ``mc^2``.
    """
    spec = diagonalize(blocks)
    _, S = blocks.full()
    neg = np.array([e in spec.classification.negative_branch for e in spec.eigenvalues])
    rel = shift - blocks.mc2
    levels = spec.shifted - rel
    levels[neg] = (E_g - blocks.mc2) - rel
    SC = S @ spec.eigenvectors
    H = (SC * levels) @ SC.T
    return 0.5 * (H + H.T), S


@dataclass(frozen=True)
class CollapseReport:
    balanced_gap_eigenvalue: float
    detuned_gap_eigenvalue: float
    exact: float
    detune: float
    balanced_margin: float  # balanced - exact (hartree)
    detuned_margin: float  # detuned - exact (hartree)
    violations: int  # 1 if the balanced basis went below exact by more than 1e-10

    @property
    def collapsed(self) -> bool:
        return self.detuned_margin < 0


def collapse_demo(uppers: Sequence[Component], pot: PotentialSpec, detune: float = 4.0) -> CollapseReport:
    """Lowest gap eigenvalue with balanced vs exponent-detuned lower functions."""
    exact = pot.exact_1s_shifted()
    bal = diagonalize(build_blocks(kinetic_balance_basis(uppers), pot)).lowest_gap_shifted()
    det = diagonalize(build_blocks(kinetic_balance_basis(uppers, detune), pot)).lowest_gap_shifted()
    return CollapseReport(
        balanced_gap_eigenvalue=pot.mc2 + bal,
        detuned_gap_eigenvalue=pot.mc2 + det,
        exact=pot.mc2 + exact,
        detune=detune,
        balanced_margin=bal - exact,
        detuned_margin=det - exact,
        violations=int(bal - exact < -1e-10),
    )


def conjugation_asymmetry(basis: BasisSet, pot: PotentialSpec) -> dict:
    """Largest ``|eps_k(Z) + eps_(N-1-k)(-Z)|`` over the spectrum.

    ``mirrored`` pairs the basis with its conjugate image (blocks swapped),
    which is an identity for any basis; ``same_basis`` reuses the basis for
    ``-Z`` and vanishes only when the basis is closed under conjugation.
    """
    w = diagonalize(build_blocks(basis, pot)).eigenvalues
    flipped = pot.with_charge(-pot.Z)
    w_conj = diagonalize(build_blocks(conjugate_basis(basis), flipped)).eigenvalues
    w_same = diagonalize(build_blocks(basis, flipped)).eigenvalues
    return {
        "mirrored": float(np.max(np.abs(w + w_conj[::-1]))),
        "same_basis": float(np.max(np.abs(w + w_same[::-1]))),
        "mc2": pot.mc2,
    }
