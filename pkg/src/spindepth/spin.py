"""Single spin-J operators and ground states of the squeezing Hamiltonian.

All Hamiltonians are assembled in the eigenbasis of ``L_x`` (ascending
``m_x = -J, ..., J``), where ``L_x^2 - lam*L_z - lam2*L_x`` is a real
symmetric tridiagonal matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import ConvergenceFailure, DimensionMismatch

Basis = Literal["x", "z"]

RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True, order=True)
class SpinLength:
    """Spin quantum number stored as ``2J`` so half-integers stay exact."""

    two_J: int

    def __post_init__(self):
        if int(self.two_J) != self.two_J or self.two_J < 1:
            raise ValueError(f"two_J must be a positive integer, got {self.two_J!r}")
        object.__setattr__(self, "two_J", int(self.two_J))

    @classmethod
    def of(cls, value) -> "SpinLength":
        """Build from ``J`` given as a number or a string like ``"3/2"``."""
        if isinstance(value, SpinLength):
            return value
        frac = Fraction(value)
        two = 2 * frac
        if two.denominator != 1:
            raise ValueError(f"{value!r} is not an integer or half-integer")
        return cls(int(two))

    @property
    def J(self) -> float:
        return self.two_J / 2

    @property
    def dim(self) -> int:
        return self.two_J + 1

    @property
    def is_integer(self) -> bool:
        return self.two_J % 2 == 0

    def times(self, k: int) -> "SpinLength":
        """Total spin of ``k`` such spins, ``k*j``."""
        return SpinLength(k * self.two_J)

    def __str__(self):
        return str(self.two_J // 2) if self.is_integer else f"{self.two_J}/2"


def ladder_coefficients(J: SpinLength) -> np.ndarray:
    """``sqrt(J(J+1) - m(m+1))`` for ``m = -J, ..., J-1``."""
    two_m = np.arange(-J.two_J, J.two_J, 2, dtype=float)
    # (J - m)(J + m + 1) with everything doubled to stay exact
    return np.sqrt((J.two_J - two_m) * (J.two_J + two_m + 2) / 4.0)


def m_values(J: SpinLength) -> np.ndarray:
    """Ascending magnetic quantum numbers ``-J, ..., J``."""
    return np.arange(-J.two_J, J.two_J + 1, 2, dtype=float) / 2.0


@dataclass(frozen=True)
class SpinMatrices:
    J: SpinLength
    Lx: np.ndarray
    Ly: np.ndarray
    Lz: np.ndarray
    basis: Basis

    @property
    def dim(self) -> int:
        return self.J.dim


def build_spin_matrices(J: SpinLength, basis: Basis = "x", sparse: bool = False) -> SpinMatrices:
    """Spin components for a single spin ``J``.

    In the ``"z"`` basis the states are ordered ``m_z = J, ..., -J``. In the
    ``"x"`` basis they are ordered ``m_x = -J, ..., J``; ``L_x`` is diagonal
    and ``L_z`` real with positive first off-diagonals.
    """
    J = SpinLength.of(J)
    c = ladder_coefficients(J)
    m = m_values(J)
    if basis == "z":
        # descending m: raising operator sits above the diagonal
        jp = sp.diags(c[::-1], 1, format="csr")
        jm = jp.T.tocsr()
        Lx = 0.5 * (jp + jm)
        Ly = -0.5j * (jp - jm)
        Lz = sp.diags(m[::-1], 0, format="csr")
    elif basis == "x":
        # (x, y, z) -> (z_std, -y_std, x_std) keeps [Lx, Ly] = i Lz
        jp = sp.diags(c, -1, format="csr")
        jm = jp.T.tocsr()
        Lx = sp.diags(m, 0, format="csr")
        Ly = 0.5j * (jp - jm)
        Lz = 0.5 * (jp + jm)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    Lx = Lx.astype(complex)
    Ly = Ly.astype(complex)
    Lz = Lz.astype(complex)
    if not sparse:
        Lx, Ly, Lz = Lx.toarray(), Ly.toarray(), Lz.toarray()
    return SpinMatrices(J, Lx, Ly, Lz, basis)


@dataclass(frozen=True)
class TridiagonalSym:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        if len(self.offdiag) != len(self.diag) - 1:
            raise DimensionMismatch("offdiag must have length len(diag) - 1")

    @property
    def dim(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm (max absolute row sum)."""
        rows = np.abs(self.diag).copy()
        off = np.abs(self.offdiag)
        rows[:-1] += off
        rows[1:] += off
        return float(rows.max())


@dataclass(frozen=True)
class SqueezingHamiltonian(TridiagonalSym):
    J: SpinLength = field(default=None)
    lam: float = 0.0
    lam2: float = 0.0


def squeezing_hamiltonian(J: SpinLength, lam: float, lam2: float = 0.0) -> SqueezingHamiltonian:
    """``L_x^2 - lam*L_z - lam2*L_x`` in the ``L_x`` eigenbasis."""
    J = SpinLength.of(J)
    m = m_values(J)
    return SqueezingHamiltonian(
        diag=m * m - lam2 * m,
        offdiag=-lam * 0.5 * ladder_coefficients(J),
        J=J,
        lam=float(lam),
        lam2=float(lam2),
    )


@dataclass(frozen=True)
class GroundState:
    energy: float
    vector: np.ndarray
    lam: float = math.nan
    lam2: float = math.nan
    degenerate: bool = False
    residual: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.vector)


def _inverse_iteration(H: TridiagonalSym, v: np.ndarray, shift: float, steps: int) -> np.ndarray:
    n = H.dim
    ab = np.zeros((3, n))
    ab[0, 1:] = H.offdiag
    ab[1] = H.diag - shift
    ab[2, :-1] = H.offdiag
    for _ in range(steps):
        v = solve_banded((1, 1), ab, v)
        v /= np.linalg.norm(v)
    return v


def ground_state(H: TridiagonalSym, max_refine: int = 3) -> GroundState:
    """Smallest eigenpair of a symmetric tridiagonal matrix.

    A diagonal matrix (``lam == 0``) is handled exactly; ties in the ground
    level are flagged and broken toward the largest ``m_x`` (last index).
    Otherwise LAPACK bisection (``stebz``) plus inverse iteration (``stein``)
    is used. An unreduced tridiagonal matrix has a simple spectrum, so only
    the diagonal case can be degenerate.
    """
    n = H.dim
    if n < 2:
        raise DimensionMismatch("ground_state needs dimension >= 2")
    lam = getattr(H, "lam", math.nan)
    lam2 = getattr(H, "lam2", math.nan)
    scale = max(H.norm_bound(), 1.0)

    if not np.any(H.offdiag):
        emin = H.diag.min()
        ties = np.flatnonzero(H.diag <= emin + 1e-14 * scale)
        v = np.zeros(n)
        v[ties[-1]] = 1.0
        return GroundState(float(emin), v, lam, lam2, degenerate=len(ties) > 1)

    w, vec = eigh_tridiagonal(H.diag, H.offdiag, select="i", select_range=(0, 0))
    E = float(w[0])
    v = vec[:, 0]
    # fix the sign so the largest component is positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    res = float(np.linalg.norm(H.matvec(v) - E * v))
    tries = 0
    while res > RESIDUAL_RTOL * scale and tries < max_refine:
        v = _inverse_iteration(H, v, E - 1e-9 * scale, 2)
        E = float(v @ H.matvec(v))
        res = float(np.linalg.norm(H.matvec(v) - E * v))
        tries += 1
    if res > RESIDUAL_RTOL * scale:
        raise ConvergenceFailure(f"ground-state residual {res:.3e} exceeds {RESIDUAL_RTOL * scale:.3e}")
    return GroundState(E, v, lam, lam2, degenerate=False, residual=res)


@dataclass(frozen=True)
class SpinMoments:
    mean_Lx: float
    mean_Ly: float
    mean_Lz: float
    mean_Lx2: float
    var_Lx: float


def moments(state: GroundState | np.ndarray, S: SpinMatrices) -> SpinMoments:
    """Expectation values of the spin components in ``state``.

    The state vector must be written in the same basis as ``S``.
    """
    v = state.vector if isinstance(state, GroundState) else np.asarray(state)
    if len(v) != S.dim:
        raise DimensionMismatch(f"state has dimension {len(v)}, matrices {S.dim}")
    vc = np.conj(v)

    def ev(A):
        return float(np.real(vc @ (A @ v)))

    Lxv = S.Lx @ v
    mean_Lx = float(np.real(vc @ Lxv))
    mean_Lx2 = float(np.real(np.vdot(Lxv, Lxv)))
    return SpinMoments(mean_Lx, ev(S.Ly), ev(S.Lz), mean_Lx2, mean_Lx2 - mean_Lx**2)


def x_basis_moments(J: SpinLength, v: np.ndarray) -> tuple[float, float, float]:
    """``(<L_x>, <L_z>, <L_x^2>)`` for a real vector in the ``L_x`` eigenbasis.

    Exploits the tridiagonal structure; O(d) instead of a dense product.
    """
    m = m_values(J)
    p = v * v
    mean_Lx = float(p @ m)
    mean_Lx2 = float(p @ (m * m))
    mean_Lz = float(ladder_coefficients(J) @ (v[:-1] * v[1:]))
    return mean_Lx, mean_Lz, mean_Lx2
