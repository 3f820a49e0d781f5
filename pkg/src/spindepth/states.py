"""Reference states and their collective moments."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import NotSymmetric, SizeLimitExceeded
from .records import ExtendedMeasurementRecord, MeasurementRecord
from .spin import SpinLength, build_spin_matrices, ground_state, squeezing_hamiltonian

MAX_GROUP_DIM = 4096


@dataclass(frozen=True)
class SymmetricStateMoments:
    """First and second moments of a permutation-symmetric N-particle state.

    ``second[a, b]`` is the symmetrised ``<(J_a J_b + J_b J_a)/2>``;
    ``single_sq[a]`` is the one-particle ``<j_a^2>``, needed to split
    ``<J_a^2>`` into local and pair parts.
    """

    N: int
    j: SpinLength
    mean: np.ndarray
    second: np.ndarray
    single_sq: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "j", SpinLength.of(self.j))
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "second", np.asarray(self.second, dtype=float))
        if self.single_sq is None and self.j.two_J == 1:
            object.__setattr__(self, "single_sq", np.full(3, 0.25))

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.second) - self.mean**2

    def pair_correlation(self, axis: int) -> float:
        """``<j_a^(n) j_a^(m)>`` for n != m."""
        if self.single_sq is None:
            raise NotSymmetric("single-particle second moments unknown")
        N = self.N
        if N < 2:
            return 0.0
        return float((self.second[axis, axis] - N * self.single_sq[axis]) / (N * (N - 1)))

    def to_record(self) -> ExtendedMeasurementRecord:
        var = self.variances
        return ExtendedMeasurementRecord(
            N=self.N, j=self.j, var_Jx=max(float(var[0]), 0.0),
            mean_Jx=float(self.mean[0]), mean_Jy=float(self.mean[1]), mean_Jz=float(self.mean[2]),
            second_moment_perp=float(self.second[1, 1] + self.second[2, 2]),
            var_Jy=max(float(var[1]), 0.0), var_Jz=max(float(var[2]), 0.0),
        )


def dicke_moments(N: int, j=SpinLength(1)) -> ExtendedMeasurementRecord:
    """Symmetric Dicke state with ``<J_x> = 0`` and ``(dJ_x)^2 = 0``."""
    j = SpinLength.of(j)
    Nj = N * j.J
    total = Nj * (Nj + 1)
    return ExtendedMeasurementRecord(
        N=N, j=j, var_Jx=0.0, mean_Jx=0.0, mean_Jy=0.0, mean_Jz=0.0,
        second_moment_perp=total, var_Jy=total / 2, var_Jz=total / 2,
    )


def noisy_dicke_moments(N: int, j, p: float) -> ExtendedMeasurementRecord:
    """Mixture ``(1-p)`` Dicke ``+ p`` fully mixed state."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    j = SpinLength.of(j)
    jj = j.J
    Nj = N * jj
    mixed_axis = N * jj * (jj + 1) / 3  # <J_a^2> in the fully mixed state
    perp = (1 - p) * Nj * (Nj + 1) + p * 2 * mixed_axis
    return ExtendedMeasurementRecord(
        N=N, j=j, var_Jx=p * mixed_axis, mean_Jx=0.0, mean_Jy=0.0, mean_Jz=0.0,
        second_moment_perp=perp, var_Jy=perp / 2, var_Jz=perp / 2,
    )


def coherent_state_moments(N: int, j, axis: str = "z") -> SymmetricStateMoments:
    """Product of spin-j coherent states all pointing along ``axis``."""
    j = SpinLength.of(j)
    a = "xyz".index(axis)
    jj = j.J
    mean = np.zeros(3)
    mean[a] = N * jj
    second = np.eye(3) * (N * jj / 2)
    second[a, a] = (N * jj) ** 2
    single = np.full(3, jj / 2)
    single[a] = jj * jj
    return SymmetricStateMoments(N, j, mean, second, single, label=f"coherent-{axis}")


def squeezed_state_moments(N: int, mu: float) -> SymmetricStateMoments:
    """Ground state of ``J_x^2 - mu J_z`` for N qubits in the symmetric subspace."""
    if N % 2:
        raise ValueError("N must be even")
    J = SpinLength(N)  # total spin N/2
    gs = ground_state(squeezing_hamiltonian(J, mu))
    S = build_spin_matrices(J, "x", sparse=True)
    v = gs.vector.astype(complex)
    ops = (S.Lx, S.Ly, S.Lz)
    applied = [A @ v for A in ops]
    mean = np.array([np.real(np.vdot(v, Av)) for Av in applied])
    second = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            second[a, b] = np.real(np.vdot(applied[a], applied[b]))
    second = 0.5 * (second + second.T)
    return SymmetricStateMoments(N, SpinLength(1), mean, second, label=f"squeezed mu={mu:g}")


def decohere_particles(s: SymmetricStateMoments, m: int) -> SymmetricStateMoments:
    """Replace ``m`` of the qubits by maximally mixed ones.

    Means scale as ``(N-m)/N``; pair correlations among the surviving
    ``N-m`` particles are unchanged, and the mixed particles add only their
    local ``1/4``.
    """
    if s.j.two_J != 1:
        raise NotSymmetric("decoherence model is defined for qubits")
    N = s.N
    if not 0 <= m <= N:
        raise ValueError("m must lie in [0, N]")
    n = N - m
    mean = s.mean * n / N
    second = s.second.copy()
    for a in range(3):
        c = s.pair_correlation(a)
        if abs(c) > 0.25 + 1e-12:
            raise NotSymmetric(f"pair correlation {c} outside [-1/4, 1/4]")
        second[a, a] = N / 4 + n * (n - 1) * c
    # off-diagonal second moments are pair sums too
    for a in range(3):
        for b in range(3):
            if a != b:
                second[a, b] = s.second[a, b] * (n * (n - 1)) / (N * (N - 1)) if N > 1 else 0.0
    return replace(s, mean=mean, second=second, label=f"{s.label} decohered {m}")


@lru_cache(maxsize=32)
def _group_operators(two_j: int, k: int):
    """Collective spin operators of k spin-j particles on the full product space."""
    S = build_spin_matrices(SpinLength(two_j), "z")
    d = S.dim
    ops = []
    for A in (S.Lx, S.Ly, S.Lz):
        tot = np.zeros((d**k, d**k), dtype=complex)
        for i in range(k):
            tot += np.kron(np.kron(np.eye(d**i), A), np.eye(d ** (k - i - 1)))
        ops.append(tot)
    return ops


def _group_moments(psi: np.ndarray, ops) -> tuple[np.ndarray, np.ndarray]:
    applied = [A @ psi for A in ops]
    mean = np.array([np.real(np.vdot(psi, Av)) for Av in applied])
    sq = np.array([np.real(np.vdot(Av, Av)) for Av in applied])
    return mean, sq


def _combine(group_stats) -> tuple[np.ndarray, np.ndarray]:
    """Collective mean and ``<J_a^2>`` of a product of groups."""
    means = np.array([m for m, _ in group_stats])
    sqs = np.array([q for _, q in group_stats])
    mean = means.sum(axis=0)
    # <J_a^2> = sum_g <J_a^g^2> + sum_{g != h} <J_a^g><J_a^h>
    sq = sqs.sum(axis=0) + mean**2 - (means**2).sum(axis=0)
    return mean, sq


def _record_from(N: int, j: SpinLength, mean: np.ndarray, sq: np.ndarray) -> ExtendedMeasurementRecord:
    var = np.maximum(sq - mean**2, 0.0)
    return ExtendedMeasurementRecord(
        N=N, j=j, var_Jx=float(var[0]), mean_Jx=float(mean[0]), mean_Jy=float(mean[1]),
        mean_Jz=float(mean[2]), second_moment_perp=float(sq[1] + sq[2]),
        var_Jy=float(var[1]), var_Jz=float(var[2]),
    )


def random_producible_moments(N: int, j, partition: Sequence[int], rng=None) -> ExtendedMeasurementRecord:
    """Moments of a random pure product of group states (Haar within groups).

    ``partition`` lists group sizes summing to N; a state built this way
    is ``max(partition)``-producible.
    """
    j = SpinLength.of(j)
    if sum(partition) != N or min(partition) < 1:
        raise ValueError("partition must be positive sizes summing to N")
    rng = np.random.default_rng(rng)
    stats = []
    for k in partition:
        dim = j.dim**k
        if dim > MAX_GROUP_DIM:
            raise SizeLimitExceeded(f"group of {k} spin-{j} particles has dimension {dim} > {MAX_GROUP_DIM}")
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        stats.append(_group_moments(psi, _group_operators(j.two_J, k)))
    return _record_from(N, j, *_combine(stats))


def extreme_producible_moments(N: int, j, k: int, lam: float, lam2: float = 0.0,
                               rotate: float = 0.0) -> ExtendedMeasurementRecord:
    """Product of ``N/k`` identical symmetric group states, each the ground
    state of ``L_x^2 - lam L_z - lam2 L_x`` for spin ``kj``.

    These states lie on the boundary of the k-producible set, so they probe
    the criteria where they are tight. ``rotate`` turns the group polarisation
    about the x axis.
    """
    j = SpinLength.of(j)
    if N % k:
        raise ValueError("k must divide N")
    J = j.times(k)
    gs = ground_state(squeezing_hamiltonian(J, lam, lam2))
    S = build_spin_matrices(J, "x", sparse=True)
    mean, sq = _group_moments(gs.vector.astype(complex), (S.Lx, S.Ly, S.Lz))
    # rotation about x mixes the y and z parts; <J_y^2 + J_z^2> is invariant
    c, s = np.cos(rotate), np.sin(rotate)
    my, mz = mean[1], mean[2]
    mean = np.array([mean[0], c * my - s * mz, s * my + c * mz])
    return _record_from(N, j, *_combine([(mean, sq)] * (N // k)))


@dataclass(frozen=True)
class TightnessReport:
    script_X: float
    script_X_bound: float
    bound_satisfied: bool
    second_moment_perp: float
    perp_lower: float
    perp_upper: float
    perp_in_range: bool


def tightness_diagnostics(s: SymmetricStateMoments, partition: Sequence[int] | None = None) -> TightnessReport:
    """Size of the term dropped from the second-moment bound, and where
    ``<J_y^2 + J_z^2>`` sits.

    ``script_X`` is the sum over groups of ``<(J_x^(g))^2>``; singletons by
    default. Ground states of ``J_x^2 - mu J_z`` keep it at or below the
    coherent-state value ``Nj/2`` and have ``<J_y^2 + J_z^2>`` between
    ``Nj(Nj+1/2)`` and ``Nj(Nj+1)``.
    """
    partition = [1] * s.N if partition is None else list(partition)
    if sum(partition) != s.N or min(partition) < 1:
        raise ValueError("partition must be positive sizes summing to N")
    if s.single_sq is None:
        raise NotSymmetric("single-particle second moments unknown")
    local = float(s.single_sq[0])
    pair = s.pair_correlation(0)
    script_X = float(sum(k * local + k * (k - 1) * pair for k in partition))
    Nj = s.N * s.j.J
    perp = float(s.second[1, 1] + s.second[2, 2])
    lo, hi = Nj * (Nj + 0.5), Nj * (Nj + 1)
    tol = 1e-9 * max(1.0, Nj * Nj)
    return TightnessReport(
        max(script_X, 0.0), Nj / 2, script_X <= Nj / 2 + tol,
        perp, lo, hi, lo - tol <= perp <= hi + tol,
    )
