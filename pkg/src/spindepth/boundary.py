"""Extreme spin-squeezing boundary curves F_J(X) and G_J(X) = F_J(sqrt X).

Curves are sampled from ground states of ``L_x^2 - lam*L_z`` (integer J) or
of ``L_x^2 - lam*L_z - lam2*L_x`` with ``lam2`` optimised (half-integer J).
Each sample carries the slope of the curve at that point, which is the
Lagrange multiplier ``lam``; :func:`evaluate` uses these supporting lines to
return a certified lower bound between samples.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Literal

import numpy as np
from filelock import FileLock
from scipy.optimize import brentq, minimize_scalar

from .errors import ConstraintInfeasible, ConvergenceFailure, NonIntegerSpin, OutOfRange, SpinMismatch
from .spin import SpinLength, ground_state, ladder_coefficients, m_values, squeezing_hamiltonian, x_basis_moments

log = logging.getLogger(__name__)

Kind = Literal["F", "G"]

CACHE_FORMAT = "spindepth-curve"
CACHE_VERSION = 1

# exact endpoint shared by every J: the only state with <L_z> = J is |m_z = J>
ENDPOINT_VALUE = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Sampling controls for a curve sweep."""

    lambda_min: float = 1e-3
    lambda_max_factor: float = 100.0  # lambda_max = factor * J
    n_seed: int = 120
    resolution: float = 0.005
    x_max: float = 0.99995  # target for X_F; G then reaches x_max**2
    max_points: int = 20000
    c_scan_points: int = 31  # half-integer: coarse scan of lam2/2 on [0, min(J, 3)]

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT_GRID = GridSpec()


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    J: SpinLength
    kind: Kind
    lam: np.ndarray
    X: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    provenance: str = "integer-J sweep"
    grid_hash: str = ""

    def __post_init__(self):
        for name in ("lam", "X", "value", "derivative"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.X) == 0:
            raise ValueError("empty curve")
        if np.any(np.diff(self.X) <= 0):
            raise ValueError("curve samples must be strictly increasing in X")
        if self.X[0] < 0 or self.X[-1] > 1:
            raise ValueError("curve X must lie in [0, 1]")

    def __len__(self):
        return len(self.X)

    @property
    def samples(self) -> list[dict]:
        return [
            {"lambda": float(a), "X": float(b), "value": float(c), "derivative": float(d)}
            for a, b, c, d in zip(self.lam, self.X, self.value, self.derivative)
        ]

    @cached_property
    def _hull(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lower convex hull of the samples plus the exact (1, 1/2) endpoint.

        Returns hull X, hull values and the sample indices kept (endpoint
        excluded). Samples dropped here would indicate non-convex numerics.
        """
        pts_x = np.append(self.X, 1.0) if self.X[-1] < 1.0 else self.X
        pts_v = np.append(self.value, ENDPOINT_VALUE) if self.X[-1] < 1.0 else self.value
        keep: list[int] = []
        for i in range(len(pts_x)):
            while len(keep) >= 2:
                a, b = keep[-2], keep[-1]
                cross = (pts_x[b] - pts_x[a]) * (pts_v[i] - pts_v[a]) - (pts_v[b] - pts_v[a]) * (pts_x[i] - pts_x[a])
                # pop b unless it lies strictly below the chord a -> i
                tol = 1e-13 * max(1.0, abs(pts_v[i]))
                if cross <= tol * (pts_x[i] - pts_x[a]):
                    keep.pop()
                else:
                    break
            keep.append(i)
        idx = np.array(keep)
        dropped = len(pts_x) - len(idx)
        if dropped:
            log.debug("lower hull dropped %d of %d samples (J=%s, %s)", dropped, len(pts_x), self.J, self.kind)
        sample_idx = idx[idx < len(self.X)]
        return pts_x[idx], pts_v[idx], sample_idx

    @property
    def x_max(self) -> float:
        return float(self.X[-1])


def _check_curve_J(curve: BoundaryCurve, J: SpinLength):
    if curve.J != J:
        raise SpinMismatch(f"curve is for J={curve.J}, need J={J}")


def evaluate(curve: BoundaryCurve, X):
    """Certified lower bound on the curve at ``X`` (scalar or array).

    The bound is the upper envelope of the supporting lines
    ``value_i + derivative_i * (X - X_i)`` through the samples, clipped from
    above by the chord of the lower convex hull of the samples (the true
    convex curve lies between the two). At samples it returns the sampled
    value; at ``X = 1`` the exact endpoint ``1/2``.
    """
    Xa = np.asarray(X, dtype=float)
    if np.any(Xa < -1e-15) or np.any(Xa > 1 + 1e-12):
        raise OutOfRange(f"X outside [0, 1]: {X!r}")
    Xa = np.clip(Xa, 0.0, 1.0)
    flat = Xa.ravel()

    hx, hv, _ = curve._hull
    chord = np.interp(flat, hx, hv)
    # supporting lines; the envelope is monotone and convex by construction
    t = curve.value[None, :] + curve.derivative[None, :] * (flat[:, None] - curve.X[None, :])
    tangent = t.max(axis=1)
    out = np.maximum(np.minimum(tangent, chord), 0.0)
    out = np.where(flat >= 1.0, ENDPOINT_VALUE, out)
    if np.ndim(Xa) == 0:
        return float(out[0])
    return out.reshape(Xa.shape)


def tilde_G(J: SpinLength, X):
    """Closed-form lower bound on G_J from angular-momentum uncertainty."""
    J = SpinLength.of(J).J
    X = np.asarray(X, dtype=float)
    a = (J + 1) - J * X
    out = 0.5 * (a - np.sqrt(np.maximum(a * a - X, 0.0)))
    return float(out) if out.ndim == 0 else out


def tangent_bound(J: SpinLength, X):
    """Tangent to G_J at the origin, ``X / (2(J+1))``."""
    J = SpinLength.of(J).J
    X = np.asarray(X, dtype=float)
    out = X / (2 * (J + 1))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# sampling


def _integer_point(J: SpinLength, lam: float) -> tuple[float, float, float, float]:
    gs = ground_state(squeezing_hamiltonian(J, lam))
    mx, mz, mx2 = x_basis_moments(J, gs.vector)
    if abs(mx) > 1e-8 * J.J:
        # <L_x> = 0 is expected by symmetry; fall back to the lam2-optimised solve
        log.warning("J=%s lam=%g: <L_x>=%g, using two-parameter solve", J, lam, mx)
        return _halfint_point(J, lam, DEFAULT_GRID.c_scan_points)
    return lam, mz / J.J, (mx2 - mx * mx) / J.J, lam


def _lam2_objective(J: SpinLength, lam: float, c: float) -> tuple[float, np.ndarray]:
    # min over states of <(L_x - c)^2 - lam L_z>; lam2 = 2c
    gs = ground_state(squeezing_hamiltonian(J, lam, 2.0 * c))
    return gs.energy + c * c, gs.vector


def _golden_min(f, a: float, b: float, tol: float = 1e-9, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section minimisation of a unimodal ``f`` on ``[a, b]``."""
    g = (math.sqrt(5) - 1) / 2
    x1 = b - g * (b - a)
    x2 = a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while abs(b - a) > tol * max(1.0, abs(a) + abs(b)) and it < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
        it += 1
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _halfint_point(J: SpinLength, lam: float, n_scan: int) -> tuple[float, float, float, float]:
    """Curve point with slope ``lam``: minimise the ground energy over lam2.

    For small ``lam`` the energy has narrow wells at every ``lam2/2 = m``
    (an ``L_x`` eigenvalue), so the scan always includes those centres; each
    local minimum of the scan is refined and the global best kept.
    """
    c_hi = min(J.J, 3.0)
    cs = np.union1d(np.linspace(0.0, c_hi, n_scan), m_values(J)[m_values(J) >= 0])
    cs = cs[cs <= c_hi]
    es = np.array([_lam2_objective(J, lam, c)[0] for c in cs])
    best_c, best_e = cs[int(np.argmin(es))], es.min()
    for i in range(len(cs)):
        left = es[i - 1] if i > 0 else np.inf
        right = es[i + 1] if i + 1 < len(cs) else np.inf
        if es[i] <= left and es[i] <= right and es[i] < best_e + 1e-3 * max(lam, 1e-3) ** 2 + 1e-12:
            lo, hi = cs[max(i - 1, 0)], cs[min(i + 1, len(cs) - 1)]
            r = minimize_scalar(lambda c: _lam2_objective(J, lam, c)[0], bounds=(lo, hi),
                                method="bounded", options={"xatol": 1e-11})
            if r.fun < best_e:
                best_c, best_e = float(r.x), float(r.fun)
    _, v = _lam2_objective(J, lam, best_c)
    mx, mz, mx2 = x_basis_moments(J, v)
    return lam, mz / J.J, (mx2 - mx * mx) / J.J, lam


def _sweep(J: SpinLength, grid: GridSpec, point) -> np.ndarray:
    lam_hi = grid.lambda_max_factor * J.J
    lams = np.concatenate([[0.0], np.geomspace(grid.lambda_min, lam_hi, grid.n_seed)])
    pts = {float(l): point(J, float(l)) for l in lams}

    def refine():
        for _ in range(60):
            keys = sorted(pts)
            new = []
            for a, b in zip(keys[:-1], keys[1:]):
                pa, pb = pts[a], pts[b]
                if (pb[1] - pa[1] > grid.resolution or pb[2] - pa[2] > grid.resolution) and b - a > 1e-12 * b:
                    new.append(math.sqrt(a * b) if a > 0 else 0.5 * b)
            if not new or len(pts) + len(new) > grid.max_points:
                return
            for l in new:
                pts[l] = point(J, l)

    refine()
    # extend toward X -> 1 until the target is met
    for _ in range(40):
        top = pts[max(pts)]
        if top[1] >= grid.x_max:
            break
        lam_hi *= 2.0
        pts[lam_hi] = point(J, lam_hi)
        refine()

    arr = np.array([pts[k] for k in sorted(pts)])
    # keep strictly increasing X below 1 (X saturates in floating point)
    keep = [0]
    for i in range(1, len(arr)):
        if arr[i, 1] > arr[keep[-1], 1] and arr[i, 1] < 1.0:
            keep.append(i)
    return arr[keep]


def compute_F_curve(J: SpinLength, grid: GridSpec = DEFAULT_GRID) -> BoundaryCurve:
    """Sample F_J for integer J from ground states of ``L_x^2 - lam L_z``."""
    J = SpinLength.of(J)
    if not J.is_integer:
        raise NonIntegerSpin(f"J={J} is half-integer; use compute_F_curve_halfinteger")
    arr = _sweep(J, grid, _integer_point)
    return BoundaryCurve(J, "F", arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], "integer-J sweep", grid.hash())


def compute_F_curve_halfinteger(J: SpinLength, grid: GridSpec = DEFAULT_GRID) -> BoundaryCurve:
    """Sample F_J for any J, optimising the ``lam2 L_x`` term at each ``lam``.

    For fixed ``lam`` the minimum over ``lam2`` of the ground energy of
    ``(L_x - lam2/2)^2 - lam L_z`` gives a supporting line of F_J with slope
    ``lam``; the minimising ground state is the touching point.
    """
    J = SpinLength.of(J)
    arr = _sweep(J, grid, lambda J_, l: _halfint_point(J_, l, grid.c_scan_points))
    return BoundaryCurve(J, "F", arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], "half-integer constrained", grid.hash())


def compute_F_halfinteger(J: SpinLength, X: float, tol: float = 1e-8) -> float:
    """F_J(X) by constrained two-parameter minimisation.

    Minimises the ``L_x`` variance of ground states of
    ``L_x^2 - lam L_z - lam2 L_x`` over ``lam2`` (coarse scan, then
    golden-section) with ``lam`` fixed by bisection on ``<L_z>/J = X``.
    """
    J = SpinLength.of(J)
    if not 0.0 <= X < 1.0:
        raise OutOfRange(f"X={X} outside [0, 1)")
    box = 100.0 * J.J

    def constrained(lam2: float) -> float:
        def gap(lam):
            _, mz, _ = x_basis_moments(J, ground_state(squeezing_hamiltonian(J, lam, lam2)).vector)
            return mz / J.J - X

        g0 = gap(0.0)
        if g0 >= 0:
            lam = 0.0
        else:
            if gap(box) < 0:
                return math.inf
            lam = brentq(gap, 0.0, box, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        gs = ground_state(squeezing_hamiltonian(J, lam, lam2))
        mx, mz, mx2 = x_basis_moments(J, gs.vector)
        if abs(mz / J.J - X) > tol:
            return math.inf
        return (mx2 - mx * mx) / J.J

    # include the well centres lam2 = 2m of the L_x eigenvalues
    wells = 2 * m_values(J)[m_values(J) > 0]
    lam2s = np.union1d(np.concatenate([[0.0], np.geomspace(1e-3, box, 40)]), wells)
    vals = np.array([constrained(l) for l in lam2s])
    if not np.isfinite(vals).any():
        raise ConstraintInfeasible(f"no (lam, lam2) in the search box reaches X={X} for J={J}")
    i = int(np.argmin(vals))
    lo, hi = lam2s[max(i - 1, 0)], lam2s[min(i + 1, len(lam2s) - 1)]
    l2, best = _golden_min(constrained, lo, hi, tol=1e-10)
    return float(min(best, vals[i]))


@lru_cache(maxsize=64)
def _dense_integer_point(J: SpinLength):
    """Lean variant of ``_integer_point`` for small dimensions; the root
    solves in :func:`evaluate_exact` call it thousands of times."""
    m = m_values(J)
    m2 = m * m
    c = ladder_coefficients(J)
    i = np.arange(J.dim - 1)

    def point(_J, lam):
        H = np.diag(m2)
        H[i, i + 1] = H[i + 1, i] = -0.5 * lam * c
        v = np.linalg.eigh(H)[1][:, 0]
        p = v * v
        mx = p @ m
        return lam, float(c @ (v[:-1] * v[1:])) / J.J, float(p @ m2 - mx * mx) / J.J, lam

    return point


def evaluate_exact(curve: BoundaryCurve, X, rtol: float = 1e-13):
    """Curve value at ``X`` recomputed from the ground state whose
    polarisation hits ``X``, bracketed by the neighbouring samples' slopes.

    Slower than :func:`evaluate` (one root solve per point) but accurate to
    solver precision instead of the sample spacing.
    """
    Xa = np.asarray(X, dtype=float)
    if Xa.ndim:
        return np.array([evaluate_exact(curve, float(x), rtol) for x in Xa.ravel()]).reshape(Xa.shape)
    x = float(Xa)
    if x < -1e-15 or x > 1 + 1e-12:
        raise OutOfRange(f"X outside [0, 1]: {x!r}")
    if x >= 1.0:
        return ENDPOINT_VALUE
    x = max(x, 0.0)
    J = curve.J
    target = math.sqrt(x) if curve.kind == "G" else x
    xf = np.sqrt(curve.X) if curve.kind == "G" else curve.X
    if J.is_integer and J.dim <= 64:
        point = _dense_integer_point(J)
    elif J.is_integer:
        point = _integer_point
    else:
        def point(J_, lam):
            return _halfint_point(J_, lam, DEFAULT_GRID.c_scan_points)

    i = int(np.searchsorted(xf, target))
    if i < len(xf) and xf[i] == target:
        return float(curve.value[i])
    if i == 0:
        return 0.0
    lo = float(curve.lam[i - 1])
    if i < len(xf):
        hi = float(curve.lam[i])
    else:
        hi = max(2.0 * lo, 1.0)
        while point(J, hi)[1] < target:
            hi *= 2.0
            if hi > 1e300:
                raise ConvergenceFailure(f"cannot reach X={x} for J={J}")
    rtol = max(rtol, 4 * np.finfo(float).eps)
    if lo > 0:
        lam = brentq(lambda l: point(J, l)[1] - target, lo, hi, xtol=1e-300, rtol=rtol)
    else:
        # X is below the first nonzero sample; lam may be tiny, so search in log lam
        t = brentq(lambda t: point(J, math.exp(t))[1] - target, math.log(hi) - 745.0, math.log(hi),
                   xtol=1e-13, rtol=rtol, maxiter=500)
        lam = math.exp(t)
    return float(point(J, lam)[2])


def g_from_f(curve: BoundaryCurve) -> BoundaryCurve:
    """Re-parametrise an F curve as G(X) = F(sqrt X)."""
    if curve.kind != "F":
        raise ValueError("g_from_f expects an F curve")
    J = curve.J.J
    Xg = curve.X**2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(curve.X > 0, curve.derivative / (2 * np.where(curve.X > 0, curve.X, 1.0)), 0.0)
    origin_slope = 1.0 / (2 * (J + 1))
    if not curve.J.is_integer and np.any(curve.value < Xg * origin_slope - 1e-12):
        origin_slope = 0.0
    d = np.where(curve.X > 0, d, origin_slope)
    return BoundaryCurve(curve.J, "G", curve.lam, Xg, curve.value, d, curve.provenance, curve.grid_hash)


# --------------------------------------------------------------------------
# diagnostics and derived boundaries


@dataclass(frozen=True)
class ConvexityReport:
    J: SpinLength
    kind: Kind
    max_derivative_decrease: float
    verdict: bool
    alpha_probe: list[dict] = field(default_factory=list)


def convexity_check(curve: BoundaryCurve, alpha_list: Iterable[float] = (1.5, 2, 2.5, 3, 4),
                    tol: float = 1e-9, alpha_rtol: float = 1e-6) -> ConvexityReport:
    """Check monotone stored derivatives and probe convexity of F(X^(1/alpha)).

    The probe maps the samples to ``(X_F**alpha, F)`` and flags a decrease of
    consecutive secant slopes larger than ``alpha_rtol`` relative to the
    slope scale.
    """
    if len(curve) < 3:
        raise ValueError("need at least 3 samples")
    d = curve.derivative
    dec = float(max(0.0, np.max(d[:-1] - d[1:])))
    xf = np.sqrt(curve.X) if curve.kind == "G" else curve.X
    probes = []
    for alpha in alpha_list:
        u = xf**alpha
        du = np.diff(u)
        ok = du > 0
        s = np.diff(curve.value)[ok] / du[ok]
        drop = s[:-1] - s[1:]
        scale = np.maximum(np.abs(s[:-1]), np.abs(s[1:]))
        rel = drop / np.where(scale > 0, scale, 1.0)
        probes.append({"alpha": float(alpha), "convex": bool(np.all(rel <= alpha_rtol)),
                       "max_relative_slope_drop": float(max(0.0, rel.max(initial=0.0)))})
    return ConvexityReport(curve.J, curve.kind, dec, dec <= tol, probes)


@dataclass(frozen=True)
class ProducibilityBoundary:
    N: int
    j: SpinLength
    k: int
    second_moment_perp: np.ndarray
    var_Jx: np.ndarray

    @property
    def points(self) -> list[dict]:
        return [{"second_moment_perp": float(a), "var_Jx": float(b)}
                for a, b in zip(self.second_moment_perp, self.var_Jx)]


def producibility_boundary(N: int, j: SpinLength, k: int, curve: BoundaryCurve,
                           include_endpoint: bool = True) -> ProducibilityBoundary:
    """k-producibility boundary in the (<J_y^2+J_z^2>, (Delta J_x)^2) plane."""
    j = SpinLength.of(j)
    if not 1 <= k <= N - 1:
        raise ValueError(f"k={k} outside [1, N-1]")
    _check_curve_J(curve, j.times(k))
    Xg = curve.X**2 if curve.kind == "F" else curve.X
    val = curve.value
    if include_endpoint and Xg[-1] < 1.0:
        Xg = np.append(Xg, 1.0)
        val = np.append(val, ENDPOINT_VALUE)
    jj = j.J
    smp = N * (N - k) * jj**2 * Xg + N * jj * (k * jj + 1)
    # (N/k) (Delta L_x)^2 with (Delta L_x)^2 = J * value, J = k j
    var = N * jj * val
    return ProducibilityBoundary(N, j, k, smp, var)


# --------------------------------------------------------------------------
# persistence


def curve_to_dict(curve: BoundaryCurve) -> dict:
    return {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "two_J": curve.J.two_J,
        "kind": curve.kind,
        "provenance": curve.provenance,
        "grid_hash": curve.grid_hash,
        "samples": curve.samples,
    }


def curve_from_dict(d: dict) -> BoundaryCurve:
    if d.get("format") != CACHE_FORMAT or d.get("version") != CACHE_VERSION:
        raise ValueError("unsupported curve file")
    s = d["samples"]
    return BoundaryCurve(
        SpinLength(d["two_J"]), d["kind"],
        [p["lambda"] for p in s], [p["X"] for p in s], [p["value"] for p in s], [p["derivative"] for p in s],
        d["provenance"], d["grid_hash"],
    )


def save_curve(curve: BoundaryCurve, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # json uses the shortest repr that round-trips, so reals are lossless
    text = json.dumps(curve_to_dict(curve), indent=1)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_curve(path: Path) -> BoundaryCurve:
    with open(path) as fh:
        return curve_from_dict(json.load(fh))


class CurveCache:
    """Memory + disk cache of boundary curves keyed by (2J, kind, grid hash).

    Half-integer J curves are computed with the two-parameter sweep.
    """

    def __init__(self, directory: str | os.PathLike | None = None, grid: GridSpec = DEFAULT_GRID):
        self.directory = Path(directory) if directory is not None else None
        self.grid = grid
        self._mem: dict[tuple[int, str], BoundaryCurve] = {}
        self.hits = 0
        self.misses = 0

    def _path(self, two_J: int, kind: str) -> Path:
        return self.directory / f"{kind}_{two_J}_{self.grid.hash()}.json"

    def get(self, J: SpinLength, kind: Kind = "G") -> BoundaryCurve:
        J = SpinLength.of(J)
        key = (J.two_J, kind)
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        if self.directory is not None:
            path = self._path(J.two_J, kind)
            if path.exists():
                curve = load_curve(path)
                self._mem[key] = curve
                self.hits += 1
                return curve
        self.misses += 1
        F = compute_F_curve(J, self.grid) if J.is_integer else compute_F_curve_halfinteger(J, self.grid)
        G = g_from_f(F)
        self._store(F)
        self._store(G)
        return F if kind == "F" else G

    def _store(self, curve: BoundaryCurve) -> None:
        self._mem[(curve.J.two_J, curve.kind)] = curve
        if self.directory is not None:
            path = self._path(curve.J.two_J, curve.kind)
            path.parent.mkdir(parents=True, exist_ok=True)
            with FileLock(str(path) + ".lock"):
                save_curve(curve, path)

    def F(self, J) -> BoundaryCurve:
        return self.get(J, "F")

    def G(self, J) -> BoundaryCurve:
        return self.get(J, "G")
