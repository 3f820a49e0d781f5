"""Data tables for the standard figures: boundary curves, producibility
boundaries, depth versus squeezing, and boundary slopes."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .boundary import ENDPOINT_VALUE, CurveCache, evaluate, producibility_boundary
from .criteria import detect_depth
from .records import MeasurementRecord
from .spin import SpinLength
from .states import decohere_particles, squeezed_state_moments

Table = list[dict]

FIG1_J = tuple(range(1, 20, 2))
FIG2_INSET_K = (1, 5, 9, 13, 17)
FIG4_J = (1, 10, 19)


def curve_table(cache: CurveCache, Js: Sequence = FIG1_J, kind: str = "G") -> Table:
    """Samples of F or G for each J, closed off with the exact endpoint."""
    rows = []
    for J in Js:
        J = SpinLength.of(J)
        c = cache.get(J, kind)
        for x, v, d, lam in zip(c.X, c.value, c.derivative, c.lam):
            rows.append({"J": str(J), "lambda": float(lam), "X": float(x), "value": float(v), "derivative": float(d)})
        if c.X[-1] < 1.0:
            rows.append({"J": str(J), "lambda": float("inf"), "X": 1.0, "value": ENDPOINT_VALUE, "derivative": float("inf")})
    return rows


def fig1_data(cache: CurveCache, Js: Sequence = FIG1_J) -> Table:
    return [{k: r[k] for k in ("J", "X", "value")} for r in curve_table(cache, Js, "G")]


def _linear_boundaries(N: int, j: SpinLength, k: int, smp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Variance thresholds of the tangent criterion and (qubits) Duan's."""
    jj = j.J
    base = N * jj * (k * jj + 1)
    tangent = np.maximum(smp - base, 0.0) / ((k * jj + 1) * 2 * (N - k) * jj)
    duan = np.maximum(smp - N * (k + 2) / 4, 0.0) / (N * (k + 2)) if j.two_J == 1 else np.full_like(smp, np.nan)
    return tangent, duan


def fig2_data(cache: CurveCache, N: int = 200, j=SpinLength(1), k: int = 20, n_line: int = 200) -> Table:
    """Solid (second-moment), dashed (tangent) and dotted (Duan) boundaries."""
    j = SpinLength.of(j)
    G = cache.G(j.times(k))
    b = producibility_boundary(N, j, k, G)
    rows = [{"curve": "nonlinear", "second_moment_perp": float(s), "var_Jx": float(v)}
            for s, v in zip(b.second_moment_perp, b.var_Jx)]
    Nj = N * j.J
    lo = min(N * (k + 2) / 4, Nj * (k * j.J + 1)) if j.two_J == 1 else Nj * (k * j.J + 1)
    smp = np.linspace(lo, Nj * (Nj + 1), n_line)
    tangent, duan = _linear_boundaries(N, j, k, smp)
    rows += [{"curve": "tangent", "second_moment_perp": float(s), "var_Jx": float(v)} for s, v in zip(smp, tangent)]
    if j.two_J == 1:
        rows += [{"curve": "duan", "second_moment_perp": float(s), "var_Jx": float(v)} for s, v in zip(smp, duan)]
    return rows


def fig2_inset_data(cache: CurveCache, N: int = 20, j=SpinLength(2), ks: Sequence[int] = FIG2_INSET_K) -> Table:
    j = SpinLength.of(j)
    rows = []
    for k in ks:
        b = producibility_boundary(N, j, k, cache.G(j.times(k)))
        rows += [{"k": k, "second_moment_perp": float(s), "var_Jx": float(v)}
                 for s, v in zip(b.second_moment_perp, b.var_Jx)]
    return rows


def tangency_residual(cache: CurveCache, N: int, j, k: int, span: float = 1e-3) -> float:
    """Largest gap between the tangent line and the second-moment boundary
    near the start of the boundary, relative to ``Nj``."""
    j = SpinLength.of(j)
    G = cache.G(j.times(k))
    X = np.linspace(0.0, span, 11)
    jj = j.J
    Nj = N * jj
    smp = N * (N - k) * jj**2 * X + Nj * (k * jj + 1)
    tangent, _ = _linear_boundaries(N, j, k, smp)
    solid = Nj * evaluate(G, X)
    # the gap is second order in X
    return float(np.max(np.abs(solid - tangent)) / Nj)


def squeezing_db(rec: MeasurementRecord) -> float:
    """``2Nj var / <J_perp>^2`` in dB; negative values mean squeezing."""
    pol = rec.polarization_sq
    if pol <= 0 or rec.var_Jx <= 0:
        return float("inf") if pol <= 0 else float("-inf")
    return float(10 * np.log10(2 * rec.Nj * rec.var_Jx / pol))


def fig3_mu_grid(n: int = 40) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-4, 1e3, n - 1)])


def fig3_data(cache: CurveCache, N: int = 1000, decohered: int = 10, mus: Sequence[float] | None = None,
              allow_half_integer: bool = False) -> Table:
    """Certified depth of decohered squeezed states for both criteria."""
    mus = fig3_mu_grid() if mus is None else mus
    rows = []
    for mu in mus:
        s = squeezed_state_moments(N, float(mu))
        if decohered:
            s = decohere_particles(s, decohered)
        rec = s.to_record()
        nl = detect_depth(rec, "nonlinear", cache, allow_half_integer=allow_half_integer)
        sm = detect_depth(rec, "sorensen_molmer", cache, allow_half_integer=allow_half_integer)
        rows.append({
            "mu": float(mu), "var_Jx": rec.var_Jx, "mean_Jz": rec.mean_Jz,
            "second_moment_perp": rec.second_moment_perp, "squeezing_dB": squeezing_db(rec),
            "depth_nonlinear": nl.certified_depth, "depth_sm": sm.certified_depth,
        })
    return rows


def fig4_data(cache: CurveCache, Js: Sequence = FIG4_J) -> Table:
    """Slope of G_J at each sample."""
    return [{k: r[k] for k in ("J", "X", "derivative")} for r in curve_table(cache, Js, "G") if r["X"] < 1.0]
