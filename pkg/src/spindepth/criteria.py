"""Entanglement-depth criteria on collective-spin records.

Each criterion tests whether a record is compatible with k-producibility;
a violation certifies an entanglement depth of at least k+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .boundary import BoundaryCurve, CurveCache, evaluate
from .errors import MissingFields, NonIntegerSpin, NotQubit, OutOfRange, SpinMismatch
from .records import CriterionResult, ExtendedMeasurementRecord, MeasurementRecord

# a violation must exceed this fraction of the scale (Nj for variances, 1 for xi^2)
VERDICT_RTOL = 1e-9

CRITERIA = ("nonlinear", "sorensen_molmer", "xi2", "xi2_sm", "duan", "qubit_tangent")


def _check_k(rec: MeasurementRecord, k: int):
    if not 1 <= k <= rec.N - 1:
        raise ValueError(f"k={k} outside [1, N-1] for N={rec.N}")


def _check_curve(curve: BoundaryCurve, rec: MeasurementRecord, k: int, kind: str):
    J = rec.j.times(k)
    if curve.J != J:
        raise SpinMismatch(f"curve is for J={curve.J}, level k={k} needs J={J}")
    if curve.kind != kind:
        raise ValueError(f"expected a {kind} curve, got {curve.kind}")


def _require_integer_kj(rec: MeasurementRecord, k: int):
    if not rec.j.times(k).is_integer:
        raise NonIntegerSpin(f"k*j = {rec.j.times(k)} must be an integer")


def _variance_result(name: str, k: int, lhs: float, rhs: float, scale: float) -> CriterionResult:
    margin = rhs - lhs
    return CriterionResult(name, k, True, lhs, rhs, margin > VERDICT_RTOL * scale, margin)


def _parameter_result(name: str, k: int, xi2: float) -> CriterionResult:
    margin = 1.0 - xi2
    return CriterionResult(name, k, True, xi2, 1.0, margin > VERDICT_RTOL, margin)


def _not_applicable(name: str, k: int, why: str) -> CriterionResult:
    return CriterionResult(name, k, False, None, None, False, None, why)


def nonlinear_argument(rec: MeasurementRecord, k: int) -> Optional[float]:
    """Argument of G in the second-moment criterion; ``None`` below threshold."""
    j = rec.j.J
    base = rec.Nj * (k * j + 1)
    if rec.second_moment_perp < base:
        return None
    X = (rec.second_moment_perp - base) / (rec.N * (rec.N - k) * j * j)
    if X > 1 + 1e-9:
        raise OutOfRange(f"argument {X} > 1: record is unphysical for level k={k}")
    return min(X, 1.0)


def nonlinear_criterion(rec: MeasurementRecord, k: int, G: BoundaryCurve) -> CriterionResult:
    """``(dJ_x)^2 >= Nj G_J([<J_y^2+J_z^2> - Nj(kj+1)] / [N(N-k)j^2])``."""
    _check_k(rec, k)
    _check_curve(G, rec, k, "G")
    X = nonlinear_argument(rec, k)
    if X is None:
        return _not_applicable("nonlinear", k, "<J_y^2+J_z^2> below Nj(kj+1)")
    return _variance_result("nonlinear", k, rec.var_Jx, rec.Nj * evaluate(G, X), rec.Nj)


def sm_criterion(rec: MeasurementRecord, k: int, F: BoundaryCurve) -> CriterionResult:
    """``(dJ_x)^2 >= Nj F_J(|<J_perp>| / Nj)`` with the y-z plane polarisation."""
    _check_k(rec, k)
    _check_curve(F, rec, k, "F")
    P = math.sqrt(rec.polarization_sq) / rec.Nj
    if P > 1 + 1e-9:
        raise OutOfRange(f"polarisation {P} > 1")
    return _variance_result("sorensen_molmer", k, rec.var_Jx, rec.Nj * evaluate(F, min(P, 1.0)), rec.Nj)


def xi2(rec: MeasurementRecord, k: int) -> CriterionResult:
    """Linearised second-moment parameter; below 1 means depth > k."""
    _check_k(rec, k)
    _require_integer_kj(rec, k)
    j = rec.j.J
    den = rec.second_moment_perp - rec.Nj * (k * j + 1)
    if den <= 0:
        return _not_applicable("xi2", k, "<J_y^2+J_z^2> - Nj(kj+1) <= 0")
    return _parameter_result("xi2", k, (k * j + 1) * 2 * (rec.N - k) * j * rec.var_Jx / den)


def xi2_sm(rec: MeasurementRecord, k: int) -> CriterionResult:
    _check_k(rec, k)
    _require_integer_kj(rec, k)
    j = rec.j.J
    pol = rec.polarization_sq
    if pol <= 0:
        return _not_applicable("xi2_sm", k, "zero polarisation")
    return _parameter_result("xi2_sm", k, (k * j + 1) * 2 * rec.Nj * rec.var_Jx / pol)


def _require_qubits(rec: MeasurementRecord):
    if rec.j.two_J != 1:
        raise NotQubit(f"criterion needs j=1/2, got j={rec.j}")


def duan_criterion(rec: MeasurementRecord, k: int) -> CriterionResult:
    """``N(k+2)(dJ_x)^2 >= <J_y^2+J_z^2> - N(k+2)/4`` for qubits."""
    _check_k(rec, k)
    _require_qubits(rec)
    N = rec.N
    lhs = N * (k + 2) * rec.var_Jx
    rhs = rec.second_moment_perp - N * (k + 2) / 4
    return _variance_result("duan", k, lhs, rhs, rec.Nj)


def qubit_tangent_criterion(rec: MeasurementRecord, k: int) -> CriterionResult:
    """``(N-k)(k+2)/2 (dJ_x)^2 >= <J_y^2+J_z^2> - N(k+2)/4``; xi2 at j=1/2."""
    _check_k(rec, k)
    _require_qubits(rec)
    _require_integer_kj(rec, k)
    N = rec.N
    lhs = (N - k) / 2 * (k + 2) * rec.var_Jx
    rhs = rec.second_moment_perp - N * (k + 2) / 4
    return _variance_result("qubit_tangent", k, lhs, rhs, rec.Nj)


def observation3_predicate(rec: MeasurementRecord, k: int) -> bool:
    """True when the second-moment criterion is strictly stronger than the
    polarisation-based one at level k."""
    if not isinstance(rec, ExtendedMeasurementRecord):
        raise MissingFields("need var_Jy and var_Jz")
    _check_k(rec, k)
    Nj, j = rec.Nj, rec.j.J
    lhs = (rec.var_Jy + rec.var_Jz) / Nj
    return lhs > k * j * (1 - rec.polarization_sq / Nj**2) + 1


# --------------------------------------------------------------------------
# depth search


CURVE_KIND = {"nonlinear": "G", "sorensen_molmer": "F"}


def evaluate_criterion(rec: MeasurementRecord, criterion: str, k: int,
                       curves: CurveCache | None = None) -> CriterionResult:
    if criterion == "nonlinear":
        return nonlinear_criterion(rec, k, curves.G(rec.j.times(k)))
    if criterion == "sorensen_molmer":
        return sm_criterion(rec, k, curves.F(rec.j.times(k)))
    fn: dict[str, Callable] = {
        "xi2": xi2, "xi2_sm": xi2_sm, "duan": duan_criterion, "qubit_tangent": qubit_tangent_criterion,
    }
    if criterion not in fn:
        raise ValueError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    return fn[criterion](rec, k)


def admissible_ks(N: int, j, criterion: str, allow_half_integer: bool = False,
                  k_range: tuple[int, int] | None = None) -> list[int]:
    """Levels k at which ``criterion`` can be evaluated.

    Curve-based criteria need an integer ``kj`` unless half-integer curves
    are enabled; the linear parameters always do. Duan's condition is
    defined for every k.
    """
    from .spin import SpinLength

    j = SpinLength.of(j)
    lo, hi = k_range if k_range else (1, N - 1)
    lo, hi = max(lo, 1), min(hi, N - 1)
    ks = range(lo, hi + 1)
    if criterion == "duan":
        return list(ks)
    if criterion in CURVE_KIND and allow_half_integer:
        return list(ks)
    return [k for k in ks if j.times(k).is_integer]


@dataclass
class DepthVerdict:
    criterion: str
    max_k_violated: Optional[int]
    certified_depth: int
    results: dict[int, CriterionResult] = field(default_factory=dict)
    monotone: bool = True
    monotonicity_violations: list[int] = field(default_factory=list)
    strategy: str = "bisect"

    @property
    def any_applicable(self) -> bool:
        return any(r.applicable for r in self.results.values())

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "max_k_violated": self.max_k_violated,
            "certified_depth": self.certified_depth,
            "monotone": self.monotone,
            "monotonicity_violations": self.monotonicity_violations,
            "strategy": self.strategy,
            "evaluated_k": sorted(self.results),
        }


def _monotonicity_violations(results: dict[int, CriterionResult]) -> list[int]:
    # k' < k with violated(k) but not violated(k')
    ks = sorted(results)
    bad = []
    top = max((k for k in ks if results[k].violated), default=None)
    if top is None:
        return bad
    return [k for k in ks if k < top and not results[k].violated]


def detect_depth(rec: MeasurementRecord, criterion: str, curves: CurveCache | None = None,
                 allow_half_integer: bool = False, strategy: str = "bisect",
                 k_range: tuple[int, int] | None = None) -> DepthVerdict:
    """Largest violated level k and the certified depth k+1.

    ``strategy="bisect"`` gallops up the admissible levels and bisects,
    assuming violation is monotone in k; neighbours of the boundary are
    re-checked and any inconsistency triggers a full scan. ``"scan"``
    evaluates every admissible level. Every violated level is a valid
    certificate, so the result uses the largest one seen.
    """
    ks = admissible_ks(rec.N, rec.j, criterion, allow_half_integer, k_range)
    results: dict[int, CriterionResult] = {}

    def test(i: int) -> bool:
        k = ks[i]
        if k not in results:
            results[k] = evaluate_criterion(rec, criterion, k, curves)
        return results[k].violated

    if ks and strategy == "bisect":
        if test(0):
            lo, step = 0, 1
            hi = None
            while True:
                nxt = min(lo + step, len(ks) - 1)
                if nxt == lo:
                    break
                if test(nxt):
                    lo = nxt
                    step *= 2
                else:
                    hi = nxt
                    break
            if hi is not None:
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if test(mid):
                        lo = mid
                    else:
                        hi = mid
            # consistency probe around the boundary
            for i in (lo - 2, lo - 1, lo + 1, lo + 2):
                if 0 <= i < len(ks):
                    test(i)
        else:
            for i in (1, 2):
                if i < len(ks):
                    test(i)
        if _monotonicity_violations(results):
            strategy = "scan"
    if strategy == "scan":
        for i in range(len(ks)):
            test(i)
    elif strategy != "bisect":
        raise ValueError(f"unknown strategy {strategy!r}")

    bad = _monotonicity_violations(results)
    top = max((k for k, r in results.items() if r.violated), default=None)
    return DepthVerdict(
        criterion, top, (top + 1) if top is not None else 1, dict(sorted(results.items())),
        monotone=not bad, monotonicity_violations=bad, strategy=strategy,
    )
