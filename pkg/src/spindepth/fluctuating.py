"""Depth criteria for ensembles with a fluctuating particle number."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .boundary import BoundaryCurve, evaluate
from .criteria import (
    _not_applicable, _parameter_result, _variance_result, nonlinear_criterion, sm_criterion, xi2, xi2_sm,
)
from .errors import BinUnderflow, NonIntegerSpin, OutOfRange, SpinMismatch
from .records import CriterionResult, MeasurementRecord
from .spin import SpinLength


@dataclass(frozen=True)
class Bin:
    N: int
    Q: float
    var_Jx: float
    mean_Jz: float
    second_moment_perp: float
    mean_Jx: Optional[float] = None
    mean_Jy: float = 0.0

    def to_record(self, j: SpinLength) -> MeasurementRecord:
        return MeasurementRecord(
            N=self.N, j=j, var_Jx=self.var_Jx, mean_Jx=self.mean_Jx,
            mean_Jy=self.mean_Jy, mean_Jz=self.mean_Jz, second_moment_perp=self.second_moment_perp,
        )


@dataclass(frozen=True)
class ShotEnsemble:
    """Mixture of fixed-N states with weights ``Q_N`` (normalised on construction)."""

    j: SpinLength
    bins: tuple[Bin, ...]

    def __post_init__(self):
        object.__setattr__(self, "j", SpinLength.of(self.j))
        bins = tuple(b for b in self.bins if b.Q > 0)
        if not bins:
            raise ValueError("ensemble has no populated bins")
        if any(b.N < 1 for b in bins):
            raise ValueError("every bin needs N >= 1")
        if len({b.N for b in bins}) != len(bins):
            raise ValueError("duplicate N bins")
        total = math.fsum(b.Q for b in bins)
        if abs(total - 1.0) > 1e-12:
            bins = tuple(Bin(**{**b.__dict__, "Q": b.Q / total}) for b in bins)
        object.__setattr__(self, "bins", tuple(sorted(bins, key=lambda b: b.N)))

    @classmethod
    def delta(cls, rec: MeasurementRecord) -> "ShotEnsemble":
        return cls(rec.j, (Bin(rec.N, 1.0, rec.var_Jx, rec.mean_Jz, rec.second_moment_perp,
                               rec.mean_Jx, rec.mean_Jy),))

    @classmethod
    def from_shots(cls, j, shots: Sequence[tuple[int, float, float, float]]) -> "ShotEnsemble":
        """Aggregate per-shot ``(N, Jx, Jy, Jz)`` outcomes into per-N bins."""
        arr = np.asarray(shots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("shots must be rows of (N, Jx, Jy, Jz)")
        Ns = arr[:, 0].astype(int)
        bins = []
        for N in np.unique(Ns):
            rows = arr[Ns == N]
            jx, jy, jz = rows[:, 1], rows[:, 2], rows[:, 3]
            bins.append(Bin(
                int(N), len(rows) / len(arr), float(jx.var()), float(jz.mean()),
                float(np.mean(jy * jy + jz * jz)), float(jx.mean()), float(jy.mean()),
            ))
        return cls(j, tuple(bins))

    @classmethod
    def read(cls, path: str | Path, j=None) -> "ShotEnsemble":
        """Load a shot CSV (``shot_id,N,Jx,Jy,Jz``) or a binned JSON file."""
        path = Path(path)
        if path.suffix.lower() == ".json":
            d = json.loads(path.read_text())
            jj = SpinLength(int(d["two_j"])) if "two_j" in d else SpinLength.of(j)
            bins = tuple(
                Bin(int(b["N"]), float(b["Q"]), float(b["var_Jx"]), float(b.get("mean_Jz", 0.0)),
                    float(b["second_moment_perp"]),
                    None if b.get("mean_Jx") is None else float(b["mean_Jx"]), float(b.get("mean_Jy", 0.0)))
                for b in d["bins"]
            )
            return cls(jj, bins)
        if j is None:
            raise ValueError("shot CSV files need j")
        with open(path, newline="") as fh:
            rows = [(int(r["N"]), float(r["Jx"]), float(r["Jy"]), float(r["Jz"])) for r in csv.DictReader(fh)]
        return cls.from_shots(j, rows)

    @property
    def is_delta(self) -> bool:
        return len(self.bins) == 1

    @property
    def mean_N(self) -> float:
        return math.fsum(b.Q * b.N for b in self.bins)

    def pooled_var_Jx(self) -> tuple[float, bool]:
        """Variance of J_x over the mixture, and whether between-bin mean
        differences were included (needs every bin's ``mean_Jx``)."""
        if all(b.mean_Jx is not None for b in self.bins):
            m = math.fsum(b.Q * b.mean_Jx for b in self.bins)
            second = math.fsum(b.Q * (b.var_Jx + b.mean_Jx**2) for b in self.bins)
            return max(second - m * m, 0.0), True
        return math.fsum(b.Q * b.var_Jx for b in self.bins), False

    def pooled_polarization_sq(self) -> float:
        my = math.fsum(b.Q * b.mean_Jy for b in self.bins)
        mz = math.fsum(b.Q * b.mean_Jz for b in self.bins)
        return my * my + mz * mz


@dataclass(frozen=True)
class WStatistic:
    k: int
    mean_W: float
    contributions: tuple[tuple[int, float], ...]  # (N, Q_N * W_N)


def w_expectation(ens: ShotEnsemble, k: int) -> WStatistic:
    """``<W> = sum_N Q_N [<J_y^2+J_z^2>_N - Nj(kj+1)] / ((N-k) j)``."""
    j = ens.j.J
    under = [b.N for b in ens.bins if b.N <= k]
    if under:
        raise BinUnderflow(f"bins with N <= k={k}: {under}")
    contrib = tuple(
        (b.N, b.Q * (b.second_moment_perp - b.N * j * (k * j + 1)) / ((b.N - k) * j)) for b in ens.bins
    )
    return WStatistic(k, math.fsum(c for _, c in contrib), contrib)


def _check_k(ens: ShotEnsemble, k: int):
    if k < 1:
        raise ValueError("k must be positive")


def fluctuating_nonlinear(ens: ShotEnsemble, k: int, G: BoundaryCurve) -> CriterionResult:
    """Second-moment criterion with ``N -> <N>`` and the argument ``<W>/(<N> j)``."""
    if ens.is_delta:
        return nonlinear_criterion(ens.bins[0].to_record(ens.j), k, G)
    _check_k(ens, k)
    if G.J != ens.j.times(k) or G.kind != "G":
        raise SpinMismatch(f"need a G curve for J={ens.j.times(k)}")
    w = w_expectation(ens, k)
    if w.mean_W < 0:
        return _not_applicable("nonlinear", k, "<W> < 0")
    scale = ens.mean_N * ens.j.J
    X = w.mean_W / scale
    if X > 1 + 1e-9:
        raise OutOfRange(f"argument {X} > 1")
    var, _ = ens.pooled_var_Jx()
    return _variance_result("nonlinear", k, var, scale * evaluate(G, min(X, 1.0)), scale)


def fluctuating_sm(ens: ShotEnsemble, k: int, F: BoundaryCurve) -> CriterionResult:
    if ens.is_delta:
        return sm_criterion(ens.bins[0].to_record(ens.j), k, F)
    _check_k(ens, k)
    if F.J != ens.j.times(k) or F.kind != "F":
        raise SpinMismatch(f"need an F curve for J={ens.j.times(k)}")
    scale = ens.mean_N * ens.j.J
    P = math.sqrt(ens.pooled_polarization_sq()) / scale
    if P > 1 + 1e-9:
        raise OutOfRange(f"polarisation {P} > 1")
    var, _ = ens.pooled_var_Jx()
    return _variance_result("sorensen_molmer", k, var, scale * evaluate(F, min(P, 1.0)), scale)


def fluctuating_linear_parameters(ens: ShotEnsemble, k: int) -> dict[str, CriterionResult]:
    """``xi2`` with the W statistic and ``xi2_sm`` with ``N -> <N>``."""
    if ens.is_delta:
        rec = ens.bins[0].to_record(ens.j)
        return {"xi2_fluct": xi2(rec, k), "xi2_sm_fluct": xi2_sm(rec, k)}
    _check_k(ens, k)
    if not ens.j.times(k).is_integer:
        raise NonIntegerSpin(f"k*j = {ens.j.times(k)} must be an integer")
    j = ens.j.J
    var, _ = ens.pooled_var_Jx()
    w = w_expectation(ens, k)
    out = {}
    if w.mean_W > 0:
        out["xi2_fluct"] = _parameter_result("xi2", k, (k * j + 1) * 2 * var / w.mean_W)
    else:
        out["xi2_fluct"] = _not_applicable("xi2", k, "<W> <= 0")
    pol = ens.pooled_polarization_sq()
    if pol > 0:
        out["xi2_sm_fluct"] = _parameter_result("xi2_sm", k, (k * j + 1) * 2 * ens.mean_N * j * var / pol)
    else:
        out["xi2_sm_fluct"] = _not_applicable("xi2_sm", k, "zero polarisation")
    return out
