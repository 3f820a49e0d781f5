"""Measurement records, criterion results and their file formats."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

from .errors import UnphysicalRecord
from .spin import SpinLength

PHYS_RTOL = 1e-9


@dataclass(frozen=True, kw_only=True)
class MeasurementRecord:
    """Collective moments of N spin-j particles (units of hbar = 1)."""

    N: int
    j: SpinLength
    var_Jx: float
    mean_Jy: float
    mean_Jz: float
    second_moment_perp: float  # <J_y^2 + J_z^2>
    mean_Jx: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "j", SpinLength.of(self.j))
        if self.N < 1:
            raise UnphysicalRecord("N must be positive")
        Nj = self.Nj
        scale = max(1.0, Nj * (Nj + 1))
        tol = PHYS_RTOL * scale
        if self.var_Jx < -tol:
            raise UnphysicalRecord(f"negative variance {self.var_Jx}")
        if self.second_moment_perp > Nj * (Nj + 1) + tol:
            raise UnphysicalRecord("<J_y^2+J_z^2> exceeds Nj(Nj+1)")
        for name in ("mean_Jx", "mean_Jy", "mean_Jz"):
            v = getattr(self, name)
            if v is not None and abs(v) > Nj * (1 + PHYS_RTOL):
                raise UnphysicalRecord(f"|{name}| exceeds Nj")
        if self.second_moment_perp < self.mean_Jy**2 + self.mean_Jz**2 - tol:
            raise UnphysicalRecord("<J_y^2+J_z^2> below <J_y>^2+<J_z>^2")

    @property
    def Nj(self) -> float:
        return self.N * self.j.J

    @property
    def polarization_sq(self) -> float:
        """``<J_y>^2 + <J_z>^2``."""
        return self.mean_Jy**2 + self.mean_Jz**2

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["two_j"] = self.j.two_J
        del d["j"]
        return d


@dataclass(frozen=True, kw_only=True)
class ExtendedMeasurementRecord(MeasurementRecord):
    """Record that also carries the y and z variances."""

    var_Jy: float
    var_Jz: float


RECORD_COLUMNS = ["N", "two_j", "var_Jx", "mean_Jx", "mean_Jy", "mean_Jz", "second_moment_perp"]
EXTENDED_COLUMNS = ["var_Jy", "var_Jz"]


def _opt_float(v) -> Optional[float]:
    if v is None or v == "" or (isinstance(v, float) and math.isnan(v)):
        return None
    return float(v)


def record_from_dict(d: dict) -> MeasurementRecord:
    kw = dict(
        N=int(d["N"]),
        j=SpinLength(int(d["two_j"])),
        var_Jx=float(d["var_Jx"]),
        mean_Jy=float(d.get("mean_Jy") or 0.0),
        mean_Jz=float(d.get("mean_Jz") or 0.0),
        second_moment_perp=float(d["second_moment_perp"]),
        mean_Jx=_opt_float(d.get("mean_Jx")),
    )
    vy, vz = _opt_float(d.get("var_Jy")), _opt_float(d.get("var_Jz"))
    if vy is not None and vz is not None:
        return ExtendedMeasurementRecord(**kw, var_Jy=vy, var_Jz=vz)
    return MeasurementRecord(**kw)


def read_rows(path: str | Path) -> list[dict]:
    """Raw record rows from a ``.json`` (object or list) or ``.csv`` file."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        if isinstance(data, dict):
            data = data.get("records", [data])
        return list(data)
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_records(path: str | Path) -> list[MeasurementRecord]:
    return [record_from_dict(d) for d in read_rows(path)]


def write_records(records: Iterable[MeasurementRecord], path: str | Path) -> None:
    records = list(records)
    path = Path(path)
    rows = [r.to_dict() for r in records]
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(rows, indent=1))
        return
    cols = RECORD_COLUMNS + (EXTENDED_COLUMNS if any(isinstance(r, ExtendedMeasurementRecord) for r in records) else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: fmt(row.get(k)) for k in cols})


def fmt(x) -> str:
    """Lossless text for a number (17 significant digits for floats)."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one criterion at one producibility level k.

    ``margin`` is ``rhs - lhs`` for variance-form criteria and ``1 - xi^2``
    for parameter-form ones; a violation needs ``margin`` above the verdict
    tolerance. ``lhs``, ``rhs`` and ``margin`` are ``None`` when the
    criterion is not applicable.
    """

    criterion: str
    k: int
    applicable: bool
    lhs: Optional[float]
    rhs: Optional[float]
    violated: bool
    margin: Optional[float]
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())
