"""Saupe order tensor algebra.

Euler convention used throughout the package: active z-y-z rotations with
angles in degrees,

    R(a, b, g) = Rz(a) @ Ry(b) @ Rz(g)

    Rz(t) = [[cos t, -sin t, 0], [sin t, cos t, 0], [0, 0, 1]]
    Ry(t) = [[cos t, 0, sin t], [0, 1, 0], [-sin t, 0, cos t]]

A tensor built from a principal frame is ``R @ diag(sxx, syy, szz) @ R.T``,
so the columns of ``R`` are the principal axes in the molecular frame.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TRACE_TOL = 1e-12
TIE_TOL = 1e-12

# Gyromagnetic ratios (1e7 rad s^-1 T^-1) and bond lengths (Angstrom) used to
# derive the dipolar constants of the non N-H vector types.
GAMMA = {"H": 26.7522, "N": -2.7126, "C": 6.7283}
BOND_LENGTH = {"C'-N": 1.33, "N-H": 1.02, "C'-H": 2.04, "CA-HA": 1.09}
DMAX_NH = 24350.0


class VectorType(str, enum.Enum):
    """Internuclear vector kinds carrying RDC observations."""

    CN = "C'-N"
    NH = "N-H"
    CH = "C'-H"
    CAHA = "CA-HA"

    @classmethod
    def parse(cls, label: str) -> "VectorType":
        key = label.strip().upper().replace("’", "'")
        aliases = {
            "C'-N": cls.CN, "CN": cls.CN, "C-N": cls.CN,
            "N-H": cls.NH, "NH": cls.NH, "HN": cls.NH,
            "C'-H": cls.CH, "CH": cls.CH, "C-H": cls.CH,
            "CA-HA": cls.CAHA, "CAHA": cls.CAHA, "HA": cls.CAHA,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown vector type {label!r}") from None


_NUCLEI = {
    VectorType.CN: ("C", "N"),
    VectorType.NH: ("N", "H"),
    VectorType.CH: ("C", "H"),
    VectorType.CAHA: ("C", "H"),
}


def _derived_dmax(vt: VectorType) -> float:
    a, b = _NUCLEI[vt]
    ref = GAMMA["N"] * GAMMA["H"] / BOND_LENGTH["N-H"] ** 3
    this = GAMMA[a] * GAMMA[b] / BOND_LENGTH[vt.value] ** 3
    return DMAX_NH * this / ref


# Editable constants table; the sign follows the gyromagnetic ratios with N-H
# taken as positive.
DMAX: dict[VectorType, float] = {vt: _derived_dmax(vt) for vt in VectorType}
DMAX[VectorType.NH] = DMAX_NH

ALL_TYPES = frozenset(VectorType)


def dmax(vt: VectorType) -> float:
    return DMAX[VectorType(vt)]


def nh_weight(vt: VectorType) -> float:
    """Factor that rescales an RDC of type ``vt`` to the N-H magnitude."""
    return abs(DMAX[VectorType.NH] / DMAX[VectorType(vt)])


@dataclass(frozen=True)
class EulerAngles:
    alpha: float
    beta: float
    gamma: float

    def matrix(self) -> np.ndarray:
        return euler_matrix(self.alpha, self.beta, self.gamma)

    def canonical(self) -> "EulerAngles":
        return euler_from_matrix(self.matrix())

    def inverse(self) -> "EulerAngles":
        return euler_from_matrix(self.matrix().T)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


IDENTITY = EulerAngles(0.0, 0.0, 0.0)


def _rz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Active z-y-z rotation matrix for angles in degrees."""
    a, b, g = np.radians([alpha, beta, gamma])
    return _rz(a) @ _ry(b) @ _rz(g)


def wrap_degrees(x: float) -> float:
    """Map an angle to [-180, 180)."""
    y = (x + 180.0) % 360.0 - 180.0
    return 0.0 if y == 0.0 else y


def euler_from_matrix(r: np.ndarray, eps: float = 1e-12) -> EulerAngles:
    """Canonical z-y-z angles (degrees) of a proper rotation matrix.

    In the gimbal-locked cases (beta = 0 or 180) gamma is set to 0.
    """
    r = np.asarray(r, dtype=float)
    cb = min(1.0, max(-1.0, r[2, 2]))
    sb = math.hypot(r[0, 2], r[1, 2])
    if sb > eps:
        beta = math.atan2(sb, cb)
        alpha = math.atan2(r[1, 2], r[0, 2])
        gamma = math.atan2(r[2, 1], -r[2, 0])
    else:
        beta = 0.0 if cb > 0 else math.pi
        alpha = math.atan2(-r[0, 1], r[1, 1])
        gamma = 0.0
    return EulerAngles(
        wrap_degrees(math.degrees(alpha)),
        math.degrees(beta),
        wrap_degrees(math.degrees(gamma)),
    )


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angle in degrees of the rotation taking ``r1`` to ``r2``."""
    c = (np.trace(np.asarray(r1).T @ np.asarray(r2)) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


@dataclass(frozen=True)
class PrincipalFrame:
    sxx: float
    syy: float
    szz: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if abs(self.sxx + self.syy + self.szz) > TRACE_TOL:
            raise ValueError(
                f"principal values must sum to zero, got {self.sxx + self.syy + self.szz:.3e}"
            )

    @property
    def euler(self) -> EulerAngles:
        return EulerAngles(self.alpha, self.beta, self.gamma)

    @property
    def values(self) -> tuple[float, float, float]:
        return (self.sxx, self.syy, self.szz)


@dataclass(frozen=True)
class SaupeTensor:
    """Symmetric traceless order tensor stored as its five free elements.

    ``szz`` is always ``-sxx - syy`` so tracelessness holds exactly.
    """

    sxx: float
    syy: float
    sxy: float
    sxz: float
    syz: float

    def __post_init__(self):
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise ValueError("tensor elements must be finite")
        if np.abs(m).max() > 1.0 / 3.0:
            ev = np.linalg.eigvalsh(m)
            if ev.min() < -1.0 or ev.max() > 1.0:
                warnings.warn("order tensor eigenvalues outside [-1, 1]", RuntimeWarning)

    @property
    def szz(self) -> float:
        return -self.sxx - self.syy

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.sxx, self.sxy, self.sxz],
                [self.sxy, self.syy, self.syz],
                [self.sxz, self.syz, self.szz],
            ]
        )

    @property
    def elements(self) -> np.ndarray:
        return np.array([self.sxx, self.syy, self.sxy, self.sxz, self.syz])

    @classmethod
    def from_elements(cls, e: Sequence[float]) -> "SaupeTensor":
        return cls(*(float(x) for x in e))

    @classmethod
    def from_matrix(cls, m: np.ndarray, tol: float = 1e-9) -> "SaupeTensor":
        """Build from a 3x3 matrix, which must be symmetric and traceless.

        ``tol`` is relative to the largest element.
        """
        m = np.asarray(m, dtype=float)
        scale = max(np.abs(m).max(), 1e-300)
        if np.abs(m - m.T).max() > tol * scale:
            raise ValueError("order tensor matrix must be symmetric")
        if abs(np.trace(m)) > tol * scale:
            raise ValueError("order tensor matrix must be traceless")
        m = 0.5 * (m + m.T)
        return cls(m[0, 0], m[1, 1], m[0, 1], m[0, 2], m[1, 2])

    @classmethod
    def zero(cls) -> "SaupeTensor":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def __add__(self, other: "SaupeTensor") -> "SaupeTensor":
        return SaupeTensor.from_elements(self.elements + other.elements)

    def __sub__(self, other: "SaupeTensor") -> "SaupeTensor":
        return SaupeTensor.from_elements(self.elements - other.elements)

    def __mul__(self, k: float) -> "SaupeTensor":
        return SaupeTensor.from_elements(self.elements * float(k))

    __rmul__ = __mul__

    def to_line(self) -> str:
        return " ".join(f"{x:.10e}" for x in self.elements)


def tensor_from_principal(frame: PrincipalFrame) -> SaupeTensor:
    r = frame.euler.matrix()
    m = r @ np.diag(frame.values) @ r.T
    return SaupeTensor.from_matrix(m)


def _orient_column(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def principal_axes(t: SaupeTensor) -> tuple[np.ndarray, np.ndarray]:
    """Canonically ordered eigenvalues (xx, yy, zz) and a right-handed axis matrix.

    Ordering is |s_zz| >= |s_yy| >= |s_xx|; magnitudes tying within 1e-12
    are ordered by signed value descending (the later slot gets the smaller
    signed value). Columns of the returned matrix are the x, y, z axes.
    """
    w, v = np.linalg.eigh(t.matrix)
    keys = [(abs(x), -x) for x in w]
    order = sorted(range(3), key=lambda i: keys[i])
    # merge near-ties in magnitude so the signed tie-break applies
    for _ in range(2):
        for a in range(2):
            i, j = order[a], order[a + 1]
            if abs(abs(w[i]) - abs(w[j])) <= TIE_TOL and w[i] < w[j]:
                order[a], order[a + 1] = j, i
    vals = w[order]
    x = _orient_column(v[:, order[0]])
    y = _orient_column(v[:, order[1]])
    z = np.cross(x, y)
    return vals, np.column_stack([x, y, z])


def eigendecompose(t: SaupeTensor) -> PrincipalFrame:
    vals, axes = principal_axes(t)
    vals = vals - vals.sum() / 3.0
    e = euler_from_matrix(axes)
    return PrincipalFrame(float(vals[0]), float(vals[1]), float(vals[2]), e.alpha, e.beta, e.gamma)


def _check_unit(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"vector must have unit length, |v| = {np.linalg.norm(v):.12f}")
    return v


def compute_rdc(t: SaupeTensor, v: Sequence[float], vt: VectorType = VectorType.NH) -> float:
    """RDC in Hz of unit vector ``v`` under tensor ``t``: Dmax * v.S.v"""
    v = _check_unit(v)
    return float(dmax(vt) * v @ t.matrix @ v)


def gdo(t: SaupeTensor) -> float:
    """General degree of order, sqrt(2/3 * sum_ij s_ij^2)."""
    m = t.matrix
    return math.sqrt(2.0 / 3.0 * float(np.sum(m * m)))


def rotate_tensor(t: SaupeTensor, e: EulerAngles) -> SaupeTensor:
    r = e.matrix()
    return SaupeTensor.from_matrix(r @ t.matrix @ r.T)


def asymmetry(t: SaupeTensor) -> float:
    """Asymmetry parameter eta = (s_xx - s_yy) / s_zz in [0, 1]."""
    vals, _ = principal_axes(t)
    if abs(vals[2]) < 1e-300:
        return 0.0
    return float(min(1.0, abs((vals[0] - vals[1]) / vals[2])))


def szz_axis(t: SaupeTensor) -> np.ndarray:
    return principal_axes(t)[1][:, 2]


def axis_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in degrees between two undirected axes (0..90)."""
    c = abs(float(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.degrees(math.acos(min(1.0, c)))


@dataclass(frozen=True)
class SFPoint:
    label: str
    longitude: float
    latitude: float
    x: float
    y: float


def sf_projection(t: SaupeTensor) -> dict[str, list[SFPoint]]:
    """Sanson-Flamsteed coordinates (degrees) of the principal axes, both directions.

    Returns ``{"Sxx": [...], "Syy": [...], "Szz": [...]}``, two points each.
    """
    _, axes = principal_axes(t)
    out: dict[str, list[SFPoint]] = {}
    for name, col in zip(("Sxx", "Syy", "Szz"), axes.T):
        pts = []
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            u = sign * col
            lat = math.degrees(math.asin(max(-1.0, min(1.0, u[2]))))
            lon = math.degrees(math.atan2(u[1], u[0])) if math.hypot(u[0], u[1]) > 1e-12 else 0.0
            x = lon * math.cos(math.radians(lat))
            pts.append(SFPoint(name + tag, lon, lat, x, lat))
        out[name] = pts
    return out


def write_sf_csv(points: dict[str, list[SFPoint]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "longitude_deg", "latitude_deg", "x_sinusoidal", "y_sinusoidal"])
        for pts in points.values():
            for p in pts:
                w.writerow([p.label, f"{p.longitude:.6f}", f"{p.latitude:.6f}", f"{p.x:.6f}", f"{p.y:.6f}"])


def read_tensor_text(text: str) -> list[SaupeTensor]:
    """Parse 5-element lines ``sxx syy sxy sxz syz``; '#' starts a comment."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 tensor elements, got {len(parts)}")
        out.append(SaupeTensor.from_elements([float(p) for p in parts]))
    return out


def write_tensor_text(tensors: Iterable[SaupeTensor]) -> str:
    lines = ["# sxx syy sxy sxz syz"]
    lines += [t.to_line() for t in tensors]
    return "\n".join(lines) + "\n"


def load_tensor_file(path) -> list[SaupeTensor]:
    return read_tensor_text(Path(path).read_text())
