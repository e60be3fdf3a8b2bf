"""Order tensor estimation from assigned RDCs by SVD."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .simulate import RdcSet
from .structure import VectorRecord
from .tensor import (SaupeTensor, VectorType, asymmetry, axis_angle, dmax, eigendecompose, gdo, nh_weight,
                     szz_axis)

CONDITION_WARN = 1e4
MIN_OBS = 5


class DegenerateGeometryWarning(RuntimeWarning):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TensorFit:
    tensor: SaupeTensor
    rdc_rmsd: float
    condition: float
    n_obs: int
    warning: str | None = None
    sum_sq: float = 0.0

    def to_dict(self) -> dict:
        pf = eigendecompose(self.tensor)
        return {
            "elements": dict(zip(("sxx", "syy", "sxy", "sxz", "syz"), self.tensor.elements.tolist())),
            "principal": {"sxx": pf.sxx, "syy": pf.syy, "szz": pf.szz,
                          "alpha": pf.alpha, "beta": pf.beta, "gamma": pf.gamma},
            "gdo": gdo(self.tensor),
            "asymmetry": asymmetry(self.tensor),
            "rdc_rmsd_hz": self.rdc_rmsd,
            "condition_number": self.condition,
            "n_obs": self.n_obs,
            "warning": self.warning,
        }


def design_row(v: np.ndarray, vt: VectorType) -> np.ndarray:
    """Dmax * (x^2 - z^2, y^2 - z^2, 2xy, 2xz, 2yz)."""
    x, y, z = v
    return dmax(vt) * np.array([x * x - z * z, y * y - z * z, 2 * x * y, 2 * x * z, 2 * y * z])


def design_matrix(vectors: Sequence[VectorRecord], rdcs: RdcSet):
    """Rows, observed values, N-H scale factors and keys of the matched pairs."""
    recs = [r for r in vectors if r.key in rdcs.values]
    if not recs:
        return np.zeros((0, 5)), np.zeros(0), np.zeros(0), []
    a = np.array([design_row(r.vector, r.vtype) for r in recs])
    d = np.array([rdcs[r.key] for r in recs])
    w = np.array([nh_weight(r.vtype) for r in recs])
    return a, d, w, [r.key for r in recs]


def solve_design(a: np.ndarray, d: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """SVD pseudo-inverse solution of (w*a) s = w*d and the condition number."""
    aw = a * w[:, None]
    u, sv, vt = np.linalg.svd(aw, full_matrices=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    keep = sv > sv[0] * 1e-12
    coef = np.zeros_like(sv)
    coef[keep] = (u.T @ (d * w))[keep] / sv[keep]
    return vt.T @ coef, cond


def svd_fit(vectors: Sequence[VectorRecord], rdcs: RdcSet, weights: Mapping | None = None) -> TensorFit:
    """Least-squares order tensor from matched (vector, RDC) pairs.

    Residuals are measured on the N-H scale (each row multiplied by
    |Dmax(N-H) / Dmax(type)|), the same quantity ``rdc_rmsd`` reports, so the
    returned tensor minimizes the reported rmsd. Optional ``weights`` map
    (residue, type) to an extra per-observation factor.
    """
    a, d, w, keys = design_matrix(vectors, rdcs)
    if len(d) < MIN_OBS:
        raise InsufficientDataError(f"need at least {MIN_OBS} matched RDCs, got {len(d)}")
    wfit = w if weights is None else w * np.array([float(weights.get(k, 1.0)) for k in keys])
    s, cond = solve_design(a, d, wfit)
    resid = (a @ s - d) * w
    msg = None
    if cond > CONDITION_WARN:
        msg = f"degenerate vector geometry (condition number {cond:.3g})"
        warnings.warn(msg, DegenerateGeometryWarning, stacklevel=2)
    ss = float(resid @ resid)
    return TensorFit(SaupeTensor.from_elements(s), math.sqrt(ss / len(d)), cond, len(d), msg, ss)


def rdc_rmsd(t: SaupeTensor, vectors: Sequence[VectorRecord], rdcs: RdcSet) -> float:
    """RMS of observed minus back-calculated RDCs on the N-H scale (Hz)."""
    a, d, w, _ = design_matrix(vectors, rdcs)
    if not len(d):
        raise InsufficientDataError("no RDCs match the vectors")
    resid = (a @ t.elements - d) * w
    return float(np.sqrt(np.mean(resid ** 2)))


@dataclass(frozen=True)
class DomainComparison:
    gdo: dict[str, list[float]]
    static_domain: str
    dynamic_domains: list[str]
    axis_angles: dict[str, list[float]]
    asymmetry: dict[str, list[float]]

    def to_dict(self) -> dict:
        return {
            "gdo": self.gdo,
            "static_domain": self.static_domain,
            "dynamic_domains": self.dynamic_domains,
            "szz_axis_angle_deg": self.axis_angles,
            "asymmetry": self.asymmetry,
        }


def order_tensor_report(fits: Mapping[str, Sequence[TensorFit]]) -> DomainComparison:
    """Compare per-medium fits of several domains.

    The static domain is the one with the highest GDO summed over media.
    ``axis_angles[name][j]`` is the angle between the s_zz axes of that domain
    and the static domain in medium j.
    """
    if len(fits) < 2:
        raise ValueError("need at least two domains")
    m = {len(v) for v in fits.values()}
    if len(m) != 1 or 0 in m:
        raise ValueError("every domain needs the same non-zero number of media")
    g = {name: [gdo(f.tensor) for f in fl] for name, fl in fits.items()}
    static = max(g, key=lambda k: sum(g[k]))
    angles = {
        name: [axis_angle(szz_axis(a.tensor), szz_axis(b.tensor)) for a, b in zip(fl, fits[static])]
        for name, fl in fits.items()
    }
    eta = {name: [asymmetry(f.tensor) for f in fl] for name, fl in fits.items()}
    return DomainComparison(g, static, [k for k in fits if k != static], angles, eta)
