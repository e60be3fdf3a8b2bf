"""Recovery of discrete conformational states from order tensor discrepancies.

Given per-medium anchor tensors A_j (fitted on the static domain) and
observed tensors S_j (fitted on the dynamic domain with its rigid structure),
find rotations R_i and occupancies rho_i with

    S_j ~= sum_i rho_i R_i A_j R_i^T,    sum_i rho_i = 1,

by minimizing f = sum_j ||S_j - sum_i rho_i R_i A_j R_i^T||_F^2.

A recovered rotation R_i maps the anchor into the dynamic-domain frame, so
the dynamic-domain coordinates of state i are obtained with R_i^T (see
``ensemble.assemble``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .fit import TensorFit, svd_fit
from .simulate import RdcSet
from .structure import BackboneStructure, DomainRange, build_vectors
from .tensor import (ALL_TYPES, DMAX_NH, EulerAngles, SaupeTensor, asymmetry, axis_angle,
                     euler_from_matrix, euler_matrix, szz_axis)

log = logging.getLogger(__name__)

HZ_CONVENTION = "hz = Dmax(N-H) * sqrt(f), f summed over media without dividing by the medium count"


class InfeasibleModelError(ValueError):
    """Too few alignment media for the requested number of states (needs 5m >= 4n - 1)."""


class SolverConvergenceError(RuntimeError):
    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def feasible(m: int, n: int) -> bool:
    """True when m media give at least as many equations (5m) as unknowns (4n - 1)."""
    if m < 1 or n < 1:
        raise ValueError("media and state counts must be positive")
    return 5 * m >= 4 * n - 1


def hz_scale(f: float) -> float:
    if f < 0:
        raise ValueError("objective value must be non-negative")
    return math.sqrt(f) * DMAX_NH


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple[SaupeTensor, ...]
    observed: tuple[SaupeTensor, ...]
    media: tuple[str, ...] = ()
    frame: str = "molecular"
    anchor_fits: tuple[TensorFit, ...] = ()
    observed_fits: tuple[TensorFit, ...] = ()

    def __post_init__(self):
        if len(self.anchors) != len(self.observed) or not self.anchors:
            raise ValueError("need matching, non-empty anchor and observed tensor lists")
        if not self.media:
            object.__setattr__(self, "media", tuple(f"m{j + 1}" for j in range(len(self.anchors))))

    @property
    def m(self) -> int:
        return len(self.anchors)


def fit_anchor_set(static: BackboneStructure, dynamic: BackboneStructure, rdc_sets: Sequence[RdcSet],
                   static_range=None, dynamic_range=None, types=ALL_TYPES) -> AnchorSet:
    """Fit anchor (static domain) and observed (dynamic domain) tensors per medium."""
    sr = DomainRange.of(static_range) if static_range is not None else DomainRange(static.first, static.last)
    dr = DomainRange.of(dynamic_range) if dynamic_range is not None else DomainRange(dynamic.first, dynamic.last)
    sv = build_vectors(static, types, sr)
    dv = build_vectors(dynamic, types, dr)
    af = tuple(svd_fit(sv, r) for r in rdc_sets)
    of = tuple(svd_fit(dv, r) for r in rdc_sets)
    if static.frame != dynamic.frame:
        raise ValueError(f"static frame {static.frame!r} differs from dynamic frame {dynamic.frame!r}")
    return AnchorSet(tuple(f.tensor for f in af), tuple(f.tensor for f in of),
                     tuple(r.medium for r in rdc_sets), static.frame, af, of)


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------


def _mat(t) -> np.ndarray:
    return t.matrix if isinstance(t, SaupeTensor) else np.asarray(t, dtype=float)


def predicted_average(anchors: Sequence, eulers: Sequence[EulerAngles], occupancies: Sequence[float]) -> list[SaupeTensor]:
    """Occupancy-weighted rotated anchors, one tensor per medium."""
    rho = np.asarray(occupancies, dtype=float)
    if abs(rho.sum() - 1.0) > 1e-9:
        raise ValueError("occupancies must sum to 1")
    rots = [e.matrix() for e in eulers]
    out = []
    for a in anchors:
        am = _mat(a)
        m = sum(r_ * (R @ am @ R.T) for r_, R in zip(rho, rots))
        out.append(SaupeTensor.from_matrix(m, tol=1e-6))
    return out


def split_params(params: Sequence[float], n: int) -> tuple[list[EulerAngles], np.ndarray]:
    """Flat [a1, b1, g1, ..., an, bn, gn, rho1 .. rho_{n-1}] (degrees) to angles and occupancies."""
    p = np.asarray(params, dtype=float)
    if len(p) != 4 * n - 1:
        raise ValueError(f"expected {4 * n - 1} parameters for {n} states")
    eulers = [EulerAngles(*p[3 * i:3 * i + 3]) for i in range(n)]
    rho = np.append(p[3 * n:], 1.0 - p[3 * n:].sum())
    return eulers, rho


def objective(params: Sequence[float], anchors: Sequence, observed: Sequence) -> float:
    """f = sum over media of the squared Frobenius norm of (observed - predicted)."""
    n = (len(params) + 1) // 4
    eulers, rho = split_params(params, n)
    rots = [e.matrix() for e in eulers]
    f = 0.0
    for a, s in zip(anchors, observed):
        am = _mat(a)
        d = _mat(s) - sum(r_ * (R @ am @ R.T) for r_, R in zip(rho, rots))
        f += float(np.sum(d * d))
    return f


_TRI = (0, 1, 2, 0, 0, 1), (0, 1, 2, 1, 2, 2)
_TRI_W = np.array([1.0, 1.0, 1.0, math.sqrt(2.0), math.sqrt(2.0), math.sqrt(2.0)])


def _rz(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _ry(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]), np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _rot_and_grads(a, b, g):
    za, dza = _rz(a)
    yb, dyb = _ry(b)
    zg, dzg = _rz(g)
    r = za @ yb @ zg
    return r, (dza @ yb @ zg, za @ dyb @ zg, za @ yb @ dzg)


def stick_to_simplex(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Occupancies from stick-breaking fractions u in [0, 1]^(n-1), with Jacobian."""
    k = len(u)
    n = k + 1
    rho = np.empty(n)
    jac = np.zeros((n, k))
    for i in range(n):
        ui = u[i] if i < k else 1.0
        rest = [1.0 - u[l] for l in range(i)]
        rho[i] = ui * (np.prod(rest) if rest else 1.0)
        if i < k:
            jac[i, i] = np.prod(rest) if rest else 1.0
        for l in range(i):
            others = [rest[q] for q in range(i) if q != l]
            jac[i, l] = -ui * (np.prod(others) if others else 1.0)
    return rho, jac


def simplex_to_stick(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    u = np.empty(len(rho) - 1)
    left = 1.0
    for i in range(len(rho) - 1):
        u[i] = 0.0 if left <= 1e-15 else min(1.0, max(0.0, rho[i] / left))
        left -= rho[i]
    return u


class _Problem:
    """Residuals in N-H Hz: Dmax * (upper triangle, off-diagonals times sqrt 2)."""

    def __init__(self, anchors, observed, n):
        self.A = np.array([_mat(a) for a in anchors])
        self.S = np.array([_mat(s) for s in observed])
        self.n = n
        self.m = len(self.A)

    def unpack(self, x):
        n = self.n
        rho, drho = stick_to_simplex(x[3 * n:])
        return x[:3 * n].reshape(n, 3), rho, drho

    def residuals(self, x):
        ang, rho, _ = self.unpack(x)
        pred = np.zeros_like(self.S)
        for i in range(self.n):
            r, _ = _rot_and_grads(*ang[i])
            pred += rho[i] * np.einsum("ab,jbc,dc->jad", r, self.A, r)
        d = self.S - pred
        return DMAX_NH * (d[:, _TRI[0], _TRI[1]] * _TRI_W).ravel()

    def jacobian(self, x):
        ang, rho, drho = self.unpack(x)
        n, m = self.n, self.m
        jac = np.zeros((6 * m, 4 * n - 1))
        rotated = []
        for i in range(n):
            r, grads = _rot_and_grads(*ang[i])
            ra = np.einsum("ab,jbc,dc->jad", r, self.A, r)
            rotated.append(ra)
            for k, dr in enumerate(grads):
                t = np.einsum("ab,jbc,dc->jad", dr, self.A, r)
                dm = t + np.transpose(t, (0, 2, 1))
                jac[:, 3 * i + k] = -rho[i] * (dm[:, _TRI[0], _TRI[1]] * _TRI_W).ravel()
        for q in range(n - 1):
            dm = sum(drho[i, q] * rotated[i] for i in range(n))
            jac[:, 3 * n + q] = -(dm[:, _TRI[0], _TRI[1]] * _TRI_W).ravel()
        return DMAX_NH * jac


# --------------------------------------------------------------------------
# Solutions
# --------------------------------------------------------------------------


@dataclass
class SolverConfig:
    starts: int = 64
    ftol: float = 1e-12
    max_iter: int = 2000
    phantom_floor: float = 0.05
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("need at least one start")


@dataclass
class StateSolution:
    n: int
    eulers: list[EulerAngles]
    occupancies: list[float]
    f: float
    hz_minimum: float
    diagnostics: dict = field(default_factory=dict)
    frame: str = "molecular"

    def rotations(self) -> list[np.ndarray]:
        return [e.matrix() for e in self.eulers]

    @property
    def phantom_states(self) -> list[int]:
        return list(self.diagnostics.get("phantom_states", []))

    def to_dict(self) -> dict:
        return {
            "n_states": self.n,
            "states": [
                {"alpha": e.alpha, "beta": e.beta, "gamma": e.gamma, "rho": r}
                for e, r in zip(self.eulers, self.occupancies)
            ],
            "f": self.f,
            "hz_minimum": self.hz_minimum,
            "hz_convention": HZ_CONVENTION,
            "frame": self.frame,
            "diagnostics": self.diagnostics,
        }


def canonical_solution(x: np.ndarray, n: int, f: float, diagnostics: dict, frame: str,
                       phantom_floor: float) -> StateSolution:
    ang = x[:3 * n].reshape(n, 3)
    rho, _ = stick_to_simplex(np.clip(x[3 * n:], 0.0, 1.0))
    rho = np.clip(rho, 0.0, 1.0)
    rho = rho / rho.sum()
    eulers = [euler_from_matrix(euler_matrix(*np.degrees(a))) for a in ang]
    order = sorted(range(n), key=lambda i: (-round(float(rho[i]), 12), eulers[i].as_tuple()))
    eulers = [eulers[i] for i in order]
    rho = [float(rho[i]) for i in order]
    diagnostics = dict(diagnostics)
    diagnostics["phantom_states"] = [i for i, r in enumerate(rho) if r < phantom_floor]
    return StateSolution(n, eulers, rho, f, hz_scale(f), diagnostics, frame)


def _random_start(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.uniform(-math.pi, math.pi, n)
    b = rng.uniform(0.0, math.pi, n)
    g = rng.uniform(-math.pi, math.pi, n)
    rho = rng.dirichlet(np.ones(n))
    return np.concatenate([np.column_stack([a, b, g]).ravel(), simplex_to_stick(rho)])


def solve(anchors: AnchorSet | Sequence, observed: Sequence | None = None, n: int = 2,
          config: SolverConfig | None = None, frame: str | None = None) -> StateSolution:
    """Multi-start bounded least squares over 3n Euler angles and n-1 occupancies.

    Occupancies are carried as stick-breaking fractions in [0, 1], which keeps
    every iterate on the simplex; the last occupancy is one minus the rest.
    """
    config = config or SolverConfig()
    if isinstance(anchors, AnchorSet):
        aset = anchors
        anchors, observed, frame = aset.anchors, aset.observed, frame or aset.frame
    if observed is None or len(anchors) != len(observed):
        raise ValueError("need one observed tensor per anchor")
    m = len(anchors)
    if not feasible(m, n):
        raise InfeasibleModelError(
            f"{n} states need 4n-1 = {4 * n - 1} unknowns but {m} media give only {5 * m} equations "
            f"(feasibility requires 5m >= 4n - 1)"
        )
    prob = _Problem(anchors, observed, n)
    rng = np.random.default_rng(config.seed)
    starts = [_random_start(rng, n) for _ in range(config.starts)]
    lb = np.concatenate([np.full(3 * n, -np.inf), np.zeros(n - 1)])
    ub = np.concatenate([np.full(3 * n, np.inf), np.ones(n - 1)])

    def run(x0):
        try:
            return least_squares(prob.residuals, x0, jac=prob.jacobian, bounds=(lb, ub), method="trf",
                                 ftol=config.ftol, xtol=1e-14, gtol=1e-14, max_nfev=config.max_iter)
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - defensive
            log.debug("start failed: %s", exc)
            return None

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    ok = [(k, r) for k, r in enumerate(results) if r is not None and r.status > 0 and np.all(np.isfinite(r.x))]
    diag = {"starts": config.starts, "converged": len(ok), "media": m, "seed": config.seed}
    if m == 1:
        diag["warnings"] = ["single medium: orientational degeneracies are not resolved"]
    if not ok:
        raise SolverConvergenceError("no start converged", diag)
    k, best = min(ok, key=lambda kr: (kr[1].cost, kr[0]))
    f = float(2.0 * best.cost) / DMAX_NH ** 2
    diag["best_start"] = k
    return canonical_solution(best.x, n, f, diag, frame or "molecular", config.phantom_floor)


def parsimonious_solve(anchors: AnchorSet, max_n: int = 6, noise: float = 1.0,
                       config: SolverConfig | None = None, min_n: int = 2) -> StateSolution:
    """Increase the state count until the Hz-scaled minimum reaches the noise level.

    Phantom states (occupancy under the configured floor) are removed one at a
    time by re-solving with one state fewer; the smaller model is kept when it
    still satisfies the noise criterion.
    """
    config = config or SolverConfig()
    if max_n < 2:
        raise ValueError("max_n must be at least 2")
    attempts = []
    best = None
    chosen = None
    n = min_n
    while n <= max_n and feasible(anchors.m, n):
        sol = solve(anchors, n=n, config=config)
        attempts.append({"n": n, "hz_minimum": sol.hz_minimum, "f": sol.f})
        log.info("parsimonious search: n=%d hz_minimum=%.4g", n, sol.hz_minimum)
        if best is None or sol.hz_minimum < best.hz_minimum:
            best = sol
        if sol.hz_minimum <= noise:
            chosen = sol
            break
        n += 1
    if chosen is None:
        best.diagnostics.update(attempts=attempts, satisfied=False)
        return best
    while chosen.phantom_states and chosen.n > 1 and chosen.n - 1 >= 1:
        smaller_n = chosen.n - 1
        if any(a["n"] == smaller_n for a in attempts):
            break
        sol = solve(anchors, n=smaller_n, config=config)
        attempts.append({"n": smaller_n, "hz_minimum": sol.hz_minimum, "f": sol.f, "phantom_removal": True})
        if sol.hz_minimum > noise:
            break
        chosen = sol
    chosen.diagnostics.update(attempts=attempts, satisfied=True)
    return chosen


@dataclass(frozen=True)
class DegeneracyReport:
    flagged: bool
    asymmetry: list[float]
    max_axis_angle: float
    eta_threshold: float
    angle_threshold: float

    def to_dict(self) -> dict:
        return {"flagged": self.flagged, "asymmetry": self.asymmetry, "max_szz_axis_angle_deg": self.max_axis_angle,
                "eta_threshold": self.eta_threshold, "angle_threshold_deg": self.angle_threshold}


def degeneracy_check(observed: Sequence[SaupeTensor], eta_threshold: float = 0.1,
                     angle_threshold: float = 10.0) -> DegeneracyReport:
    """Flag media whose averaged tensors all collapsed to axial symmetry about a shared axis."""
    if len(observed) < 2:
        raise ValueError("degeneracy check needs at least two media")
    eta = [asymmetry(t) for t in observed]
    axes = [szz_axis(t) for t in observed]
    worst = max(axis_angle(a, b) for i, a in enumerate(axes) for b in axes[i + 1:])
    flagged = all(e < eta_threshold for e in eta) and worst <= angle_threshold
    return DegeneracyReport(flagged, eta, worst, eta_threshold, angle_threshold)
