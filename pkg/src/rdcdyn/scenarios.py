"""Alignment media and dynamics models used by the simulated experiments."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .simulate import DynamicsModel
from .structure import BackboneStructure, DomainRange, apply_mutations, axis_rotation, ideal_helix
from .tensor import PrincipalFrame, SaupeTensor, asymmetry, axis_angle, szz_axis, tensor_from_principal

# Order tensors in principal form: (Sxx, Syy, Szz, alpha, beta, gamma).
MEDIA_ARC = (  # 2-state arc motion and DGCR8
    PrincipalFrame(3.0e-4, 5.0e-4, -8.0e-4, 0.0, 0.0, 0.0),
    PrincipalFrame(-4.0e-4, -6.0e-4, 1.0e-3, 40.0, 50.0, -60.0),
)
MEDIA_COMPLEX2 = (
    PrincipalFrame(-3.0e-4, -5.0e-4, 8.0e-4, 0.0, 0.0, 0.0),
    PrincipalFrame(2.0e-4, 5.0e-4, -7.0e-4, -40.0, -50.0, 60.0),
)
MEDIA_COMPLEX3 = (
    PrincipalFrame(3.0e-4, 5.0e-4, -8.0e-4, 0.0, 0.0, 0.0),
    PrincipalFrame(2.0e-4, 5.0e-4, -7.0e-4, -40.0, -50.0, 60.0),
    PrincipalFrame(-7.0e-4, -1.0e-4, 8.0e-4, 20.0, -40.0, 20.0),
)

PROTEIN_LENGTH = 83
ARC_HINGE = 71
ARC_STATIC = DomainRange(1, 69)
ARC_DYNAMIC = DomainRange(73, 83)
COMPLEX_HINGE = 58
COMPLEX_STATIC = DomainRange(1, 56)
COMPLEX_DYNAMIC = DomainRange(60, 83)

Mutation = tuple[int, str, float]


@dataclass
class Scenario:
    """Template structure plus per-state dihedral mutations."""

    template: BackboneStructure
    mutations: Sequence[Sequence[Mutation]]
    occupancies: Sequence[float]
    static: DomainRange
    dynamic: DomainRange
    hinge: int
    media: Sequence[PrincipalFrame] = field(default_factory=lambda: MEDIA_ARC)

    def states(self) -> list[BackboneStructure]:
        return [apply_mutations(self.template, muts) for muts in self.mutations]

    def model(self) -> DynamicsModel:
        return DynamicsModel(self.states(), list(self.occupancies), self.static, self.dynamic)


def protein_template(n_res: int = PROTEIN_LENGTH) -> BackboneStructure:
    """Ideal-helix stand-in for the 83-residue test protein."""
    return ideal_helix(n_res)


def arc_scenario(angle: float, occupancies=(0.5, 0.5), media=MEDIA_ARC,
                 template: BackboneStructure | None = None) -> Scenario:
    """Two-state jump made by rotating phi of the hinge residue by ``angle``."""
    template = template or protein_template()
    return Scenario(template, [[], [(ARC_HINGE, "phi", angle)]], occupancies,
                    ARC_STATIC, ARC_DYNAMIC, ARC_HINGE, media)


COMPLEX_STATE_MUTATIONS = (
    [],
    [(COMPLEX_HINGE, "phi", 30.0), (COMPLEX_HINGE, "psi", 30.0)],
    [(COMPLEX_HINGE, "phi", 60.0)],
)


def complex_scenario(occupancies=(0.5, 0.5), media=None, template: BackboneStructure | None = None) -> Scenario:
    """Two- or three-state motion about residue 58 (phi/psi double rotation, phi-only third state)."""
    n = len(occupancies)
    if n not in (2, 3):
        raise ValueError("complex motion is defined for two or three states")
    media = media or (MEDIA_COMPLEX2 if n == 2 else MEDIA_COMPLEX3)
    template = template or protein_template()
    return Scenario(template, list(COMPLEX_STATE_MUTATIONS[:n]), occupancies,
                    COMPLEX_STATIC, COMPLEX_DYNAMIC, COMPLEX_HINGE, media)


TWO_DOMAIN_LENGTH = 142
TWO_DOMAIN_HINGE = 110
TWO_DOMAIN_STATIC = DomainRange(17, 41)
TWO_DOMAIN_DYNAMIC = DomainRange(130, 142)


def two_domain_scenario(angle: float = 68.0, occupancies=(0.5, 0.5), media=MEDIA_ARC) -> Scenario:
    """Two fragments far apart on a long helix, joined through a linker hinge.

    Only residues 17-41 and 130-142 enter the fits. The default jump moves the
    second fragment by about 5.4 A between states.
    """
    return Scenario(ideal_helix(TWO_DOMAIN_LENGTH), [[], [(TWO_DOMAIN_HINGE, "phi", angle)]], occupancies,
                    TWO_DOMAIN_STATIC, TWO_DOMAIN_DYNAMIC, TWO_DOMAIN_HINGE, media)


UNCORRELATED_REGION = DomainRange(60, 83)


def uncorrelated_scenario(n_states: int = 5, spread: float = 30.0, region=UNCORRELATED_REGION,
                          seed: int = 0, template: BackboneStructure | None = None) -> Scenario:
    """Equal-weight ensemble where every phi/psi in ``region`` is perturbed independently.

    Perturbations are uniform in [-spread, +spread] degrees, drawn per state
    and per dihedral, so no part of the region moves as a rigid body.
    """
    region = DomainRange.of(region)
    template = template or protein_template()
    rng = np.random.default_rng(seed)
    muts = []
    for _ in range(n_states):
        state = []
        for res in region.residues():
            for angle in ("phi", "psi"):
                if angle == "psi" and res == template.last:
                    continue
                state.append((res, angle, float(rng.uniform(-spread, spread))))
        muts.append(state)
    occ = np.full(n_states, 1.0 / n_states)
    static = DomainRange(template.first, region.start - 2)
    return Scenario(template, muts, occ.tolist(), static, region, region.start, MEDIA_ARC)


def _arc_average(u: np.ndarray, angle: float, occupancies, media) -> list[SaupeTensor]:
    r = axis_rotation(u, angle)
    out = []
    for f in media:
        m = tensor_from_principal(f).matrix
        out.append(SaupeTensor.from_matrix(occupancies[0] * m + occupancies[1] * r.T @ m @ r))
    return out


def _degeneracy_score(u, angle, occupancies, media) -> float:
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    obs = _arc_average(u, angle, occupancies, media)
    eta = max(asymmetry(t) for t in obs)
    axes = [szz_axis(t) for t in obs]
    worst = max(axis_angle(a, b) for i, a in enumerate(axes) for b in axes[i + 1:])
    return eta + worst / 90.0


def find_degenerate_axis(angle: float = 90.0, occupancies=(0.5, 0.5), media=MEDIA_ARC,
                         samples: int = 4000, seed: int = 0) -> np.ndarray:
    """Unit rotation axis along which a two-state arc makes every medium's
    averaged tensor axially symmetric about one shared axis.

    Random directions are screened and the best few refined with Nelder-Mead.
    """
    return np.array(_degenerate_axis(float(angle), tuple(occupancies), tuple(media), samples, seed))


@functools.lru_cache(maxsize=16)
def _degenerate_axis(angle, occupancies, media, samples, seed) -> tuple[float, float, float]:
    rng = np.random.default_rng(seed)
    cands = rng.normal(size=(samples, 3))
    cands /= np.linalg.norm(cands, axis=1)[:, None]
    scores = np.array([_degeneracy_score(u, angle, occupancies, media) for u in cands])
    best, best_f = None, np.inf
    for u0 in cands[np.argsort(scores)[:5]]:
        res = minimize(_degeneracy_score, u0, args=(angle, occupancies, media), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
        if res.fun < best_f:
            best, best_f = res.x / np.linalg.norm(res.x), res.fun
    return tuple(float(x) for x in best)


def align_hinge(template: BackboneStructure, hinge: int, axis) -> BackboneStructure:
    """Rigidly rotate ``template`` about the hinge CA so its N->CA bond points along ``axis``."""
    r = template.residue(hinge)
    a = r["CA"] - r["N"]
    a = a / np.linalg.norm(a)
    b = np.asarray(axis, dtype=float)
    b = b / np.linalg.norm(b)
    c = np.cross(a, b)
    sin, cos = np.linalg.norm(c), float(a @ b)
    if sin < 1e-12:
        rot = np.eye(3) if cos > 0 else axis_rotation(np.cross(a, [1.0, 0.0, 0.0]) if abs(a[0]) < 0.9
                                                      else np.cross(a, [0.0, 1.0, 0.0]), 180.0)
    else:
        rot = axis_rotation(c, np.degrees(np.arctan2(sin, cos)))
    return template.transformed(rot, origin=r["CA"])


def degenerate_arc_scenario(angle: float = 90.0, occupancies=(0.5, 0.5), media=MEDIA_ARC,
                            degenerate_angle: float = 90.0) -> Scenario:
    """Arc model on a template oriented so that a ``degenerate_angle`` jump at
    50/50 collapses all media to one symmetric averaged tensor."""
    u = find_degenerate_axis(degenerate_angle, (0.5, 0.5), media)
    return arc_scenario(angle, occupancies, media, align_hinge(protein_template(), ARC_HINGE, u))
