"""Dynamic profiles: RDC-rmsd versus fragment length, onset detection, fragment mode.

Profiles here are computed against a supplied template structure: each
prefix of the chain is fitted with one order tensor per medium, instead of
being re-folded residue by residue.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fit import design_matrix, solve_design
from .simulate import RdcSet
from .structure import BackboneStructure, DomainRange, build_vectors
from .tensor import ALL_TYPES

TEMPLATE_NOTE = "profile computed against a fixed template structure (no fragment folding)"
MIN_RDCS_PER_MEDIUM = 8


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class Classification(str, enum.Enum):
    TYPICAL = "Typical"
    ANOMALOUS = "Anomalous"


class FragmentMode(str, enum.Enum):
    RIGID_BODY = "RigidBody"
    UNCORRELATED = "Uncorrelated"
    UNKNOWN = "Unknown"


@dataclass
class DynamicProfile:
    direction: Direction
    points: list[tuple[int, float]]
    media: int
    noise: float
    note: str = TEMPLATE_NOTE

    @property
    def residues(self) -> list[int]:
        return [p[0] for p in self.points]

    @property
    def rmsd(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_rows(self) -> list[tuple[str, int, float]]:
        return [(self.direction.value, r, v) for r, v in self.points]


@dataclass
class ProfileVerdict:
    classification: Classification
    onset: int | None = None
    mode: FragmentMode = FragmentMode.UNKNOWN
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.onset is not None) != (self.classification is Classification.ANOMALOUS):
            raise ValueError("onset must be present exactly when the profile is anomalous")

    def to_dict(self) -> dict:
        return {"classification": self.classification.value, "onset": self.onset,
                "mode": self.mode.value, "note": TEMPLATE_NOTE, **self.details}


def compute_profile(template: BackboneStructure, rdc_sets: Sequence[RdcSet], direction="forward",
                    start: int | None = None, types=ALL_TYPES, noise: float = 1.0,
                    rng: DomainRange | tuple[int, int] | None = None,
                    min_rdcs: int = MIN_RDCS_PER_MEDIUM) -> DynamicProfile:
    """Combined RDC-rmsd of per-medium tensor fits to growing prefixes of the chain.

    The chain (optionally restricted to ``rng``) is walked from ``start`` in
    the given direction. An observation joins the prefix once every residue
    it involves is in it. The combined value is the root of the
    observation-weighted mean square across media.
    """
    direction = Direction(direction)
    if not rdc_sets:
        raise ValueError("need at least one medium")
    rng = DomainRange.of(rng) if rng is not None else DomainRange(template.first, template.last)
    idx = [i for i in template.indices if i in rng]
    if direction is Direction.BACKWARD:
        idx = idx[::-1]
    if start is not None:
        if start not in idx:
            raise ValueError(f"start residue {start} not in template span")
        idx = idx[idx.index(start):]
    pos = {r: k for k, r in enumerate(idx)}
    recs = [r for r in build_vectors(template, types, rng) if all(s in pos for s in r.spans)]
    avail = np.array([max(pos[s] for s in r.spans) for r in recs])
    mats = []
    for rs in rdc_sets:
        a, d, w, keys = design_matrix(recs, rs)
        kset = set(keys)
        av = np.array([p for r, p in zip(recs, avail) if r.key in kset])
        mats.append((a, d, w, av))
    points = []
    for k, res in enumerate(idx):
        ss, nobs = 0.0, 0
        ok = True
        for a, d, w, av in mats:
            sel = av <= k
            if sel.sum() < max(min_rdcs, 5):
                ok = False
                break
            s, _ = solve_design(a[sel], d[sel], w[sel])
            r = (a[sel] @ s - d[sel]) * w[sel]
            ss += float(r @ r)
            nobs += int(sel.sum())
        if ok:
            points.append((res, math.sqrt(ss / nobs)))
    if not points:
        raise ValueError("no prefix has enough RDCs to fit a tensor")
    return DynamicProfile(direction, points, len(rdc_sets), noise)


def _plateau(vals: np.ndarray, floor: float) -> tuple[float, float]:
    med = float(np.median(vals))
    return med, max(1.4826 * float(np.median(np.abs(vals - med))), floor)


def detect_onset(p: DynamicProfile, factor: float = 2.0, persistence: int = 3,
                 spread_factor: float = 3.0, noise: float | None = None,
                 backtrack: bool = True, min_spread: float = 0.02) -> ProfileVerdict:
    """Locate the onset of dynamics in a profile.

    A trigger is the first point whose rmsd exceeds
    max(factor * noise, plateau + spread_factor * spread) and stays above it
    for ``persistence`` consecutive points; plateau and spread are the median
    and scaled MAD of the points before it, so the scan starts once
    ``persistence`` points exist to form a baseline. With ``backtrack`` the
    reported onset walks back from the trigger while each earlier point still
    sits above the band of its own predecessors, so a gradual rise is reported
    where it leaves the plateau rather than where it crosses the noise floor.
    """
    vals = p.rmsd
    if len(vals) < 10:
        raise ValueError("onset detection needs at least 10 profile points")
    noise = p.noise if noise is None else noise
    floor = factor * noise
    spread_floor = min_spread * noise
    for i in range(persistence, len(vals) - persistence + 1):
        med, spread = _plateau(vals[:i], 0.0)
        thr = max(floor, med + spread_factor * spread)
        if not np.all(vals[i:i + persistence] > thr):
            continue
        j = i
        while backtrack and j > 3:
            med, spread = _plateau(vals[:j - 1], spread_floor)
            if vals[j - 1] <= med + spread_factor * spread:
                break
            j -= 1
        return ProfileVerdict(Classification.ANOMALOUS, p.residues[j],
                              details={"threshold_hz": thr, "trigger": p.residues[i],
                                       "direction": p.direction.value})
    return ProfileVerdict(Classification.TYPICAL, details={"threshold_hz": floor, "direction": p.direction.value})


def classify_fragment(template: BackboneStructure, rdc_sets: Sequence[RdcSet], fragment,
                      direction="forward", noise: float = 1.0, factor: float = 2.0,
                      monotone_fraction: float = 0.7, types=ALL_TYPES, min_length: int = 10) -> FragmentMode:
    """Structural mode of a fragment started past the onset of dynamics.

    RigidBody when the fragment's own profile stays within ``factor * noise``;
    Uncorrelated when it ends above that level and keeps rising (non-decreasing
    steps) over at least ``monotone_fraction`` of its length.
    """
    fragment = DomainRange.of(fragment)
    if fragment.end - fragment.start + 1 < min_length:
        return FragmentMode.UNKNOWN
    try:
        p = compute_profile(template, rdc_sets, direction, types=types, noise=noise, rng=fragment)
    except ValueError:
        return FragmentMode.UNKNOWN
    vals = p.rmsd
    limit = factor * noise
    if vals.max() <= limit:
        return FragmentMode.RIGID_BODY
    steps = np.diff(vals)
    tol = 0.02 * max(float(vals.max()), 1e-12)
    rising = float(np.mean(steps >= -tol)) if len(steps) else 0.0
    span = (len(vals) - 1) / max(1, fragment.end - fragment.start)
    if vals[-1] > limit and rising >= monotone_fraction and span >= 0.5:
        return FragmentMode.UNCORRELATED
    return FragmentMode.UNKNOWN
