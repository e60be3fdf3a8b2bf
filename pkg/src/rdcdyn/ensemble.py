"""Assembly of recovered states into full structures and their validation against targets.

Occupancies are written to the B-factor column of each MODEL in the
multi-model PDB output. RDCs constrain orientation only, so the placement
of each rotated dynamic domain relative to the static domain is a
convention here (each state keeps the input dynamic domain's backbone
centroid), not a result.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .solver import StateSolution
from .structure import (RMSD_ATOMS, BackboneStructure, DomainRange, kabsch, kabsch_rmsd, translation_only_rmsd,
                        write_models)

OCCUPANCY_COLUMN = "B-factor column holds the relative occupancy of each MODEL"


class FrameMismatchError(ValueError):
    pass


@dataclass
class Ensemble:
    static: BackboneStructure
    states: list[BackboneStructure]
    occupancies: list[float]
    static_range: DomainRange
    dynamic_range: DomainRange
    origin: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != len(self.occupancies) or not self.states:
            raise ValueError("need one occupancy per state")
        if abs(sum(self.occupancies) - 1.0) > 1e-6:
            raise ValueError("occupancies must sum to 1")

    @property
    def n(self) -> int:
        return len(self.states)

    def models(self) -> list[BackboneStructure]:
        """Full structures: the shared static domain plus each state's dynamic domain."""
        out = []
        for s in self.states:
            res = sorted(self.static.residues + s.residues, key=lambda r: r.index)
            out.append(BackboneStructure(tuple(res), self.static.chain, self.static.frame))
        return out

    def to_pdb(self, path=None) -> str:
        text = f"REMARK   1 {OCCUPANCY_COLUMN}\n" + write_models(self.models(), self.occupancies)
        if path is not None:
            Path(path).write_text(text)
        return text


def assemble(static: BackboneStructure, dynamic: BackboneStructure, solution: StateSolution,
             static_range=None, dynamic_range=None, provenance: dict | None = None) -> Ensemble:
    """Rotate the rigid dynamic domain into every recovered state.

    The solver's rotation maps the anchor frame into the dynamic-domain frame,
    so coordinates are moved with its transpose. Rotation is about the
    dynamic domain's own backbone centroid, which every state therefore
    shares with the input; the static domain is left untouched.
    """
    if static.frame != dynamic.frame or static.frame != solution.frame:
        raise FrameMismatchError(
            f"frames differ: static {static.frame!r}, dynamic {dynamic.frame!r}, solution {solution.frame!r}")
    sr = DomainRange.of(static_range) if static_range is not None else DomainRange(static.first, static.last)
    dr = DomainRange.of(dynamic_range) if dynamic_range is not None else DomainRange(dynamic.first, dynamic.last)
    if any(i in dr for i in sr.residues()):
        raise ValueError("static and dynamic ranges overlap")
    st = static.select(sr)
    dyn = dynamic.select(dr)
    origin = dyn.coords(RMSD_ATOMS).mean(axis=0)
    states = [dyn.transformed(rot.T, origin=origin) for rot in solution.rotations()]
    prov = {"n_states": solution.n, "hz_minimum": solution.hz_minimum,
            "translation_constrained": False, **(provenance or {})}
    return Ensemble(st, states, list(solution.occupancies), sr, dr, origin, prov)


@dataclass
class ValidationReport:
    static_rmsd: float
    state_rmsd: list[float]
    kabsch_state_rmsd: list[float]
    occupancy_error: list[float | None]
    matching: list[int]
    passed: bool
    thresholds: dict
    upper_bound: bool = True

    def __post_init__(self):
        if self.static_rmsd < 0 or any(r < 0 for r in self.state_rmsd + self.kabsch_state_rmsd):
            raise ValueError("rmsd values must be non-negative")

    def to_dict(self) -> dict:
        return {
            "static_kabsch_rmsd": self.static_rmsd,
            "states": [
                {"target": t, "translation_only_rmsd": r, "kabsch_rmsd": k, "occupancy_error": e}
                for t, r, k, e in zip(self.matching, self.state_rmsd, self.kabsch_state_rmsd, self.occupancy_error)
            ],
            "translation_only_is_upper_bound": self.upper_bound,
            "passed": self.passed,
            "thresholds": self.thresholds,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def validate(ens: Ensemble, targets: Sequence[BackboneStructure], target_occupancies: Sequence[float] | None = None,
             rmsd_threshold: float = 2.0, occupancy_threshold: float = 0.15) -> ValidationReport:
    """Compare an ensemble with target structures holding the same domains.

    The target static domain is superimposed onto the reconstruction; the
    same transform is applied to each target, and dynamic domains are then
    compared with translation only. Reconstructed states are matched to
    targets by the permutation with minimal total rmsd. With more
    reconstructed states than targets the extras stay unmatched.
    """
    if not targets:
        raise ValueError("need at least one target state")
    for t in targets:
        for rng in (ens.static_range, ens.dynamic_range):
            if any(i not in t for i in rng.residues()):
                raise ValueError(f"target lacks residues of range {rng.start}-{rng.end}")
    ref = targets[0]
    x = ref.coords(RMSD_ATOMS, ens.static_range)
    y = ens.static.coords(RMSD_ATOMS, ens.static_range)
    if x.shape != y.shape:
        raise ValueError("static domain atoms differ between ensemble and target")
    rot, shift = kabsch(x, y)
    static_rmsd = kabsch_rmsd(ref, ens.static, ens.static_range)
    moved = [t.transformed(rot, shift=shift) for t in targets]

    n, k = ens.n, len(targets)
    tr = np.array([[translation_only_rmsd(s, t, ens.dynamic_range) for t in moved] for s in ens.states])
    kb = np.array([[kabsch_rmsd(s, t, ens.dynamic_range) for t in moved] for s in ens.states])
    if n >= k:
        # reconstructed state perm[j] is matched to target j
        perm = min(itertools.permutations(range(n), k), key=lambda p: sum(tr[p[j], j] for j in range(k)))
        matching = [-1] * n
        for j, i in enumerate(perm):
            matching[i] = j
    else:
        perm = min(itertools.permutations(range(k), n), key=lambda p: sum(tr[i, p[i]] for i in range(n)))
        matching = list(perm)
    rmsd, krmsd, occ_err = [], [], []
    for i, j in enumerate(matching):
        if j < 0:
            rmsd.append(float(tr[i].min()))
            krmsd.append(float(kb[i].min()))
            occ_err.append(None)
            continue
        rmsd.append(float(tr[i, j]))
        krmsd.append(float(kb[i, j]))
        occ_err.append(None if target_occupancies is None
                       else abs(ens.occupancies[i] - float(target_occupancies[j])))
    matched = [i for i, j in enumerate(matching) if j >= 0]
    passed = all(rmsd[i] <= rmsd_threshold for i in matched) and all(
        occ_err[i] is None or occ_err[i] <= occupancy_threshold for i in matched)
    return ValidationReport(static_rmsd, rmsd, krmsd, occ_err, matching, passed,
                            {"rmsd_angstrom": rmsd_threshold, "occupancy": occupancy_threshold})
