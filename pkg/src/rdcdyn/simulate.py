"""Synthetic RDC data: per-state back-calculation, occupancy averaging, noise."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .structure import BackboneStructure, DomainRange, build_vectors
from .tensor import ALL_TYPES, PrincipalFrame, SaupeTensor, VectorType, dmax, nh_weight, tensor_from_principal

log = logging.getLogger(__name__)

Key = tuple[int, VectorType]


@dataclass(frozen=True)
class RdcSet:
    """Assigned RDCs (Hz) of one alignment medium keyed by (residue, vector type)."""

    medium: str
    values: Mapping[Key, float]
    errors: Mapping[Key, float] | None = None
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.medium:
            raise ValueError("medium identifier must be non-empty")
        object.__setattr__(self, "values", dict(sorted(self.values.items(), key=_key_order)))
        if self.errors is not None:
            object.__setattr__(self, "errors", dict(self.errors))

    def __len__(self) -> int:
        return len(self.values)

    def keys(self):
        return self.values.keys()

    def __getitem__(self, key: Key) -> float:
        return self.values[key]

    def error(self, key: Key) -> float | None:
        return None if self.errors is None else self.errors.get(key)


def _key_order(item):
    (res, vt), _ = item
    return (res, list(VectorType).index(vt))


@dataclass
class DynamicsModel:
    """Discrete-state rigid-body dynamics: n structures with relative occupancies."""

    states: Sequence[BackboneStructure]
    occupancies: Sequence[float]
    static: DomainRange
    dynamic: DomainRange

    def __post_init__(self):
        self.static = DomainRange.of(self.static)
        self.dynamic = DomainRange.of(self.dynamic)
        rho = np.asarray(self.occupancies, dtype=float)
        if len(rho) != len(self.states) or not len(rho):
            raise ValueError("need one occupancy per state")
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError("occupancies must lie in [0, 1]")
        if abs(rho.sum() - 1.0) > 1e-9:
            raise ValueError(f"occupancies must sum to 1, got {rho.sum():.12f}")
        ref = self.states[0]
        for s in self.states[1:]:
            if s.indices != ref.indices:
                raise ValueError("states must share residue numbering")
            d = np.abs(s.coords(("N", "CA", "C"), self.static) - ref.coords(("N", "CA", "C"), self.static))
            if d.max() > 1e-6:
                raise ValueError("static domain differs between states")

    @property
    def n(self) -> int:
        return len(self.states)


def simulate_rdcs(s: BackboneStructure, frame: PrincipalFrame | SaupeTensor,
                  types: Iterable[VectorType] = ALL_TYPES, rng=None, medium: str = "m1") -> RdcSet:
    t = frame if isinstance(frame, SaupeTensor) else tensor_from_principal(frame)
    m = t.matrix
    values = {}
    for rec in build_vectors(s, types, rng):
        v = rec.vector
        values[rec.key] = float(dmax(rec.vtype) * v @ m @ v)
    return RdcSet(medium, values)


def average_rdcs(sets: Sequence[RdcSet], occupancies: Sequence[float], medium: str | None = None) -> RdcSet:
    """Occupancy-weighted average over the keys shared by every set."""
    rho = np.asarray(occupancies, dtype=float)
    if len(rho) != len(sets):
        raise ValueError("need one occupancy per RDC set")
    if abs(rho.sum() - 1.0) > 1e-9:
        raise ValueError(f"occupancies must sum to 1, got {rho.sum():.12f}")
    keys = set(sets[0].keys())
    for s in sets[1:]:
        keys &= set(s.keys())
    if not keys:
        raise ValueError("RDC sets share no keys")
    if any(len(s) != len(keys) for s in sets):
        log.info("averaging over %d shared keys", len(keys))
    values = {k: float(sum(r * s[k] for r, s in zip(rho, sets))) for k in keys}
    return RdcSet(medium or sets[0].medium, values)


def add_noise(rdcs: RdcSet, half_width: float, seed=None, nh_scaled: bool = True) -> RdcSet:
    """Perturb every value by an independent uniform draw in [-w, +w].

    With ``nh_scaled`` the half-width is in N-H-equivalent Hz, so a type
    with dipolar constant Dmax gets w = half_width * |Dmax / Dmax(N-H)|. The
    per-observation bound is recorded in ``errors``.
    """
    if half_width < 0:
        raise ValueError("noise half-width must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keys = list(rdcs.keys())
    widths = np.array([half_width / nh_weight(k[1]) if nh_scaled else half_width for k in keys])
    draws = rng.uniform(-1.0, 1.0, size=len(keys)) * widths
    values = {k: rdcs[k] + float(d) for k, d in zip(keys, draws)}
    errors = {k: float(w) for k, w in zip(keys, widths)}
    meta = dict(rdcs.meta)
    meta.update(noise_half_width=half_width, noise_seed=None if isinstance(seed, np.random.Generator) else seed)
    return RdcSet(rdcs.medium, values, errors, meta)


def medium_names(m: int) -> list[str]:
    return [f"m{j + 1}" for j in range(m)]


def simulate_dynamics(model: DynamicsModel, frames: Sequence, types: Iterable[VectorType] = ALL_TYPES,
                      noise: float = 0.0, seed: int | None = 0, nh_scaled: bool = True) -> list[RdcSet]:
    """Averaged (and optionally noisy) RDC sets, one per alignment medium.

    ``frames[j]`` is either one frame shared by all states (homogeneous
    alignment) or a sequence holding a frame per state.
    """
    types = list(types)
    streams = np.random.SeedSequence(seed).spawn(len(frames))
    out = []
    for j, (frame, ss) in enumerate(zip(frames, streams)):
        name = f"m{j + 1}"
        per_state = list(frame) if isinstance(frame, (list, tuple)) else [frame] * model.n
        if len(per_state) != model.n:
            raise ValueError(f"medium {name}: need one frame per state")
        sets = [simulate_rdcs(s, f, types, medium=name) for s, f in zip(model.states, per_state)]
        avg = average_rdcs(sets, model.occupancies, name)
        if noise > 0:
            avg = add_noise(avg, noise, np.random.default_rng(ss), nh_scaled=nh_scaled)
        meta = dict(avg.meta)
        meta.update(seed=seed, noise_half_width=noise)
        out.append(RdcSet(avg.medium, avg.values, avg.errors, meta))
    return out


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

CSV_HEADER = ["medium", "residue", "vector_type", "value_hz", "error_hz"]


def write_rdc_csv(sets: RdcSet | Sequence[RdcSet], path) -> None:
    sets = [sets] if isinstance(sets, RdcSet) else list(sets)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s in sets:
            for k, v in s.values.items():
                err = s.error(k)
                w.writerow([s.medium, k[0], k[1].value, repr(float(v)), "" if err is None else repr(float(err))])


def read_rdc_csv(path) -> list[RdcSet]:
    values: dict[str, dict] = {}
    errors: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            m = row["medium"]
            key = (int(row["residue"]), VectorType.parse(row["vector_type"]))
            if key in values.setdefault(m, {}):
                raise ValueError(f"{path}: duplicate observation {m} {key[0]} {key[1].value}")
            values[m][key] = float(row["value_hz"])
            if row.get("error_hz"):
                errors.setdefault(m, {})[key] = float(row["error_hz"])
    return [RdcSet(m, v, errors.get(m)) for m, v in values.items()]


def write_redcat(s: BackboneStructure, rdcs: RdcSet, path=None, default_error: float = 1.0) -> str:
    """REDCAT-style listing: x1 y1 z1 x2 y2 z2 rdc error, one vector per line."""
    lines = [f"# medium {rdcs.medium}: x1 y1 z1 x2 y2 z2 rdc_hz error_hz  (residue type)"]
    recs = {r.key: r for r in build_vectors(s, {k[1] for k in rdcs.keys()})}
    for k, v in rdcs.values.items():
        rec = recs.get(k)
        if rec is None:
            continue
        (a, b) = rec.atoms
        err = rdcs.error(k)
        err = default_error if err is None else err
        lines.append(
            " ".join(f"{x:9.4f}" for x in (*a, *b)) + f" {v:11.5f} {err:8.4f}  # {k[0]} {k[1].value}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
