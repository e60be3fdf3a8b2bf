"""Protein backbone structures: PDB I/O, internuclear vectors, dihedral moves, RMSD."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tensor import ALL_TYPES, VectorType

log = logging.getLogger(__name__)

BACKBONE_ATOMS = ("N", "H", "C", "O", "CA", "HA")
RMSD_ATOMS = ("N", "CA", "C")
PEPTIDE_BOND_RANGE = (1.2, 1.5)
NH_LENGTH = 1.02
CAHA_LENGTH = 1.09

_ATOM_ALIASES = {"HN": "H", "H1": "H", "HA2": "HA", "HA1": "HA"}


class PdbParseError(ValueError):
    pass


@dataclass(frozen=True)
class Residue:
    index: int
    name: str
    atoms: Mapping[str, np.ndarray]

    def has(self, *names: str) -> bool:
        return all(n in self.atoms for n in names)

    def __getitem__(self, atom: str) -> np.ndarray:
        return self.atoms[atom]


@dataclass(frozen=True)
class DomainRange:
    """Inclusive residue range."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"domain start {self.start} > end {self.end}")

    def __contains__(self, index: int) -> bool:
        return self.start <= index <= self.end

    def residues(self) -> range:
        return range(self.start, self.end + 1)

    @classmethod
    def of(cls, r) -> "DomainRange":
        if isinstance(r, DomainRange):
            return r
        a, b = r
        return cls(int(a), int(b))


@dataclass(frozen=True)
class VectorRecord:
    residue: int
    vtype: VectorType
    vector: np.ndarray
    atoms: tuple[np.ndarray, np.ndarray] | None = None
    spans: tuple[int, ...] = ()

    @property
    def key(self) -> tuple[int, VectorType]:
        return (self.residue, self.vtype)


@dataclass(frozen=True)
class BackboneStructure:
    """Ordered backbone residues of a single chain.

    ``frame`` labels the coordinate frame; structures assembled together must
    share it.
    """

    residues: tuple[Residue, ...]
    chain: str = "A"
    frame: str = "molecular"
    gaps: tuple[tuple[int, int], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        idx = [r.index for r in self.residues]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("residue indices must be strictly increasing")
        if self.gaps is None:
            object.__setattr__(self, "gaps", tuple(find_gaps(self.residues)))
        object.__setattr__(self, "_by_index", {r.index: r for r in self.residues})

    def __len__(self) -> int:
        return len(self.residues)

    def __iter__(self):
        return iter(self.residues)

    def residue(self, index: int) -> Residue:
        try:
            return self._by_index[index]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"residue {index} not in structure") from None

    def __contains__(self, index: int) -> bool:
        return index in self._by_index  # type: ignore[attr-defined]

    @property
    def indices(self) -> list[int]:
        return [r.index for r in self.residues]

    @property
    def first(self) -> int:
        return self.residues[0].index

    @property
    def last(self) -> int:
        return self.residues[-1].index

    def connected(self, i: int, j: int) -> bool:
        """True when residue ``j == i + 1`` is covalently bonded to ``i``."""
        return j == i + 1 and i in self and j in self and (i, j) not in self.gaps

    def select(self, rng: DomainRange | tuple[int, int]) -> "BackboneStructure":
        rng = DomainRange.of(rng)
        res = tuple(r for r in self.residues if r.index in rng)
        gaps = tuple(g for g in self.gaps if g[0] in rng and g[1] in rng)
        return BackboneStructure(res, self.chain, self.frame, gaps)

    def coords(self, atoms: Sequence[str] = RMSD_ATOMS, rng=None) -> np.ndarray:
        rng = DomainRange.of(rng) if rng is not None else None
        out = []
        for r in self.residues:
            if rng is not None and r.index not in rng:
                continue
            for a in atoms:
                if a not in r.atoms:
                    raise KeyError(f"residue {r.index} lacks atom {a}")
                out.append(r.atoms[a])
        return np.array(out, dtype=float).reshape(-1, 3)

    def transformed(self, rot: np.ndarray, origin=(0.0, 0.0, 0.0), shift=(0.0, 0.0, 0.0),
                    rng=None) -> "BackboneStructure":
        """Apply x -> origin + rot @ (x - origin) + shift to residues in ``rng`` (all if None)."""
        rot = np.asarray(rot, dtype=float)
        origin = np.asarray(origin, dtype=float)
        shift = np.asarray(shift, dtype=float)
        rng = DomainRange.of(rng) if rng is not None else None
        res = []
        for r in self.residues:
            if rng is None or r.index in rng:
                atoms = {k: origin + rot @ (v - origin) + shift for k, v in r.atoms.items()}
                r = Residue(r.index, r.name, atoms)
            res.append(r)
        return BackboneStructure(tuple(res), self.chain, self.frame, self.gaps)

    def with_frame(self, frame: str) -> "BackboneStructure":
        return replace(self, frame=frame)


def find_gaps(residues: Sequence[Residue]) -> list[tuple[int, int]]:
    gaps = []
    lo, hi = PEPTIDE_BOND_RANGE
    for a, b in zip(residues, residues[1:]):
        if b.index != a.index + 1:
            gaps.append((a.index, b.index))
            continue
        if a.has("C") and b.has("N"):
            d = float(np.linalg.norm(b["N"] - a["C"]))
            if not lo <= d <= hi:
                gaps.append((a.index, b.index))
        else:
            gaps.append((a.index, b.index))
    return gaps


# --------------------------------------------------------------------------
# PDB format
# --------------------------------------------------------------------------


def place_amide_h(c_prev: np.ndarray, n: np.ndarray, ca: np.ndarray,
                  length: float = NH_LENGTH) -> np.ndarray:
    """Amide proton in the C'(i-1)-N-CA plane, bisecting the external angle."""
    u = c_prev - n
    w = ca - n
    u = u / np.linalg.norm(u)
    w = w / np.linalg.norm(w)
    d = -(u + w)
    return n + length * d / np.linalg.norm(d)


def place_alpha_h(n: np.ndarray, ca: np.ndarray, c: np.ndarray,
                  length: float = CAHA_LENGTH) -> np.ndarray:
    """HA of an L-amino acid at tetrahedral geometry."""
    b = ca - n
    cc = c - ca
    a = np.cross(b, cc)
    # mirror image of the usual CB placement through the N-CA-C plane
    ha = 0.58273431 * a + 0.56802827 * b - 0.54067466 * cc
    return ca + length * ha / np.linalg.norm(ha)


def parse_pdb(text: str, chain: str | None = None, frame: str = "molecular",
              add_hydrogens: bool = True) -> BackboneStructure:
    """Backbone of one chain from PDB-format text.

    Reads the first MODEL only and ignores HETATM. With ``chain=None`` chain A
    is used when present, otherwise the first chain seen. Alternate locations
    keep the highest-occupancy copy. Missing amide H atoms are rebuilt when the
    preceding residue is connected.
    """
    records: dict[str, dict[int, dict]] = {}
    order: list[str] = []
    seen_atom = False
    for lineno, line in enumerate(text.splitlines(), 1):
        rec = line[:6]
        if rec.startswith("ENDMDL") and seen_atom:
            break
        if not rec.startswith("ATOM"):
            continue
        seen_atom = True
        try:
            name = line[12:16].strip()
            resname = line[17:20].strip()
            ch = line[21:22].strip() or "A"
            resseq = int(line[22:26])
            icode = line[26:27].strip()
            x, y, z = float(line[30:38]), float(line[38:46]), float(line[46:54])
            occ_field = line[54:60].strip()
            occ = float(occ_field) if occ_field else 1.0
        except (ValueError, IndexError) as exc:
            raise PdbParseError(f"line {lineno}: malformed ATOM record ({exc})") from None
        if icode:
            continue
        name = _ATOM_ALIASES.get(name, name)
        if name not in BACKBONE_ATOMS:
            continue
        if ch not in records:
            records[ch] = {}
            order.append(ch)
        res = records[ch].setdefault(resseq, {"name": resname, "atoms": {}, "occ": {}})
        prev = res["occ"].get(name)
        if prev is not None and prev >= occ:
            continue
        res["atoms"][name] = np.array([x, y, z])
        res["occ"][name] = occ
    if not records:
        raise PdbParseError("no ATOM records found")
    if chain is None:
        chain = "A" if "A" in records else order[0]
    if chain not in records:
        raise PdbParseError(f"chain {chain!r} not present (found {', '.join(order)})")
    residues = [
        Residue(i, d["name"], dict(d["atoms"])) for i, d in sorted(records[chain].items())
    ]
    s = BackboneStructure(tuple(residues), chain, frame)
    if add_hydrogens:
        s = _add_missing_h(s)
    return s


def _add_missing_h(s: BackboneStructure) -> BackboneStructure:
    out = []
    prev = None
    for r in s.residues:
        if ("H" not in r.atoms and r.name != "PRO" and prev is not None
                and s.connected(prev.index, r.index) and prev.has("C") and r.has("N", "CA")):
            atoms = dict(r.atoms)
            atoms["H"] = place_amide_h(prev["C"], r["N"], r["CA"])
            r = Residue(r.index, r.name, atoms)
        if "HA" not in r.atoms and r.name != "GLY" and r.has("N", "CA", "C"):
            atoms = dict(r.atoms)
            atoms["HA"] = place_alpha_h(r["N"], r["CA"], r["C"])
            r = Residue(r.index, r.name, atoms)
        out.append(r)
        prev = r
    return BackboneStructure(tuple(out), s.chain, s.frame, s.gaps)


def read_pdb(path, chain: str | None = None, **kw) -> BackboneStructure:
    return parse_pdb(Path(path).read_text(), chain=chain, **kw)


_PDB_NAMES = {"N": " N  ", "CA": " CA ", "C": " C  ", "O": " O  ", "H": " H  ", "HA": " HA "}
_ELEMENT = {"N": "N", "CA": "C", "C": "C", "O": "O", "H": "H", "HA": "H"}


def _atom_lines(s: BackboneStructure, serial: int = 1, bfactor: float = 0.0) -> list[str]:
    lines = []
    for r in s.residues:
        for a in ("N", "H", "CA", "HA", "C", "O"):
            if a not in r.atoms:
                continue
            x, y, z = r.atoms[a]
            lines.append(
                f"ATOM  {serial:5d} {_PDB_NAMES[a]} {r.name:>3s} {s.chain:1s}{r.index:4d}    "
                f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{bfactor:6.2f}          {_ELEMENT[a]:>2s}"
            )
            serial += 1
    return lines


def write_pdb(s: BackboneStructure) -> str:
    return "\n".join(_atom_lines(s) + ["TER", "END"]) + "\n"


def write_models(models: Sequence[BackboneStructure], bfactors: Sequence[float] | None = None) -> str:
    """Multi-model PDB text; ``bfactors`` fills the B-factor column per model."""
    lines = []
    for k, m in enumerate(models, 1):
        b = 0.0 if bfactors is None else float(bfactors[k - 1])
        lines.append(f"MODEL     {k:4d}")
        lines += _atom_lines(m, bfactor=b)
        lines.append("ENDMDL")
    lines.append("END")
    return "\n".join(lines) + "\n"


def read_models(text: str, chain: str | None = None, frame: str = "molecular") -> list[BackboneStructure]:
    blocks, cur = [], []
    for line in text.splitlines():
        if line.startswith("MODEL"):
            cur = []
        elif line.startswith("ENDMDL"):
            blocks.append("\n".join(cur))
            cur = []
        else:
            cur.append(line)
    if not blocks:
        return [parse_pdb(text, chain=chain, frame=frame)]
    return [parse_pdb(b, chain=chain, frame=frame, add_hydrogens=False) for b in blocks]


# --------------------------------------------------------------------------
# Ideal geometry
# --------------------------------------------------------------------------

_BOND = {"N-CA": 1.458, "CA-C": 1.525, "C-N": 1.329, "C-O": 1.231}
_ANGLE = {"N-CA-C": 111.2, "CA-C-N": 116.2, "C-N-CA": 121.7, "CA-C-O": 120.5}


def _place(a: np.ndarray, b: np.ndarray, c: np.ndarray, bond: float, angle: float,
           torsion: float) -> np.ndarray:
    """Position of d with |cd| = bond, angle bcd, torsion abcd (degrees)."""
    angle, torsion = math.radians(angle), math.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d2 = np.array([-bond * math.cos(angle),
                   bond * math.sin(angle) * math.cos(torsion),
                   bond * math.sin(angle) * math.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def build_backbone(phi: Sequence[float], psi: Sequence[float], omega: float = 180.0,
                   resname: str = "ALA", chain: str = "A", start: int = 1) -> BackboneStructure:
    """Backbone with full N, H, CA, HA, C, O from per-residue dihedrals (degrees)."""
    n_res = len(phi)
    if len(psi) != n_res:
        raise ValueError("phi and psi must have equal length")
    N = np.array([0.0, 0.0, 0.0])
    CA = np.array([_BOND["N-CA"], 0.0, 0.0])
    ang = math.radians(180.0 - _ANGLE["N-CA-C"])
    C = CA + _BOND["CA-C"] * np.array([math.cos(ang), math.sin(ang), 0.0])
    bb = [(N, CA, C)]
    for i in range(1, n_res):
        pn, pca, pc = bb[-1]
        n = _place(pn, pca, pc, _BOND["C-N"], _ANGLE["CA-C-N"], psi[i - 1])
        ca = _place(pca, pc, n, _BOND["N-CA"], _ANGLE["C-N-CA"], omega)
        c = _place(pc, n, ca, _BOND["CA-C"], _ANGLE["N-CA-C"], phi[i])
        bb.append((n, ca, c))
    residues = []
    for i, (n, ca, c) in enumerate(bb):
        atoms = {"N": n, "CA": ca, "C": c}
        if i + 1 < n_res:
            atoms["O"] = _place(bb[i + 1][0], ca, c, _BOND["C-O"], _ANGLE["CA-C-O"], 180.0)
        else:
            atoms["O"] = _place(n, ca, c, _BOND["C-O"], _ANGLE["CA-C-O"], psi[i] + 180.0)
        if i > 0:
            atoms["H"] = place_amide_h(bb[i - 1][2], n, ca)
        atoms["HA"] = place_alpha_h(n, ca, c)
        residues.append(Residue(start + i, resname, atoms))
    return BackboneStructure(tuple(residues), chain)


def ideal_helix(n_res: int = 40, phi: float = -57.0, psi: float = -47.0, **kw) -> BackboneStructure:
    """Ideal alpha-helical poly-alanine."""
    return build_backbone([phi] * n_res, [psi] * n_res, **kw)


def load_fixture() -> BackboneStructure:
    """Bundled 40-residue ideal poly-alanine helix."""
    path = Path(__file__).with_name("data") / "ideal_helix_40.pdb"
    return read_pdb(path)


# --------------------------------------------------------------------------
# Vectors and dihedrals
# --------------------------------------------------------------------------

_VECTOR_ATOMS = {
    VectorType.NH: (("N", 0), ("H", 0)),
    VectorType.CAHA: (("CA", 0), ("HA", 0)),
    VectorType.CN: (("C", 0), ("N", 1)),
    VectorType.CH: (("C", 0), ("H", 1)),
}


def build_vectors(s: BackboneStructure, types: Iterable[VectorType] = ALL_TYPES,
                  rng: DomainRange | tuple[int, int] | None = None) -> list[VectorRecord]:
    """Unit internuclear vectors keyed by (residue, type).

    C'-N and C'-H couple residue i to i+1 and are keyed by i; they are built
    only when both residues lie in ``rng`` and are connected.
    """
    types = [VectorType(t) for t in types]
    order = [t for t in VectorType if t in types]
    rng = DomainRange.of(rng) if rng is not None else DomainRange(s.first, s.last)
    out = []
    for r in s.residues:
        if r.index not in rng:
            continue
        for vt in order:
            (a1, o1), (a2, o2) = _VECTOR_ATOMS[vt]
            j = r.index + o2
            if o2:
                if j not in rng or not s.connected(r.index, j):
                    continue
                r2 = s.residue(j)
            else:
                r2 = r
            if a1 not in r.atoms or a2 not in r2.atoms:
                log.debug("residue %d: missing atoms for %s", r.index, vt.value)
                continue
            p1, p2 = r.atoms[a1], r2.atoms[a2]
            d = p2 - p1
            out.append(VectorRecord(r.index, vt, d / np.linalg.norm(d), (p1, p2),
                                    tuple(sorted({r.index, j}))))
    return out


def dihedral(p0, p1, p2, p3) -> float:
    """IUPAC dihedral angle in degrees."""
    b0 = p0 - p1
    b1 = p2 - p1
    b2 = p3 - p2
    b1n = b1 / np.linalg.norm(b1)
    v = b0 - np.dot(b0, b1n) * b1n
    w = b2 - np.dot(b2, b1n) * b1n
    x = np.dot(v, w)
    y = np.dot(np.cross(b1n, v), w)
    return math.degrees(math.atan2(y, x))


def phi_angle(s: BackboneStructure, k: int) -> float:
    return dihedral(s.residue(k - 1)["C"], s.residue(k)["N"], s.residue(k)["CA"], s.residue(k)["C"])


def psi_angle(s: BackboneStructure, k: int) -> float:
    return dihedral(s.residue(k)["N"], s.residue(k)["CA"], s.residue(k)["C"], s.residue(k + 1)["N"])


def axis_rotation(axis: np.ndarray, degrees: float) -> np.ndarray:
    """Right-handed rotation matrix about ``axis``."""
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    t = math.radians(degrees)
    k = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    return np.eye(3) + math.sin(t) * k + (1 - math.cos(t)) * (k @ k)


def _rotate_tail(s: BackboneStructure, k: int, a: str, b: str, moved_here: set[str],
                 degrees: float) -> BackboneStructure:
    r = s.residue(k)
    if not r.has(a, b):
        raise ValueError(f"residue {k} lacks atoms {a}/{b} defining the dihedral")
    pivot = r[b]
    rot = axis_rotation(r[b] - r[a], degrees)
    res = []
    for q in s.residues:
        if q.index == k:
            atoms = {n: (pivot + rot @ (x - pivot)) if n in moved_here else x for n, x in q.atoms.items()}
            q = Residue(q.index, q.name, atoms)
        elif q.index > k:
            q = Residue(q.index, q.name, {n: pivot + rot @ (x - pivot) for n, x in q.atoms.items()})
        res.append(q)
    return BackboneStructure(tuple(res), s.chain, s.frame, s.gaps)


def rotate_phi(s: BackboneStructure, residue: int, degrees: float) -> BackboneStructure:
    """Add ``degrees`` to phi of ``residue``; everything past CA moves rigidly."""
    if residue - 1 not in s or not s.residue(residue - 1).has("C"):
        raise ValueError(f"phi of residue {residue} is undefined (no preceding C')")
    return _rotate_tail(s, residue, "N", "CA", {"C", "O", "HA"}, degrees)


def rotate_psi(s: BackboneStructure, residue: int, degrees: float) -> BackboneStructure:
    """Add ``degrees`` to psi of ``residue``; everything past C' moves rigidly."""
    if residue + 1 not in s or not s.residue(residue + 1).has("N"):
        raise ValueError(f"psi of residue {residue} is undefined (no following N)")
    return _rotate_tail(s, residue, "CA", "C", {"O"}, degrees)


def apply_mutations(s: BackboneStructure, mutations: Iterable[tuple[int, str, float]]) -> BackboneStructure:
    """Apply (residue, 'phi'|'psi', degrees) rotations in order."""
    for residue, which, deg in mutations:
        if which == "phi":
            s = rotate_phi(s, int(residue), float(deg))
        elif which == "psi":
            s = rotate_psi(s, int(residue), float(deg))
        else:
            raise ValueError(f"unknown dihedral {which!r}")
    return s


# --------------------------------------------------------------------------
# RMSD
# --------------------------------------------------------------------------


def _paired_coords(a: BackboneStructure, b: BackboneStructure, rng) -> tuple[np.ndarray, np.ndarray]:
    rng = DomainRange.of(rng)
    ia = [i for i in a.indices if i in rng]
    ib = [i for i in b.indices if i in rng]
    if ia != ib:
        raise ValueError(f"structures cover different residues in {rng.start}-{rng.end}")
    if not ia:
        raise ValueError("empty residue range")
    x = a.coords(RMSD_ATOMS, rng)
    y = b.coords(RMSD_ATOMS, rng)
    if x.shape != y.shape:
        raise ValueError("mismatched atom counts")
    return x, y


def kabsch(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and translation minimizing |rot @ x + t - y|."""
    cx, cy = x.mean(axis=0), y.mean(axis=0)
    h = (x - cx).T @ (y - cy)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cy - rot @ cx


def kabsch_rmsd(a: BackboneStructure, b: BackboneStructure, rng) -> float:
    """Backbone (N, CA, C') RMSD after optimal rotation and translation."""
    x, y = _paired_coords(a, b, rng)
    rot, t = kabsch(x, y)
    d = (x @ rot.T + t) - y
    return float(np.sqrt((d * d).sum() / len(x)))


def translation_only_rmsd(a: BackboneStructure, b: BackboneStructure, rng) -> float:
    """Backbone RMSD after centroid alignment only (orientation kept)."""
    x, y = _paired_coords(a, b, rng)
    d = (x - x.mean(axis=0)) - (y - y.mean(axis=0))
    return float(np.sqrt((d * d).sum() / len(x)))
