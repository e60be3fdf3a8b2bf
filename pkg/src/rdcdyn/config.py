"""Run configuration: YAML file, validated with pydantic, every default made explicit."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import scenarios
from .tensor import PrincipalFrame, SaupeTensor, VectorType, load_tensor_file

MEDIA_PRESETS = {
    "arc": scenarios.MEDIA_ARC,
    "complex2": scenarios.MEDIA_COMPLEX2,
    "complex3": scenarios.MEDIA_COMPLEX3,
}


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StructureCfg(_Strict):
    builtin: Optional[Literal["helix"]] = "helix"
    n_residues: int = Field(scenarios.PROTEIN_LENGTH, ge=5)
    file: Optional[str] = None
    accession: Optional[str] = None
    chain: Optional[str] = None
    base_url: str = "https://files.rcsb.org/download/"

    @model_validator(mode="after")
    def _one_source(self):
        given = [x for x in (self.file, self.accession) if x]
        if len(given) > 1:
            raise ValueError("give at most one of file or accession")
        if given:
            self.builtin = None
        return self


class DomainsCfg(_Strict):
    static: tuple[int, int] = (scenarios.ARC_STATIC.start, scenarios.ARC_STATIC.end)
    dynamic: tuple[int, int] = (scenarios.ARC_DYNAMIC.start, scenarios.ARC_DYNAMIC.end)

    @field_validator("static", "dynamic")
    @classmethod
    def _ordered(cls, v):
        if v[0] > v[1]:
            raise ValueError("range start must not exceed end")
        return v

    @model_validator(mode="after")
    def _disjoint(self):
        if self.static[0] <= self.dynamic[1] and self.dynamic[0] <= self.static[1]:
            raise ValueError("static and dynamic ranges overlap")
        return self


class MediumCfg(_Strict):
    sxx: Optional[float] = None
    syy: Optional[float] = None
    szz: Optional[float] = None
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    file: Optional[str] = None

    @model_validator(mode="after")
    def _complete(self):
        vals = (self.sxx, self.syy, self.szz)
        if self.file is None and any(v is None for v in vals):
            raise ValueError("medium needs sxx, syy, szz (or a tensor file)")
        if self.file is None:
            PrincipalFrame(self.sxx, self.syy, self.szz, self.alpha, self.beta, self.gamma)
        return self


Mutation = tuple[int, Literal["phi", "psi"], float]


class ModelCfg(_Strict):
    occupancies: list[float] = [0.5, 0.5]
    states: list[list[Mutation]] = [[], [(scenarios.ARC_HINGE, "phi", 60.0)]]

    @model_validator(mode="after")
    def _shape(self):
        if len(self.states) != len(self.occupancies):
            raise ValueError("need one mutation list per occupancy")
        if any(r < 0 for r in self.occupancies) or abs(sum(self.occupancies) - 1.0) > 1e-9:
            raise ValueError("occupancies must be non-negative and sum to 1")
        return self


class SolverCfg(_Strict):
    n_states: Optional[int] = Field(None, ge=1)
    starts: int = Field(64, ge=1)
    ftol: float = 1e-12
    max_iter: int = Field(2000, ge=1)
    phantom_floor: float = 0.05
    workers: int = Field(1, ge=1)
    parsimonious: bool = False
    max_states: int = Field(6, ge=2)


class ProfileCfg(_Strict):
    factor: float = 2.0
    persistence: int = Field(3, ge=1)
    spread_factor: float = 3.0
    fragment: Optional[tuple[int, int]] = None


class ValidationCfg(_Strict):
    rmsd_threshold: float = 2.0
    occupancy_threshold: float = 0.15


class SweepCfg(_Strict):
    """Angle x occupancy grid; state i of a k-state cell rotates the hinge by angle * i / (k - 1)."""

    hinge: int = scenarios.ARC_HINGE
    dihedral: Literal["phi", "psi"] = "phi"
    angles: list[float] = [60.0, 30.0, 15.0]
    occupancies: list[list[float]] = [[0.5, 0.5], [0.6, 0.4], [0.7, 0.3], [0.8, 0.2], [0.9, 0.1]]
    workers: int = Field(1, ge=1)


class RunConfig(_Strict):
    structure: StructureCfg = StructureCfg()
    domains: DomainsCfg = DomainsCfg()
    media: Union[Literal["arc", "complex2", "complex3"], list[MediumCfg]] = "arc"
    model: ModelCfg = ModelCfg()
    vector_types: list[str] = [vt.value for vt in VectorType]
    noise: float = Field(1.0, ge=0.0)
    seed: int = Field(0, ge=0)
    rdc_files: Optional[list[str]] = None
    truth: Optional[str] = None
    solver: SolverCfg = SolverCfg()
    profile: ProfileCfg = ProfileCfg()
    validation: ValidationCfg = ValidationCfg()
    sweep: SweepCfg = SweepCfg()
    out: str = "out"

    @field_validator("vector_types")
    @classmethod
    def _types(cls, v):
        return [VectorType.parse(x).value for x in v]

    def types(self) -> list[VectorType]:
        return [VectorType(x) for x in self.vector_types]

    def frames(self, base: Path | None = None) -> list[PrincipalFrame | SaupeTensor]:
        if isinstance(self.media, str):
            return list(MEDIA_PRESETS[self.media])
        out = []
        for m in self.media:
            if m.file is not None:
                p = Path(m.file)
                out += load_tensor_file(p if p.is_absolute() or base is None else base / p)
            else:
                out.append(PrincipalFrame(m.sxx, m.syy, m.szz, m.alpha, m.beta, m.gamma))
        return out


def _format_errors(exc: ValidationError) -> str:
    """One ``field.path: message`` item per error, without pydantic's union branch tags.

    When a union field fails on every branch, the complaint from the
    preset-name branch is dropped if a structural branch also reported.
    """
    errs = []
    for err in exc.errors():
        tags = [str(x) for x in err["loc"]]
        loc = ".".join(t for t in tags if "[" not in t) or "<root>"
        errs.append((loc, any(t.startswith("literal[") for t in tags), err["msg"]))
    structural = {loc for loc, lit, _ in errs if not lit}
    lines = [f"{loc}: {msg}" for loc, lit, msg in errs
             if not (lit and any(s.startswith(loc + ".") for s in structural))]
    return "; ".join(lines)


def parse_config(data: dict | None) -> RunConfig:
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
