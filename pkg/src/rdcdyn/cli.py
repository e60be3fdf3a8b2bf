"""Command-line entry point: ``rdcdyn {simulate,profile,solve,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible model,
4 solver non-convergence, 5 input/output error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump_config, load_config, parse_config
from .ensemble import assemble, validate
from .fetch import FetchError, fetch_structure
from .fit import order_tensor_report
from .pipeline import case_seeds
from .profile import classify_fragment, compute_profile, detect_onset
from .simulate import DynamicsModel, RdcSet, read_rdc_csv, simulate_dynamics, write_rdc_csv
from .solver import (InfeasibleModelError, SolverConfig, SolverConvergenceError, degeneracy_check,
                     fit_anchor_set, parsimonious_solve, solve)
from .structure import (BackboneStructure, PdbParseError, apply_mutations, ideal_helix, parse_pdb,
                        read_models, read_pdb, write_models)
from .tensor import PrincipalFrame, SaupeTensor, eigendecompose, sf_projection, tensor_from_principal, write_sf_csv

log = logging.getLogger("rdcdyn")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NO_CONVERGENCE, EXIT_IO = 0, 2, 3, 4, 5


class InputError(RuntimeError):
    pass


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_structure(cfg: RunConfig, no_network: bool = False) -> BackboneStructure:
    s = cfg.structure
    try:
        if s.file:
            return read_pdb(s.file, chain=s.chain)
        if s.accession:
            return parse_pdb(fetch_structure(s.accession, s.base_url, no_network=no_network), chain=s.chain or "A")
    except (OSError, PdbParseError, FetchError) as exc:
        raise InputError(str(exc)) from exc
    return ideal_helix(s.n_residues)


def _frame_dict(f) -> dict:
    t = f if isinstance(f, SaupeTensor) else tensor_from_principal(f)
    pf = f if isinstance(f, PrincipalFrame) else eigendecompose(t)
    return {"principal": [pf.sxx, pf.syy, pf.szz, pf.alpha, pf.beta, pf.gamma], "elements": t.elements.tolist()}


def _load_rdcs(cfg: RunConfig, out: Path) -> list[RdcSet]:
    paths = [Path(p) for p in cfg.rdc_files] if cfg.rdc_files else sorted(out.glob("rdc_*.csv"))
    if not paths:
        raise InputError(f"no RDC files given and none found in {out}")
    sets = []
    for p in paths:
        try:
            sets += read_rdc_csv(p)
        except (OSError, ValueError) as exc:
            raise InputError(f"{p}: {exc}") from exc
    names = [s.medium for s in sets]
    if len(set(names)) != len(names):
        raise InputError(f"duplicate media across RDC files: {names}")
    return sets


def cmd_simulate(cfg: RunConfig, out: Path, no_network: bool = False) -> dict:
    tpl = load_structure(cfg, no_network)
    states = [apply_mutations(tpl, m) for m in cfg.model.states]
    model = DynamicsModel(states, cfg.model.occupancies, cfg.domains.static, cfg.domains.dynamic)
    frames = cfg.frames()
    sets = simulate_dynamics(model, frames, cfg.types(), noise=cfg.noise, seed=cfg.seed)
    files = []
    for s in sets:
        p = out / f"rdc_{s.medium}.csv"
        write_rdc_csv(s, p)
        files.append(p.name)
    (out / "truth_states.pdb").write_text(write_models(states, cfg.model.occupancies))
    manifest = {
        "occupancies": list(cfg.model.occupancies),
        "mutations": [[list(m) for m in st] for st in cfg.model.states],
        "media": [_frame_dict(f) for f in frames],
        "seed": cfg.seed,
        "noise_half_width": cfg.noise,
        "domains": {"static": list(cfg.domains.static), "dynamic": list(cfg.domains.dynamic)},
        "states_pdb": "truth_states.pdb",
        "rdc_files": files,
    }
    _dump(manifest, out / "truth.json")
    return {"rdc_files": files, "truth": "truth.json"}


def cmd_profile(cfg: RunConfig, out: Path, no_network: bool = False) -> dict:
    tpl = load_structure(cfg, no_network)
    sets = _load_rdcs(cfg, out)
    p = cfg.profile
    verdicts = {}
    for direction in ("forward", "backward"):
        prof = compute_profile(tpl, sets, direction, types=cfg.types(), noise=max(cfg.noise, 1e-9))
        with open(out / f"profile_{direction}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["direction", "residue", "rdc_rmsd_hz"])
            for row in prof.to_rows():
                w.writerow([row[0], row[1], f"{row[2]:.6f}"])
        v = detect_onset(prof, p.factor, p.persistence, p.spread_factor)
        if p.fragment is not None and v.onset is not None:
            v.mode = classify_fragment(tpl, sets, p.fragment, direction, noise=prof.noise, factor=p.factor,
                                       types=cfg.types())
        verdicts[direction] = v.to_dict()
    _dump(verdicts, out / "verdict.json")
    return verdicts


def _solver_config(cfg: RunConfig, seed: int) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(starts=s.starts, ftol=s.ftol, max_iter=s.max_iter, phantom_floor=s.phantom_floor,
                        seed=seed, workers=s.workers)


def _truth(cfg: RunConfig, out: Path) -> tuple[list[BackboneStructure], list[float]] | None:
    path = Path(cfg.truth) if cfg.truth else out / "truth.json"
    if not path.exists():
        return None
    try:
        manifest = json.loads(path.read_text())
        models = read_models((path.parent / manifest["states_pdb"]).read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return models, manifest["occupancies"]


def cmd_solve(cfg: RunConfig, out: Path, no_network: bool = False) -> dict:
    tpl = load_structure(cfg, no_network)
    sets = _load_rdcs(cfg, out)
    aset = fit_anchor_set(tpl, tpl, sets, cfg.domains.static, cfg.domains.dynamic, cfg.types())
    report = order_tensor_report({"static": list(aset.anchor_fits), "dynamic": list(aset.observed_fits)})
    tensors = {
        "media": list(aset.media),
        "anchor_fits": [f.to_dict() for f in aset.anchor_fits],
        "observed_fits": [f.to_dict() for f in aset.observed_fits],
        "domain_comparison": report.to_dict(),
    }
    if aset.m >= 2:
        tensors["degeneracy"] = degeneracy_check(aset.observed).to_dict()
    _dump(tensors, out / "tensors.json")
    for name, t in zip(aset.media, aset.observed):
        write_sf_csv(sf_projection(t), out / f"sf_observed_{name}.csv")

    scfg = _solver_config(cfg, cfg.seed)
    if cfg.solver.parsimonious:
        sol = parsimonious_solve(aset, max_n=cfg.solver.max_states, noise=max(cfg.noise, 1e-3), config=scfg)
        for a in sol.diagnostics.get("attempts", []):
            log.info("parsimonious attempt n=%d hz_minimum=%.4g", a["n"], a["hz_minimum"])
    else:
        truth = _truth(cfg, out)
        n = cfg.solver.n_states or (len(truth[1]) if truth else 2)
        sol = solve(aset, n=n, config=scfg)
    _dump(sol.to_dict(), out / "solution.json")
    ens = assemble(tpl, tpl, sol, cfg.domains.static, cfg.domains.dynamic, provenance={"seed": cfg.seed})
    ens.to_pdb(out / "ensemble.pdb")
    result = {"hz_minimum": sol.hz_minimum, "n_states": sol.n}
    truth = _truth(cfg, out)
    if truth is not None:
        rep = validate(ens, truth[0], truth[1], cfg.validation.rmsd_threshold, cfg.validation.occupancy_threshold)
        rep.write_json(out / "validation.json")
        result["validation_passed"] = rep.passed
    return result


SWEEP_COLUMNS = ["cell", "angle_deg", "rho_true", "rho_recovered", "state_rmsd_angstrom", "hz_minimum",
                 "n_states", "seed", "status", "message"]


def _sweep_cell(args) -> dict:
    cfg_dict, k, angle, occ, seed = args
    cfg = RunConfig.model_validate(cfg_dict)
    sw = cfg.sweep
    row = {"cell": k, "angle_deg": angle, "rho_true": ";".join(f"{r:g}" for r in occ), "seed": seed,
           "rho_recovered": "", "state_rmsd_angstrom": "", "hz_minimum": "", "message": ""}
    n = cfg.solver.n_states or len(occ)
    row["n_states"] = n
    try:
        tpl = ideal_helix(cfg.structure.n_residues) if cfg.structure.builtin else load_structure(cfg)
        muts = [[]] + [[(sw.hinge, sw.dihedral, angle * i / (len(occ) - 1))] for i in range(1, len(occ))]
        states = [apply_mutations(tpl, m) for m in muts]
        model = DynamicsModel(states, occ, cfg.domains.static, cfg.domains.dynamic)
        sets = simulate_dynamics(model, cfg.frames(), cfg.types(), noise=cfg.noise, seed=seed)
        aset = fit_anchor_set(tpl, tpl, sets, cfg.domains.static, cfg.domains.dynamic, cfg.types())
        sol = solve(aset, n=n, config=_solver_config(cfg, seed))
        ens = assemble(tpl, tpl, sol, cfg.domains.static, cfg.domains.dynamic)
        rep = validate(ens, states, occ, cfg.validation.rmsd_threshold, cfg.validation.occupancy_threshold)
        row.update(rho_recovered=";".join(f"{r:.4f}" for r in sol.occupancies),
                   state_rmsd_angstrom=";".join(f"{r:.4f}" for r in rep.state_rmsd),
                   hz_minimum=f"{sol.hz_minimum:.6g}", status="ok" if rep.passed else "failed_validation")
    except InfeasibleModelError as exc:
        row.update(status="infeasible", message=str(exc))
    except SolverConvergenceError as exc:
        row.update(status="no_convergence", message=str(exc))
    except (ValueError, InputError) as exc:
        row.update(status="error", message=str(exc))
    return row


def cmd_sweep(cfg: RunConfig, out: Path, no_network: bool = False) -> dict:
    sw = cfg.sweep
    cells = [(a, occ) for a in sw.angles for occ in sw.occupancies]
    seeds = case_seeds(cfg.seed, len(cells))
    dump = cfg.model_dump(mode="json")
    if cfg.structure.accession and not cfg.structure.builtin:
        load_structure(cfg, no_network)  # warm the cache once, before workers start
    jobs = [(dump, k, a, occ, s) for k, ((a, occ), s) in enumerate(zip(cells, seeds))]
    if sw.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(sw.workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    cell_dir = out / "cells"
    cell_dir.mkdir(exist_ok=True)
    for row in rows:
        _dump(row, cell_dir / f"cell_{row['cell']:03d}.json")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    return {"cells": len(rows), "statuses": [r["status"] for r in rows]}


COMMANDS = {"simulate": cmd_simulate, "profile": cmd_profile, "solve": cmd_solve, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdcdyn", description="RDC-based discrete-state dynamics toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--no-network", action="store_true", help="never download structures")
        p.add_argument("--parsimonious", action="store_true", help="escalate the state count until the fit reaches the noise")
        p.add_argument("--max-states", type=int, help="upper bound for --parsimonious")
        p.add_argument("--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    upd = {}
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.out is not None:
        upd["out"] = args.out
    solver = {}
    if args.parsimonious:
        solver["parsimonious"] = True
    if args.max_states is not None:
        solver["max_states"] = args.max_states
    data = cfg.model_dump(mode="json")
    data.update(upd)
    data["solver"].update(solver)
    return parse_config(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = dt.datetime.now(dt.timezone.utc)
    try:
        cfg = resolve(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.yaml").write_text(dump_config(cfg))
        result = COMMANDS[args.command](cfg, out, args.no_network)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleModelError as exc:
        print(f"infeasible model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (InputError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    meta = {"command": args.command, "version": __version__, "seed": cfg.seed,
            "started": started.isoformat(), "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
            "numpy": np.__version__}
    _dump(meta, out / "metadata.json")
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
