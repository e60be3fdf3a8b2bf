import csv
import json

import pytest
import yaml

from rdcdyn.cli import main
from rdcdyn.structure import ideal_helix, write_pdb

FAST = {"solver": {"starts": 16}}


def run(tmp_path, command, cfg=None, *extra, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump({**FAST, **(cfg or {})}))
    return main([command, "--config", str(p), *extra])


def test_simulate_profile_solve(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(tmp_path, "simulate", {"out": str(out)}) == 0
    assert sorted(p.name for p in out.glob("rdc_*.csv")) == ["rdc_m1.csv", "rdc_m2.csv"]
    truth = json.loads((out / "truth.json").read_text())
    assert truth["occupancies"] == [0.5, 0.5] and truth["seed"] == 0

    assert run(tmp_path, "profile", {"out": str(out)}) == 0
    verdict = json.loads((out / "verdict.json").read_text())
    for d in ("forward", "backward"):
        assert verdict[d]["classification"] == "Anomalous"
        assert abs(verdict[d]["onset"] - 71) <= 3
    assert (out / "profile_backward.csv").read_text().startswith("direction,residue,rdc_rmsd_hz")

    capsys.readouterr()
    assert run(tmp_path, "solve", {"out": str(out)}) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["hz_minimum"] <= 1.0 and result["validation_passed"]
    sol = json.loads((out / "solution.json").read_text())
    assert "hz_convention" in sol and len(sol["states"]) == 2
    tensors = json.loads((out / "tensors.json").read_text())
    assert tensors["domain_comparison"]["static_domain"] == "static"
    assert (out / "ensemble.pdb").exists() and (out / "validation.json").exists()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["command"] == "solve" and "started" in meta


def test_static_profile_typical(tmp_path):
    cfg = {"out": str(tmp_path / "s"), "model": {"occupancies": [1.0], "states": [[]]}}
    assert run(tmp_path, "simulate", cfg) == 0
    assert run(tmp_path, "profile", cfg) == 0
    verdict = json.loads((tmp_path / "s" / "verdict.json").read_text())
    assert {v["classification"] for v in verdict.values()} == {"Typical"}


def test_three_media_simulation(tmp_path):
    cfg = {"out": str(tmp_path / "t"), "media": "complex3", "domains": {"static": [1, 56], "dynamic": [60, 83]},
           "model": {"occupancies": [0.5, 0.3, 0.2],
                     "states": [[], [[58, "phi", 30], [58, "psi", 30]], [[58, "phi", 60]]]}}
    assert run(tmp_path, "simulate", cfg) == 0
    assert len(list((tmp_path / "t").glob("rdc_*.csv"))) == 3


def test_deterministic_outputs(tmp_path):
    digests = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        cfg = {"out": str(out)}
        assert run(tmp_path, "simulate", cfg) == 0
        assert run(tmp_path, "solve", cfg) == 0
        files = sorted(p for p in out.iterdir() if p.name != "metadata.json")
        digests.append({p.name: p.read_bytes() for p in files if p.name != "resolved_config.yaml"})
        resolved = yaml.safe_load((out / "resolved_config.yaml").read_text())
        resolved.pop("out")
        digests[-1]["config"] = resolved
    assert digests[0] == digests[1]


def test_resolved_config_reruns(tmp_path):
    out = tmp_path / "a"
    assert run(tmp_path, "simulate", {"out": str(out), "seed": 4}) == 0
    again = tmp_path / "b"
    assert main(["simulate", "--config", str(out / "resolved_config.yaml"), "--out", str(again)]) == 0
    assert (out / "rdc_m1.csv").read_bytes() == (again / "rdc_m1.csv").read_bytes()


def test_seed_flag(tmp_path):
    out = tmp_path / "s"
    assert run(tmp_path, "simulate", {"out": str(out)}, "--seed", "9") == 0
    assert json.loads((out / "truth.json").read_text())["seed"] == 9


def test_infeasible_exit(tmp_path, capsys):
    cfg = {"out": str(tmp_path / "i")}
    assert run(tmp_path, "simulate", cfg) == 0
    capsys.readouterr()
    assert run(tmp_path, "solve", {**cfg, "solver": {"starts": 4, "n_states": 3}}) == 3
    assert "5m >= 4n - 1" in capsys.readouterr().err


def test_parsimonious_logs_attempts(tmp_path):
    cfg = {"out": str(tmp_path / "p"), "noise": 0.0, "media": "complex3",
           "domains": {"static": [1, 56], "dynamic": [60, 83]},
           "model": {"occupancies": [0.5, 0.3, 0.2],
                     "states": [[], [[58, "phi", 30], [58, "psi", 30]], [[58, "phi", 60]]]}}
    assert run(tmp_path, "simulate", cfg) == 0
    assert run(tmp_path, "solve", cfg, "--parsimonious", "--max-states", "3") == 0
    sol = json.loads((tmp_path / "p" / "solution.json").read_text())
    assert [a["n"] for a in sol["diagnostics"]["attempts"]] == [2, 3] and sol["n_states"] == 3


def test_config_error_exit(tmp_path, capsys):
    assert run(tmp_path, "simulate", {"solver": {"bogus": 1}}) == 2
    assert "solver.bogus" in capsys.readouterr().err


def test_missing_rdc_exit(tmp_path, capsys):
    assert run(tmp_path, "profile", {"out": str(tmp_path / "empty")}) == 5
    assert run(tmp_path, "solve", {"out": str(tmp_path / "e2"), "rdc_files": [str(tmp_path / "nope.csv")]}) == 5
    assert "io error" in capsys.readouterr().err


def test_structure_file_and_offline_fetch(tmp_path, monkeypatch):
    pdb = tmp_path / "h.pdb"
    pdb.write_text(write_pdb(ideal_helix(83)))
    assert run(tmp_path, "simulate", {"out": str(tmp_path / "f"), "structure": {"file": str(pdb)}}) == 0
    monkeypatch.setenv("RDCDYN_CACHE", str(tmp_path / "cache"))
    code = run(tmp_path, "simulate", {"out": str(tmp_path / "n"), "structure": {"accession": "1A1Z"}},
               "--no-network")
    assert code == 5


def test_sweep(tmp_path):
    out = tmp_path / "w"
    cfg = {"out": str(out), "solver": {"starts": 16},
           "sweep": {"angles": [60.0], "occupancies": [[0.5, 0.5], [0.4, 0.3, 0.3]]}}
    assert run(tmp_path, "sweep", cfg) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [r["status"] for r in rows] == ["ok", "infeasible"]
    assert rows[1]["message"] and rows[0]["rho_recovered"]
    assert len(list((out / "cells").glob("cell_*.json"))) == 2


def test_sweep_workers_match_serial(tmp_path):
    base = {"solver": {"starts": 8}, "noise": 0.0, "sweep": {"angles": [60.0, 90.0], "occupancies": [[0.5, 0.5]]}}
    assert run(tmp_path, "sweep", {**base, "out": str(tmp_path / "a")}) == 0
    par = {**base, "out": str(tmp_path / "b"), "sweep": {**base["sweep"], "workers": 2}}
    assert run(tmp_path, "sweep", par) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_empty_sweep(tmp_path):
    out = tmp_path / "e"
    assert run(tmp_path, "sweep", {"out": str(out), "sweep": {"angles": []}}) == 0
    assert (out / "sweep.csv").read_text().strip() == ",".join(
        ["cell", "angle_deg", "rho_true", "rho_recovered", "state_rmsd_angstrom", "hz_minimum", "n_states",
         "seed", "status", "message"])


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for c in ("simulate", "profile", "solve", "sweep"):
        assert c in out
