import itertools
import math

import numpy as np
import pytest

from rdcdyn.scenarios import protein_template
from rdcdyn.structure import BackboneStructure, Residue, ideal_helix, load_fixture


@pytest.fixture(scope="session")
def helix83():
    return protein_template()


@pytest.fixture(scope="session")
def helix40():
    return load_fixture()


@pytest.fixture(scope="session")
def helix20():
    return ideal_helix(20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, k=None):
    v = rng.normal(size=(k or 1, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v if k else v[0]


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def perturbed(s, rng, sigma):
    """Copy of ``s`` with isotropic Gaussian jitter on every atom."""
    res = []
    for r in s.residues:
        res.append(Residue(r.index, r.name, {k: v + rng.normal(scale=sigma, size=3) for k, v in r.atoms.items()}))
    return BackboneStructure(tuple(res), s.chain, s.frame, s.gaps)


def _quat_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quaternion_grid_rmsd(x, y, steps=9):
    """Brute-force superposition: grid over unit quaternions, then pattern search refinement."""
    xc, yc = x - x.mean(axis=0), y - y.mean(axis=0)

    def cost(q):
        d = xc @ _quat_matrix(q).T - yc
        return math.sqrt((d * d).sum() / len(x))

    axis = np.linspace(-1, 1, steps)
    best = min((np.array(q) for q in itertools.product(axis, repeat=4) if np.linalg.norm(q) > 0.2), key=cost)
    best = best / np.linalg.norm(best)
    f, h = cost(best), 0.25
    while h > 1e-9:
        moved = False
        for k in range(4):
            for sgn in (1.0, -1.0):
                q = best.copy()
                q[k] += sgn * h
                q /= np.linalg.norm(q)
                c = cost(q)
                if c < f:
                    best, f, moved = q, c, True
        if not moved:
            h /= 2
    return f


def pytest_addoption(parser):
    parser.addoption("--run-network", action="store_true", help="run tests that download real entries")


# criterion number -> (passed, one-line detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
