import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdcdyn.fit import svd_fit
from rdcdyn.scenarios import ARC_DYNAMIC, ARC_STATIC, MEDIA_ARC, arc_scenario
from rdcdyn.simulate import (DynamicsModel, RdcSet, add_noise, average_rdcs, read_rdc_csv, simulate_dynamics,
                             simulate_rdcs, write_rdc_csv, write_redcat)
from rdcdyn.structure import BackboneStructure, Residue, build_vectors, rotate_phi
from rdcdyn.tensor import ALL_TYPES, DMAX, SaupeTensor, VectorType, compute_rdc, gdo, \
    nh_weight, tensor_from_principal

S1, S2 = MEDIA_ARC
NH = VectorType.NH


def test_zero_tensor(helix40):
    r = simulate_rdcs(helix40, SaupeTensor.zero())
    assert len(r) > 0 and all(v == 0 for v in r.values.values())


def test_nh_along_z():
    n = np.zeros(3)
    res = Residue(1, "ALA", {"N": n, "H": np.array([0, 0, 1.02]), "CA": np.array([1.458, 0, 0])})
    r = simulate_rdcs(BackboneStructure((res,)), S1, {NH})
    assert r[(1, NH)] == pytest.approx(24350 * -8e-4)
    assert r[(1, NH)] == pytest.approx(-19.48)


def test_matches_oracle(helix40):
    t = tensor_from_principal(S1)
    r = simulate_rdcs(helix40, S1)
    for rec in build_vectors(helix40):
        v = rec.vector
        want = DMAX[rec.vtype] * sum(v[i] * t.matrix[i, j] * v[j] for i in range(3) for j in range(3))
        assert r[rec.key] == pytest.approx(want, abs=1e-9)
        assert r[rec.key] == pytest.approx(compute_rdc(t, v, rec.vtype), abs=1e-9)


def _set(values, medium="m1"):
    return RdcSet(medium, {(i + 1, NH): v for i, v in enumerate(values)})


class TestAverage:
    def test_single_weight(self):
        a, b = _set([1.0, 2.0]), _set([3.0, 5.0])
        assert average_rdcs([a, b], [1, 0]).values == a.values

    def test_identical(self):
        a = _set([1.5, -2.0])
        assert average_rdcs([a, a], [0.3, 0.7]).values == pytest.approx(a.values)

    def test_arithmetic(self):
        out = average_rdcs([_set([10.0]), _set([-5.0])], [0.6, 0.4])
        assert out[(1, NH)] == pytest.approx(4.0)

    def test_intersection_and_empty(self):
        a = _set([1.0, 2.0, 3.0])
        b = RdcSet("m1", {(2, NH): 4.0, (3, NH): 6.0})
        assert set(average_rdcs([a, b], [0.5, 0.5]).keys()) == {(2, NH), (3, NH)}
        with pytest.raises(ValueError):
            average_rdcs([_set([1.0]), RdcSet("m1", {(9, NH): 1.0})], [0.5, 0.5])

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            average_rdcs([_set([1.0]), _set([2.0])], [0.5, 0.6])

    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=5), st.randoms())
    @settings(max_examples=30)
    def test_permutation_invariant(self, w, rnd):
        w = np.array(w) / sum(w)
        sets = [_set(list(np.arange(4) * (k + 1.5))) for k in range(len(w))]
        order = list(range(len(w)))
        rnd.shuffle(order)
        a = average_rdcs(sets, w)
        b = average_rdcs([sets[i] for i in order], w[order])
        assert list(a.values.values()) == pytest.approx(list(b.values.values()), abs=1e-12)


class TestNoise:
    def test_zero_width(self):
        a = _set([1.0, 2.0])
        assert add_noise(a, 0.0, seed=1).values == a.values

    def test_deterministic(self):
        a = _set(list(range(50)))
        assert add_noise(a, 1.0, seed=7).values == add_noise(a, 1.0, seed=7).values
        assert add_noise(a, 1.0, seed=7).values != add_noise(a, 1.0, seed=8).values

    def test_uniform_statistics(self):
        a = _set([0.0] * 10_000)
        noisy = add_noise(a, 1.0, seed=3)
        d = np.array(list(noisy.values.values()))
        assert np.abs(d).max() <= 1.0
        assert np.abs(d).mean() == pytest.approx(0.5, abs=0.02)
        assert set(noisy.errors.values()) == {1.0}

    def test_nh_scaled_width(self):
        a = RdcSet("m1", {(1, VectorType.CN): 0.0})
        noisy = add_noise(a, 1.0, seed=0)
        assert noisy.error((1, VectorType.CN)) == pytest.approx(abs(DMAX[VectorType.CN]) / DMAX[NH])

    def test_negative(self):
        with pytest.raises(ValueError):
            add_noise(_set([1.0]), -1.0)


class TestDynamics:
    def test_model_invariants(self, helix40):
        moved = rotate_phi(helix40, 5, 20)
        with pytest.raises(ValueError):
            DynamicsModel([helix40, helix40], [0.5, 0.6], (1, 20), (25, 40))
        with pytest.raises(ValueError):
            DynamicsModel([helix40, moved], [0.5, 0.5], (1, 20), (25, 40))
        DynamicsModel([helix40, rotate_phi(helix40, 22, 20)], [0.5, 0.5], (1, 20), (25, 40))

    def test_single_state(self, helix40):
        model = DynamicsModel([helix40], [1.0], (1, 20), (25, 40))
        out = simulate_dynamics(model, MEDIA_ARC, noise=1.0, seed=4)
        for j, f in enumerate(MEDIA_ARC):
            clean = simulate_rdcs(helix40, f)
            d = np.array([out[j][k] - clean[k] for k in clean.keys()])
            assert 0 < np.abs(d).max() <= 1.0 / min(nh_weight(k[1]) for k in clean.keys())

    def test_collapsed_states(self, helix40):
        model = DynamicsModel([helix40] * 3, [0.2, 0.3, 0.5], (1, 20), (25, 40))
        out = simulate_dynamics(model, MEDIA_ARC)
        for j, f in enumerate(MEDIA_ARC):
            assert out[j].values == pytest.approx(simulate_rdcs(helix40, f).values, abs=1e-12)

    def test_static_domain_unchanged(self):
        sc = arc_scenario(60)
        out = simulate_dynamics(sc.model(), MEDIA_ARC)
        single = simulate_rdcs(sc.template, S1)
        for k in single.keys():
            if k[0] <= 69:
                assert out[0][k] == pytest.approx(single[k], abs=1e-12)

    def test_dynamic_gdo_drops(self):
        sc = arc_scenario(60)
        out = simulate_dynamics(sc.model(), MEDIA_ARC)
        st_v = build_vectors(sc.template, ALL_TYPES, ARC_STATIC)
        dy_v = build_vectors(sc.template, ALL_TYPES, ARC_DYNAMIC)
        for r in out:
            assert gdo(svd_fit(dy_v, r).tensor) < gdo(svd_fit(st_v, r).tensor)

    def test_seed_recorded(self, helix40):
        model = DynamicsModel([helix40], [1.0], (1, 20), (25, 40))
        out = simulate_dynamics(model, MEDIA_ARC, noise=0.5, seed=11)
        assert out[0].meta["seed"] == 11 and out[0].meta["noise_half_width"] == 0.5
        again = simulate_dynamics(model, MEDIA_ARC, noise=0.5, seed=11)
        assert [r.values for r in out] == [r.values for r in again]


def test_csv_round_trip(helix40, tmp_path):
    sets = [add_noise(simulate_rdcs(helix40, f, medium=f"m{j}"), 1.0, seed=j) for j, f in enumerate(MEDIA_ARC)]
    write_rdc_csv(sets, tmp_path / "r.csv")
    back = read_rdc_csv(tmp_path / "r.csv")
    assert [b.medium for b in back] == ["m0", "m1"]
    for a, b in zip(sets, back):
        assert a.values == b.values and a.errors == b.errors


def test_csv_duplicate(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("medium,residue,vector_type,value_hz,error_hz\nm1,3,N-H,1.0,\nm1,3,NH,2.0,\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_rdc_csv(p)


def test_redcat_listing(helix20):
    r = simulate_rdcs(helix20, S1, {NH})
    text = write_redcat(helix20, r)
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert len(rows) == 19
    first = rows[0].split("#")[0].split()
    assert len(first) == 8
    assert float(first[6]) == pytest.approx(r[(2, NH)], abs=1e-5)


def test_medium_required():
    with pytest.raises(ValueError):
        RdcSet("", {})
