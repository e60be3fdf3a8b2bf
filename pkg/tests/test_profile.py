import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdcdyn.profile import (Classification, Direction, DynamicProfile, FragmentMode, ProfileVerdict,
                            classify_fragment, compute_profile, detect_onset)
from rdcdyn.scenarios import ARC_HINGE, arc_scenario, uncorrelated_scenario
from rdcdyn.simulate import simulate_dynamics


def synthetic(values, start=1, noise=1.0, direction=Direction.FORWARD):
    return DynamicProfile(direction, [(start + i, float(v)) for i, v in enumerate(values)], 2, noise)


def _data(sc, noise, seed=0):
    return simulate_dynamics(sc.model(), sc.media, noise=noise, seed=seed)


class TestDetect:
    def test_flat(self):
        v = detect_onset(synthetic([0.5] * 60))
        assert v.classification is Classification.TYPICAL and v.onset is None

    def test_step(self):
        v = detect_onset(synthetic([0.5] * 49 + [3.0] * 30))
        assert v.classification is Classification.ANOMALOUS and v.onset == 50

    def test_needs_ten_points(self):
        with pytest.raises(ValueError):
            detect_onset(synthetic([0.5] * 9))

    def test_brief_spike_ignored(self):
        assert detect_onset(synthetic([0.5] * 30 + [3.0, 3.0] + [0.5] * 30)).onset is None

    def test_gradual_rise_backtracks(self):
        vals = [0.5] * 40 + list(0.5 + 0.3 * np.arange(1, 20))
        v = detect_onset(synthetic(vals))
        assert v.onset == 41
        assert v.details["trigger"] > v.onset
        assert detect_onset(synthetic(vals), backtrack=False).onset == v.details["trigger"]

    @given(st.floats(0, 5), st.integers(10, 100), st.floats(0.1, 3))
    @settings(max_examples=50)
    def test_constant_is_typical(self, level, n, noise):
        assert detect_onset(synthetic([level] * n, noise=noise)).classification is Classification.TYPICAL

    def test_verdict_invariant(self):
        with pytest.raises(ValueError):
            ProfileVerdict(Classification.TYPICAL, onset=5)
        with pytest.raises(ValueError):
            ProfileVerdict(Classification.ANOMALOUS)


class TestCompute:
    def test_noiseless_static(self, helix83):
        sc = arc_scenario(0.0)
        p = compute_profile(helix83, _data(sc, 0.0))
        assert p.rmsd.max() <= 1e-6
        assert p.residues == sorted(p.residues)

    def test_static_noise_plateau(self, helix83):
        p = compute_profile(helix83, _data(arc_scenario(0.0), 1.0))
        tail = p.rmsd[len(p.rmsd) // 2:]
        assert 0.3 <= np.median(tail) <= 1.0
        assert p.rmsd.min() >= 0
        assert detect_onset(p).classification is Classification.TYPICAL

    @pytest.mark.parametrize("angle", [60.0, 90.0])
    def test_arc_onset_both_directions(self, helix83, angle):
        data = _data(arc_scenario(angle), 1.0)
        fwd = compute_profile(helix83, data, "forward")
        bwd = compute_profile(helix83, data, "backward")
        assert bwd.residues == sorted(bwd.residues, reverse=True)
        for p in (fwd, bwd):
            v = detect_onset(p)
            assert v.classification is Classification.ANOMALOUS
            assert abs(v.onset - ARC_HINGE) <= 3

    def test_start_and_range(self, helix83):
        data = _data(arc_scenario(0.0), 0.0)
        p = compute_profile(helix83, data, start=10, rng=(5, 60))
        assert p.residues[0] > 10 and p.residues[-1] == 60
        with pytest.raises(ValueError):
            compute_profile(helix83, data, start=70, rng=(5, 60))
        with pytest.raises(ValueError):
            compute_profile(helix83, [])

    def test_rows(self, helix83):
        p = compute_profile(helix83, _data(arc_scenario(0.0), 1.0), "backward")
        assert p.to_rows()[0][0] == "backward"


class TestClassify:
    def test_rigid_arc_fragments(self, helix83):
        data = _data(arc_scenario(60), 1.0)
        assert classify_fragment(helix83, data, (73, 83)) is FragmentMode.RIGID_BODY
        assert classify_fragment(helix83, data, (1, 69)) is FragmentMode.RIGID_BODY

    def test_uncorrelated(self, helix83):
        sc = uncorrelated_scenario(seed=0)
        data = _data(sc, 1.0)
        onset = detect_onset(compute_profile(helix83, data)).onset
        assert onset is not None
        mode = classify_fragment(helix83, data, (onset + 3, helix83.last))
        assert mode is FragmentMode.UNCORRELATED

    def test_short_fragment(self, helix83):
        assert classify_fragment(helix83, _data(arc_scenario(60), 1.0), (75, 79)) is FragmentMode.UNKNOWN
