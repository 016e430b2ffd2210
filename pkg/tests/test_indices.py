import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loewner_shm.errors import DegenerateNormalizationError, DimensionError, UndefinedIndexError, UndefinedMacError
from loewner_shm.indices import (
    DamageReport,
    combined_csv,
    comac,
    damage_report,
    delta_omega_pct,
    mac,
    mtmac,
    pair_modes,
    scaled_comac,
)
from loewner_shm.modes import ModalSet, Mode

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, 5, elements=finite)
cvec = st.tuples(vec, vec).map(lambda t: t[0] + 1j * t[1])
nonzero_c = st.tuples(st.floats(0.1, 10), st.floats(0, 2 * np.pi)).map(lambda t: t[0] * np.exp(1j * t[1]))


def mset(freqs, shapes, channels=None):
    return ModalSet(tuple(Mode(f, 0.02, phi) for f, phi in zip(freqs, shapes)), (0.0, 1e4), channels=channels)


def eye_set(freqs):
    n = len(freqs)
    return mset(freqs, list(np.eye(n) + 0.1))


class TestMac:
    def test_self(self):
        phi = np.array([1.0, -2.0, 0.5])
        assert mac(phi, phi) == 1.0

    def test_orthogonal(self):
        assert mac([1, 0], [0, 1]) == 0.0

    def test_complex_scaling(self):
        phi = np.array([1.0, 2.0 - 1j, 0.3j])
        assert mac(phi, (2 - 3j) * phi) == pytest.approx(1.0, abs=1e-15)

    def test_errors(self):
        with pytest.raises(UndefinedMacError):
            mac([0, 0], [1, 0])
        with pytest.raises(DimensionError):
            mac([1, 0], [1, 0, 0])

    @settings(max_examples=200)
    @given(cvec, cvec)
    def test_symmetric_and_bounded(self, a, b):
        assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3)
        m = mac(a, b)
        assert m == mac(b, a)
        assert 0.0 <= m <= 1.0

    @settings(max_examples=100)
    @given(cvec, nonzero_c)
    def test_scale_invariant(self, a, c):
        assume(np.linalg.norm(a) > 1e-3)
        assert mac(a, c * a) == pytest.approx(1.0, abs=1e-12)


class TestPairing:
    def test_identity(self):
        s = eye_set([10.0, 20.0, 30.0])
        p = pair_modes(s, s)
        assert [(i, j) for i, j, _ in p.pairs] == [(0, 0), (1, 1), (2, 2)]
        assert all(m == pytest.approx(1.0) for _, _, m in p.pairs)
        assert not p.unpaired_baseline and not p.unpaired_candidate

    def test_missing_mode(self):
        base = eye_set([10.0, 20.0, 30.0])
        cand = mset([10.0, 30.0], [base[0].phi, base[2].phi])
        p = pair_modes(base, cand)
        assert p.unpaired_baseline == (1,)
        assert [(i, j) for i, j, _ in p.pairs] == [(0, 0), (2, 1)]

    def test_frequency_gate(self):
        base = eye_set([10.0])
        cand = mset([13.0], [base[0].phi])
        p = pair_modes(base, cand, f_gate_rel=0.2)
        assert not p.pairs and p.unpaired_baseline == (0,) and p.unpaired_candidate == (0,)

    def test_empty_set(self):
        with pytest.raises(UndefinedIndexError):
            pair_modes(eye_set([10.0]), ModalSet((), (0.0, 1.0)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(5, 500), min_size=1, max_size=6, unique=True), st.integers(0, 2**31 - 1))
    def test_indices_used_once(self, freqs, seed):
        rng = np.random.default_rng(seed)
        base = mset(freqs, list(rng.standard_normal((len(freqs), 5))))
        cand = mset([f * 0.99 for f in freqs], list(rng.standard_normal((len(freqs), 5))))
        p = pair_modes(base, cand)
        bi = [i for i, _, _ in p.pairs]
        ci = [j for _, j, _ in p.pairs]
        assert len(set(bi)) == len(bi) and len(set(ci)) == len(ci)
        assert sorted(bi + list(p.unpaired_baseline)) == list(range(len(freqs)))
        assert all(0 <= m <= 1 for _, _, m in p.pairs)


class TestMtmac:
    def test_identical(self):
        s = eye_set([10.0, 20.0])
        assert mtmac(s, s, pair_modes(s, s)) == pytest.approx(0.0, abs=1e-15)

    def test_frequency_term(self):
        phi = np.array([1.0, 0.5])
        base, cand = mset([9.0], [phi]), mset([10.0], [phi])
        assert mtmac(base, cand, pair_modes(base, cand)) == pytest.approx(0.05, rel=1e-12)

    def test_shape_term(self):
        base = mset([10.0], [np.array([1.0, 0.0])])
        cand = mset([10.0], [np.array([1.0, 1.0])])
        assert mtmac(base, cand, pair_modes(base, cand)) == pytest.approx(0.5, rel=1e-12)

    def test_empty_pairing(self):
        base, cand = eye_set([10.0]), eye_set([50.0])
        with pytest.raises(UndefinedIndexError):
            mtmac(base, cand, pair_modes(base, cand))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.8, 1.2), st.lists(nonzero_c, min_size=3, max_size=3))
    def test_bounded_and_scale_invariant(self, seed, shift, scales):
        rng = np.random.default_rng(seed)
        freqs = [10.0, 40.0, 90.0]
        shapes = list(rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
        pert = [s + 0.3 * rng.standard_normal(4) for s in shapes]
        base = mset(freqs, shapes)
        cand = mset([f * shift for f in freqs], pert)
        p = pair_modes(base, cand)
        assume(p.pairs)
        v = mtmac(base, cand, p)
        assert 0.0 <= v < 1.0
        rescaled = mset([f * shift for f in freqs], [c * s for c, s in zip(scales, pert)])
        assert mtmac(base, rescaled, p) == pytest.approx(v, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.booleans())
    def test_zero_only_for_identical_pairs(self, seed, change_freq):
        rng = np.random.default_rng(seed)
        shapes = list(rng.standard_normal((2, 4)))
        base = mset([10.0, 30.0], shapes)
        if change_freq:
            cand = mset([10.0, 30.3], shapes)
        else:
            cand = mset([10.0, 30.0], [shapes[0], shapes[1] + rng.standard_normal(4)])
        p = pair_modes(base, cand)
        assert mtmac(base, cand, p) > 0.0
        assert mtmac(base, base, pair_modes(base, base)) == pytest.approx(0.0, abs=1e-14)


class TestComac:
    def test_identical_real(self):
        s = mset([10.0, 20.0], [np.array([1.0, 2.0, 3.0, 4.0]), np.array([1.0, -1.0, 2.0, 0.5])])
        np.testing.assert_allclose(comac(s, s, pair_modes(s, s)), 1.0, rtol=1e-15)

    def test_zeroed_dof(self):
        phi = np.array([1.0, 2.0, 3.0, 4.0])
        damaged = phi.copy()
        damaged[3] = 0.0
        base, cand = mset([10.0], [phi]), mset([10.0], [damaged])
        c = comac(base, cand, pair_modes(base, cand))
        assert c[3] == 0.0
        np.testing.assert_allclose(c[:3], 1.0, rtol=1e-15)

    def test_complex_phase_ignored(self):
        phi = np.array([1.0, 2.0, -3.0])
        base, cand = mset([10.0], [phi]), mset([10.0], [np.exp(0.7j) * phi])
        np.testing.assert_allclose(comac(base, cand, pair_modes(base, cand)), 1.0, rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_bounded(self, seed):
        rng = np.random.default_rng(seed)
        base = mset([10.0, 20.0], list(rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))))
        cand = mset([10.1, 20.1], [m.phi + 0.2 * rng.standard_normal(5) for m in base])
        p = pair_modes(base, cand)
        assume(p.pairs)
        c = comac(base, cand, p)
        assert np.all((c >= 0) & (c <= 1))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_self_is_ones(self, seed):
        rng = np.random.default_rng(seed)
        s = mset([10.0, 20.0, 35.0], list(rng.standard_normal((3, 6))))
        np.testing.assert_allclose(comac(s, s, pair_modes(s, s)), 1.0, rtol=1e-12)


class TestScaledComac:
    def test_example(self):
        np.testing.assert_allclose(scaled_comac([1.0, 0.5, 0.0]), [0.0, 0.5, 1.0])

    def test_degenerate(self):
        with pytest.raises(DegenerateNormalizationError):
            scaled_comac([0.7, 0.7, 0.7])

    @settings(max_examples=100)
    @given(arrays(np.float64, st.integers(2, 10), elements=st.floats(0, 1)))
    def test_unit_range(self, c):
        assume(np.ptp(c) > 1e-9)
        s = scaled_comac(c)
        assert s.min() == 0.0 and s.max() == 1.0
        assert c[np.argmax(s)] <= c.min() + 1e-15


class TestDeltaOmega:
    def test_identical(self):
        s = eye_set([10.0, 20.0])
        np.testing.assert_array_equal(delta_omega_pct(s, s, pair_modes(s, s)), 0.0)

    def test_sign(self):
        phi = np.array([1.0, 0.0])
        base, cand = mset([10.0], [phi]), mset([9.9], [phi])
        assert delta_omega_pct(base, cand, pair_modes(base, cand))[0] == pytest.approx(-1.0)


class TestReport:
    def test_self_report(self):
        s = mset([10.0, 20.0], [np.array([1.0, 2.0, 3.0]), np.array([1.0, -1.0, 2.0])], channels=("a", "b", "c"))
        r = damage_report("case1", s, s)
        assert r.mtmac == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(r.comac, 1.0)
        assert r.scaled_comac is None

    def test_json_round_trip(self):
        base = mset([10.0, 20.0], [np.array([1.0, 2.0, 3.0]), np.array([1.0, -1.0, 2.0])], channels=("a", "b", "c"))
        cand = mset([9.9, 19.9], [np.array([1.0, 2.1, 2.5]), np.array([1.0, -1.2, 2.0])])
        r = damage_report("case2", base, cand)
        back = DamageReport.from_json(r.to_json())
        assert back.to_json() == r.to_json()
        assert back.min_comac_label() == r.min_comac_label()

    def test_combined_csv(self):
        base = mset([10.0], [np.array([1.0, 2.0, 3.0])], channels=("a", "b", "c"))
        cand = mset([9.0], [np.array([1.0, 2.0, 0.0])])
        text = combined_csv([damage_report("case9", base, cand)])
        header, row = text.splitlines()
        assert header == "case_id,mtmac,n_pairs,min_comac_dof,min_comac"
        assert row.startswith("case9,") and ",1,c," in row
        assert text.endswith("\n") and "\r" not in text

    def test_disjoint_bands(self):
        base, cand = eye_set([10.0]), eye_set([500.0])
        with pytest.raises(UndefinedIndexError):
            damage_report("case2", base, cand)


class TestBeamPresets:
    def test_case4_pairs_in_order(self, preset_results):
        base = preset_results["case1"]["identified"]
        cand = preset_results["case4"]["identified"]
        p = pair_modes(base, cand)
        assert len(p.pairs) == 16
        cj = [j for _, j, _ in p.pairs]
        assert [cand[j].f_hz for j in cj] == sorted(cand[j].f_hz for j in cj)

    def test_mtmac_ordering(self, preset_results):
        base = preset_results["case1"]["identified"]
        v = {c: damage_report(c, base, preset_results[c]["identified"]).mtmac for c in ("case2", "case3", "case4", "case5")}
        assert v["case2"] < v["case3"] < v["case4"] < v["case5"]

    def test_case4_shifts_negative(self, preset_results):
        base = preset_results["case1"]["identified"]
        r2 = damage_report("case2", base, preset_results["case2"]["identified"])
        r4 = damage_report("case4", base, preset_results["case4"]["identified"])
        assert np.all(r4.delta_omega_pct <= 0)
        assert np.all(np.abs(r4.delta_omega_pct) > np.abs(r2.delta_omega_pct))

    def test_case4_comac_on_damaged_element(self, preset_results):
        base = preset_results["case1"]["identified"]
        r = damage_report("case4", base, preset_results["case4"]["identified"])
        assert r.min_comac_label()[:2] in ("n1", "n2", "n3")

    def test_case5_scaled_comac_at_mass_node(self, preset_results):
        base = preset_results["case1"]["identified"]
        r = damage_report("case5", base, preset_results["case5"]["identified"])
        assert r.channels[int(np.argmax(r.scaled_comac))] in ("n2v", "n2w")
