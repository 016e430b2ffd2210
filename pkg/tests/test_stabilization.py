import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BAND
from loewner_shm.indices import mac
from loewner_shm.modes import ModalSet, Mode
from loewner_shm.stabilization import (
    Flag,
    Tolerances,
    build_diagram,
    classify,
    consolidate,
    sweep,
)

PHI = np.array([1.0, 0.5, -0.25, 0.1])


def mset(*fz, phi=PHI, order=None):
    modes = tuple(Mode(f, z, phi if not callable(phi) else phi(i)) for i, (f, z) in enumerate(fz))
    return ModalSet(modes, (0.0, 1e4), order=order)


def shape_with_mac(target):
    """A shape whose MAC against PHI equals ``target``."""
    u = PHI / np.linalg.norm(PHI)
    e = np.array([0.0, 1.0, 0.0, 0.0])
    w = e - (e @ u) * u
    w /= np.linalg.norm(w)
    return np.sqrt(target) * u + np.sqrt(1 - target) * w


class TestClassify:
    def test_identical_sets_all_stable(self):
        s = mset((10.0, 0.02), (25.0, 0.02), (80.0, 0.03))
        assert classify(s, s) == [Flag.STABLE] * 3

    def test_frequency_shift(self):
        assert classify(mset((10.0, 0.02)), mset((11.0, 0.02))) == [Flag.UNSTABLE_FREQUENCY]

    def test_damping_shift(self):
        assert classify(mset((10.0, 0.02)), mset((10.0, 0.03))) == [Flag.UNSTABLE_DAMPING]

    def test_shape_mismatch(self):
        cur = mset((10.0, 0.02), phi=shape_with_mac(0.90))
        assert mac(cur[0].phi, PHI) == pytest.approx(0.90)
        assert classify(mset((10.0, 0.02)), cur, Tolerances(mac_min=0.95)) == [Flag.UNSTABLE_SHAPE]

    def test_frequency_checked_before_damping(self):
        assert classify(mset((10.0, 0.02)), mset((12.0, 0.5))) == [Flag.UNSTABLE_FREQUENCY]

    def test_surplus_mode_is_new(self):
        flags = classify(mset((10.0, 0.02)), mset((10.0, 0.02), (50.0, 0.02)))
        assert flags == [Flag.STABLE, Flag.NEW]

    def test_previous_mode_used_once(self):
        flags = classify(mset((10.0, 0.02)), mset((10.0, 0.02), (10.001, 0.02)))
        assert flags.count(Flag.STABLE) == 1

    def test_stranded_mode_rematched(self):
        # greedy alone would give the 100.45 Hz pole the closer neighbour and strand the 100.8 Hz one
        prev = mset((100.0, 0.02), (100.8, 0.03))
        cur = mset((100.45, 0.02), (100.8, 0.03))
        assert classify(prev, cur, Tolerances(dzeta_rel=0.5)) == [Flag.STABLE, Flag.STABLE]

    def test_tolerances_positive(self):
        with pytest.raises(ValueError):
            Tolerances(df_rel=0.0)


freq_lists = st.lists(st.tuples(st.floats(10.0, 12.0), st.floats(0.01, 0.03)), min_size=1, max_size=6)


class TestInvariants:
    @settings(max_examples=200, deadline=None)
    @given(freq_lists, freq_lists, st.floats(1.0, 20.0), st.floats(1.0, 20.0), st.floats(0.5, 1.0))
    def test_loosening_never_loses_stable_flags(self, a, b, kf, kz, kmac):
        prev, cur = mset(*a), mset(*b)
        tight = Tolerances(0.005, 0.05, 0.95)
        loose = Tolerances(0.005 * kf, 0.05 * kz, 0.95 * kmac)
        n_tight = classify(prev, cur, tight).count(Flag.STABLE)
        n_loose = classify(prev, cur, loose).count(Flag.STABLE)
        assert n_loose >= n_tight

    @settings(max_examples=100, deadline=None)
    @given(freq_lists, freq_lists)
    def test_stable_matches_within_tolerance(self, a, b):
        tol = Tolerances()
        prev, cur = mset(*a), mset(*b)
        d = build_diagram([(2, prev, None), (4, cur, None)], tol)
        e = d.entries[1]
        used = [m for m in e.matches if m is not None]
        assert len(used) == len(set(used))
        for cm, flag, mt in zip(e.modes, e.flags, e.matches):
            assert (flag is Flag.STABLE) == (mt is not None)
            if mt is not None:
                pm = prev[mt]
                assert abs(cm.f_hz - pm.f_hz) / pm.f_hz <= tol.df_rel
                assert abs(cm.zeta - pm.zeta) / pm.zeta <= tol.dzeta_rel

    @settings(max_examples=100, deadline=None)
    @given(st.lists(freq_lists, min_size=1, max_size=6), st.floats(20.0, 30.0))
    def test_appending_unstable_entry_keeps_consolidation(self, sets, f_far):
        orders = [(2 * (i + 1), mset(*s), None) for i, s in enumerate(sets)]
        base = consolidate(build_diagram(orders))
        # every pole at the new order is far away in frequency from the previous order
        extra = (2 * (len(sets) + 1), mset((f_far, 0.02), (f_far * 1.5, 0.02)), None)
        grown = build_diagram(orders + [extra])
        assert all(f is not Flag.STABLE for f in grown.entries[-1].flags)
        assert consolidate(grown).to_json() == base.to_json()

    @settings(max_examples=50, deadline=None)
    @given(freq_lists, freq_lists)
    def test_classify_is_pure(self, a, b):
        prev, cur = mset(*a), mset(*b)
        assert classify(prev, cur) == classify(prev, cur)


class TestDiagram:
    def test_single_order_all_new(self):
        d = build_diagram([(24, mset((10.0, 0.02), (20.0, 0.02)), None)])
        assert d.entries[0].flags == (Flag.NEW, Flag.NEW)

    def test_one_order_consolidates_to_empty(self):
        d = build_diagram([(24, mset((10.0, 0.02)), None)])
        assert len(consolidate(d)) == 0

    def test_entries_sorted(self):
        d = build_diagram([(8, mset((10.0, 0.02)), None), (4, mset((10.0, 0.02)), None)])
        assert [e.order for e in d.entries] == [4, 8]

    def test_streak_threshold(self):
        # 10 Hz lives at five orders (four stable flags), 40 Hz at three (two stable flags)
        sets = []
        for k, o in enumerate(range(2, 12, 2)):
            modes = [(10.0 + 1e-4 * k, 0.02)]
            if k < 3:
                modes.append((40.0, 0.02))
            sets.append((o, mset(*modes), None))
        d = build_diagram(sets)
        out = consolidate(d, min_streak=3)
        assert len(out) == 1
        # the head pole (k=0) is not part of the streak
        assert out[0].f_hz == pytest.approx(10.00025)
        assert len(consolidate(d, min_streak=2)) == 2

    def test_min_streak_checked(self):
        with pytest.raises(ValueError):
            consolidate(build_diagram([(2, mset((10.0, 0.02)), None)]), min_streak=1)

    def test_csv_and_json(self):
        d = build_diagram([(2, mset((10.0, 0.02)), None), (4, mset((10.0, 0.02)), None)])
        lines = d.to_csv().splitlines()
        assert lines[0] == "order,f_hz,zeta,flag"
        assert lines[2].endswith(",stable")
        doc = json.loads(d.to_json())
        assert doc["tolerances"] == Tolerances().to_dict()
        assert [e["order"] for e in doc["entries"]] == [2, 4]


class TestSweep:
    def test_order_validation(self, baseline_frf):
        with pytest.raises(ValueError):
            sweep(baseline_frf, [25])
        with pytest.raises(ValueError):
            sweep(baseline_frf, [])

    def test_single_order_range(self, baseline_frf):
        d = sweep(baseline_frf, {"start": 2, "stop": 2}, band=BAND)
        assert len(d.entries) == 1
        assert all(f is Flag.NEW for f in d.entries[0].flags)

    def test_baseline_entries(self, baseline_diagram):
        assert [e.order for e in baseline_diagram.entries] == list(range(24, 51, 2))

    def test_baseline_consolidates_to_sixteen(self, baseline_diagram, baseline_system):
        from loewner_shm.beam import analytical_modes

        out = consolidate(baseline_diagram)
        ref = analytical_modes(baseline_system, BAND)
        assert len(out) == 16
        np.testing.assert_allclose(out.frequencies, ref.frequencies, rtol=1e-4)

    def test_noise_never_stabilizes(self, white_noise_frf):
        d = sweep(white_noise_frf, range(24, 51, 2), seed=0, band=BAND)
        assert len(consolidate(d, min_streak=3)) == 0

    def test_seed_does_not_move_poles(self, baseline_frf, baseline_diagram):
        other = consolidate(sweep(baseline_frf, range(24, 51, 2), seed=1, band=BAND))
        np.testing.assert_allclose(other.frequencies, consolidate(baseline_diagram).frequencies, rtol=1e-6)
