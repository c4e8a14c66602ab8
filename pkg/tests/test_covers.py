import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qvista.covers import (
    CoverSequence,
    ball_tile_comparability,
    derive_rho_tau_nu,
    quasiball_check,
    u_w_neighborhood,
    verify_quasi_visual,
    verify_visual,
)
from qvista.errors import EmptyTile, FitFailure, MissingLambda, UnknownTile
from qvista.metricspace import FiniteMetricSpace
from conftest import two_point_space


def brute_force_uw(cover, level, index, w):
    """Chain enumeration oracle for the width-w neighborhood."""
    fam = cover.levels[level]
    frontier = {index}
    for _ in range(w):
        nxt = set(frontier)
        for a in frontier:
            for t in fam:
                if cover.levels[level][a].members & t.members:
                    nxt.add(t.index)
        frontier = nxt
    return frontier


class TestNeighborhoods:
    def test_w0_is_self(self, cantor):
        _, cover = cantor
        t = cover.levels[2][1]
        assert u_w_neighborhood(cover, t, 0) == [t]

    def test_cantor_disjoint_all_w(self, cantor):
        _, cover = cantor
        for t in cover.levels[2]:
            assert u_w_neighborhood(cover, t, 3) == [t]

    def test_dyadic_w1(self, dyadic):
        _, cover = dyadic
        left = cover.levels[1][0]
        hood = u_w_neighborhood(cover, left, 1)
        assert {t.index for t in hood} == {0, 1}

    def test_matches_brute_force(self, dyadic):
        _, cover = dyadic
        for lev in (1, 2, 3):
            for t in cover.levels[lev]:
                for w in (0, 1, 2):
                    got = {x.index for x in u_w_neighborhood(cover, t, w)}
                    assert got == brute_force_uw(cover, lev, t.index, w)

    def test_unknown_tile(self, cantor):
        _, cover = cantor
        with pytest.raises(UnknownTile):
            u_w_neighborhood(cover, (9, 0), 1)

    def test_nested_in_w(self, interleaved):
        _, cover = interleaved
        for lev in range(1, 5):
            for t in cover.levels[lev]:
                prev: set = set()
                for w in (0, 1, 2, 3):
                    cur = {x.index for x in u_w_neighborhood(cover, t, w)}
                    assert prev <= cur
                    prev = cur


class TestVerifyVisual:
    def test_cantor_exact_constants(self, cantor):
        _, cover = cantor
        rep = verify_visual(cover)
        assert rep.passed
        assert rep.condition("visual.diam").constant == pytest.approx(1.0, abs=1e-9)
        assert rep.condition("visual.separation").constant == pytest.approx(1.0, abs=1e-9)

    def test_tree_passes(self, tree):
        _, cover = tree
        rep = verify_visual(cover)
        assert rep.passed
        # every tile at level >= 1 attains diam * 2^n = 1 exactly; level 0
        # contributes the global-scale offset diam(S) = 1/2
        assert rep.condition("visual.diam").constant == pytest.approx(2.0, abs=1e-12)

    def test_missing_lambda(self, interleaved):
        _, cover = interleaved
        with pytest.raises(MissingLambda):
            verify_visual(cover)

    def test_singleton_tile_fails_with_witness(self):
        space = two_point_space()
        cover = CoverSequence(space, [[(0, 1)], [(0,), (0, 1)]], width=0, visual_parameter=2.0)
        rep = verify_visual(cover)
        diam = rep.condition("visual.diam")
        assert diam.verdict == "FAIL"
        assert diam.witness["tile"] == [1, 0]

    def test_empty_tile_rejected(self):
        space = two_point_space()
        with pytest.raises(EmptyTile):
            CoverSequence(space, [[(0, 1)], [(), (0, 1)]], width=0)

    def test_level_must_cover(self):
        space = two_point_space()
        with pytest.raises(ValueError):
            CoverSequence(space, [[(0, 1)], [(0,)]], width=0)


class TestVerifyQuasiVisual:
    def test_cantor(self, cantor):
        _, cover = cantor
        rep = verify_quasi_visual(cover)
        assert rep.passed
        iv = rep.condition("qv.iv")
        assert iv.details["k0"] == 1
        assert iv.details["lambda"] == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_interleaved_condition_iii_ratios(self, interleaved):
        _, cover = interleaved
        rep = verify_quasi_visual(cover, thresholds={"qv.iii": 6.0})
        c3 = rep.condition("qv.iii")
        assert c3.verdict == "FAIL"
        by_pair = c3.details["by_level_pair"]
        for k in range(4):
            assert by_pair[f"{2 * k},{2 * k + 1}"] == pytest.approx(2.0 ** k, abs=1e-9)
        assert c3.witness["level_pair"] == [6, 7]

    def test_visual_pass_implies_quasi_pass(self, cantor, dyadic, tree, gasket):
        for _, cover in (cantor, dyadic, tree, gasket):
            if verify_visual(cover).passed:
                assert verify_quasi_visual(cover).passed

    def test_widening_monotone(self, cantor, dyadic):
        # a PASS at width w implies a PASS at width w+1
        for _, cover in (cantor, dyadic):
            base = verify_visual(cover)
            widened = CoverSequence(
                cover.space,
                [[t.sorted_members() for t in fam] for fam in cover.levels],
                width=cover.width + 1,
                visual_parameter=cover.visual_parameter,
            )
            rep = verify_visual(widened)
            assert base.passed and rep.passed
            assert rep.condition("visual.separation").constant <= (
                base.condition("visual.separation").constant + 1e-12
            )

    def test_reports_deterministic(self, cantor):
        _, cover = cantor
        a = verify_quasi_visual(cover).to_dict()
        b = verify_quasi_visual(cover).to_dict()
        assert a == b


class TestDecayRates:
    def test_cantor_exact(self, cantor):
        _, cover = cantor
        rates = derive_rho_tau_nu(cover)
        assert rates.rho == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert rates.tau == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert rates.nu == pytest.approx(1.0, abs=1e-9)

    def test_constant_cover_fails(self):
        # X^n identical for all n >= 1: diameters never shrink
        xs = np.arange(16.0)
        space = FiniteMetricSpace(dist=np.abs(xs[:, None] - xs[None, :]))
        fam = [tuple(range(0, 9)), tuple(range(8, 16))]
        cover = CoverSequence(space, [[tuple(range(16))], fam, fam, fam], width=0)
        with pytest.raises(FitFailure):
            derive_rho_tau_nu(cover)


class TestQuasiball:
    def test_cantor_unit_constants(self, cantor):
        _, cover = cantor
        r0, R0 = quasiball_check(cover)
        assert r0 == pytest.approx(1.0, abs=1e-9)
        assert R0 == pytest.approx(1.0, abs=1e-9)

    def test_trivial_cover(self):
        space = two_point_space()
        cover = CoverSequence(space, [[(0, 1)], [(0, 1)]], width=0)
        r0, R0 = quasiball_check(cover)
        assert (r0, R0) == (1.0, 1.0)

    def test_dyadic_inner_half(self, dyadic):
        _, cover = dyadic
        r0, R0 = quasiball_check(cover)
        assert r0 >= 0.5 - 1e-9
        assert np.isfinite(R0)


class TestBallTileComparability:
    def test_trivial_cover(self):
        space = two_point_space()
        cover = CoverSequence(space, [[(0, 1)], [(0, 1)]], width=0)
        assert ball_tile_comparability(cover, 2.0) == 1.0

    def test_cantor_r2_bounded(self, cantor):
        _, cover = cantor
        assert ball_tile_comparability(cover, 2.0) <= 3.0 + 1e-9

    def test_small_r_matches_condition_i(self, cantor):
        _, cover = cantor
        rep = verify_quasi_visual(cover)
        ci = rep.condition("qv.i").constant
        # R -> 0 keeps only intersecting pairs (plus the tile itself)
        assert ball_tile_comparability(cover, 1e-9) <= ci + 1e-9


@st.composite
def random_cover(draw):
    n = draw(st.integers(min_value=2, max_value=7))
    depth = draw(st.integers(min_value=1, max_value=3))
    levels = [[tuple(range(n))]]
    for _ in range(depth):
        k = draw(st.integers(min_value=1, max_value=4))
        fam = []
        for _ in range(k):
            members = draw(
                st.sets(st.integers(min_value=0, max_value=n - 1), min_size=1, max_size=n)
            )
            fam.append(tuple(sorted(members)))
        covered = set().union(*map(set, fam))
        missing = tuple(sorted(set(range(n)) - covered))
        if missing:
            fam[0] = tuple(sorted(set(fam[0]) | set(missing)))
        levels.append(fam)
    xs = np.arange(float(n))
    space = FiniteMetricSpace(dist=np.abs(xs[:, None] - xs[None, :]))
    return CoverSequence(space, levels, width=draw(st.integers(0, 2)))


@settings(max_examples=30, deadline=None)
@given(random_cover())
def test_uw_nesting_property(cover):
    for lev in range(len(cover.levels)):
        for t in cover.levels[lev]:
            prev: set = set()
            for w in range(3):
                cur = {x.index for x in u_w_neighborhood(cover, t, w)}
                assert prev <= cur
                prev = cur
