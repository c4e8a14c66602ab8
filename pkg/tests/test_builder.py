import numpy as np
import pytest

from qvista.builder import (
    adjust_radii,
    build_visual_width0,
    build_visual_width1,
    check_dichotomy,
    color_separated_set,
)
from qvista.covers import verify_visual
from qvista.errors import DoublingUnbounded, ResolutionExceeded
from qvista.fixtures import grid_space
from qvista.metricspace import FiniteMetricSpace, Net, maximal_separated_net


def integer_grid(m: int) -> FiniteMetricSpace:
    xs = np.arange(float(m))
    return FiniteMetricSpace(dist=np.abs(xs[:, None] - xs[None, :]))


class TestWidth1:
    def test_depth_zero(self, grid101):
        cover = build_visual_width1(grid101, 2.0, 0)
        assert len(cover.levels) == 1
        assert cover.levels[0][0].members == frozenset(range(grid101.n))

    def test_grid_passes(self, grid101):
        cover = build_visual_width1(grid101, 2.0, 5)
        rep = verify_visual(cover)
        assert rep.passed
        assert cover.width == 1

    def test_separation_claim_half(self, cantor):
        space, _ = cantor
        cover = build_visual_width1(space, 3.0, 4)
        rep = verify_visual(cover)
        assert rep.passed
        # dist(X,Y) >= lam^-n / 2 for width-1 separated pairs
        assert rep.condition("visual.separation").constant <= 2.0 + 1e-9

    def test_resolution_guard(self, grid101):
        with pytest.raises(ResolutionExceeded):
            build_visual_width1(grid101, 2.0, 12)


class TestColoring:
    def test_single_point_net(self, grid101):
        net = Net(delta=0.5, members=(3,))
        colored = color_separated_set(grid101, net)
        assert colored.colors == (1,)

    def test_integer_interval_ten_colors(self):
        space = integer_grid(101)
        net = maximal_separated_net(space, 1.0)
        assert len(net.members) == 101
        colored = color_separated_set(space, net)
        assert colored.n_colors == 10
        # classes are arithmetic progressions of step 10 under greedy order
        cls1 = [m for m, c in zip(net.members, colored.colors) if c == 1]
        assert cls1 == list(range(0, 101, 10))
        # same-color members are 10*delta-separated
        for ci in range(1, colored.n_colors + 1):
            cls = [m for m, c in zip(net.members, colored.colors) if c == ci]
            for a in cls:
                for b in cls:
                    assert a == b or abs(a - b) >= 10

    def test_greedy_matches_reference(self, cantor_small):
        space, _ = cantor_small
        net = maximal_separated_net(space, 3.0 ** -3)
        colored = color_separated_set(space, net)
        # reference simulation of the greedy class extraction
        sep = 10 * net.delta
        remaining = list(net.members)
        expect = {}
        cls = 0
        while remaining:
            cls += 1
            chosen = []
            for m in remaining:
                if all(space.dist[m, c] >= sep for c in chosen):
                    chosen.append(m)
            for m in chosen:
                expect[m] = cls
            remaining = [m for m in remaining if m not in expect]
        assert tuple(expect[m] for m in net.members) == colored.colors


class TestRadii:
    def test_single_member_r_is_one(self, grid101):
        colored = color_separated_set(grid101, Net(delta=0.1, members=(7,)))
        filled = adjust_radii(grid101, colored)
        assert filled.radii == (1.0,)

    def test_two_far_members_separation(self):
        space = integer_grid(30)
        net = Net(delta=1.0, members=(0, 10))
        colored = color_separated_set(space, net)
        assert colored.n_colors == 1
        filled = adjust_radii(space, colored)
        assert filled.radii == (1.0, 1.0)
        ok, witness = check_dichotomy(space, filled)
        assert ok, witness
        # distance between the two balls is at least 8 delta
        b0 = np.flatnonzero(space.dist[0] < 1.0)
        b1 = np.flatnonzero(space.dist[10] < 1.0)
        assert space.dist[np.ix_(b0, b1)].min() >= 8.0

    def test_integer_grid_dichotomy_exhaustive(self):
        space = integer_grid(60)
        net = maximal_separated_net(space, 1.0)
        filled = adjust_radii(space, color_separated_set(space, net))
        ok, witness = check_dichotomy(space, filled)
        assert ok, witness
        assert all(1.0 <= r < 2.0 for r in filled.radii)


class TestWidth0:
    def test_cantor_passes(self, cantor):
        space, _ = cantor
        cover = build_visual_width0(space, 3.0, 3)
        rep = verify_visual(cover)
        assert rep.passed
        assert cover.width == 0

    def test_grid_passes(self, grid101):
        cover = build_visual_width0(grid101, 2.0, 4)
        assert verify_visual(cover).passed

    def test_closed_ball_variant(self, grid101):
        cover = build_visual_width0(grid101, 2.0, 3, closed_balls=True)
        assert verify_visual(cover).passed

    def test_tree_not_doubling(self, tree):
        space, _ = tree
        with pytest.raises(DoublingUnbounded):
            build_visual_width0(space, 2.0, 3, doubling_cap=8)
