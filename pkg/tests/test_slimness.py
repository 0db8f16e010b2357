"""Tests for slimness measurements: sample distances, triangle/fan slimness,
and the four-point hyperbolicity constant."""

import itertools
import math
import random

import numpy as np
import pytest

from flatbundle.catalog import load_catalog_surface, load_group_preset
from flatbundle.errors import FlatBundleError
from flatbundle.paths import FiberPoint, build_preferred_path
from flatbundle.surface import enumerate_saddle_connections, tighten_chain
from flatbundle.veech import build_group_data, build_horoball_family, region_for
from flatbundle import slimness as S


def four_point_oracle(points, dist):
    """Independent brute-force minimal four-point constant."""
    n = len(points)
    best = 0.0
    for w, x, y, z in itertools.product(range(n), repeat=4):
        pxy = 0.5 * (
            dist(points[w], points[x])
            + dist(points[w], points[y])
            - dist(points[x], points[y])
        )
        pxz = 0.5 * (
            dist(points[w], points[x])
            + dist(points[w], points[z])
            - dist(points[x], points[z])
        )
        pyz = 0.5 * (
            dist(points[w], points[y])
            + dist(points[w], points[z])
            - dist(points[y], points[z])
        )
        best = max(best, min(pxz, pyz) - pxy)
    return best


@pytest.fixture(scope="module")
def lshape_setup():
    s = load_catalog_surface("lshape")
    p = load_group_preset("lshape_lattice")
    g = build_group_data(
        s,
        p["generators"],
        depth=6,
        verify_basis=p.get("verify_basis"),
        verify_words=p.get("verify_words"),
    )
    saddles = enumerate_saddle_connections(s, 3.0)
    return s, build_horoball_family(g, saddles), saddles


class TestGromovFourPoint:
    def test_line_is_tree(self):
        points = [0.0, 1.0, 2.5, 7.0, -3.0]
        assert S.gromov_four_point(points, lambda a, b: abs(a - b)) == 0.0

    def test_star_tree(self):
        # 3-leaf star with center: tree metric, zero-hyperbolic
        def dist(a, b):
            if a == b:
                return 0.0
            if a == "c" or b == "c":
                return 1.0
            return 2.0

        assert S.gromov_four_point(["c", "x", "y", "z"], dist) == 0.0

    def test_l1_square_corners_anti_test(self):
        # flat space is not hyperbolic: the constant grows with the square
        side = 10.0
        corners = [(0, 0), (side, 0), (0, side), (side, side)]
        dist = lambda a, b: abs(a[0] - b[0]) + abs(a[1] - b[1])
        got = S.gromov_four_point(corners, dist)
        assert got == pytest.approx(four_point_oracle(corners, dist))
        assert got == pytest.approx(side)

    def test_matches_oracle_on_random_metric(self):
        rng = random.Random(5)
        points = [
            (rng.uniform(0, 3), rng.uniform(0, 3)) for _ in range(7)
        ]
        dist = lambda a, b: math.hypot(a[0] - b[0], a[1] - b[1])
        assert S.gromov_four_point(points, dist) == pytest.approx(
            four_point_oracle(points, dist)
        )

    def test_size_validation(self):
        with pytest.raises(ValueError):
            S.gromov_four_point([0, 1, 2], lambda a, b: abs(a - b))
        with pytest.raises(ValueError):
            S.gromov_four_point(list(range(61)), lambda a, b: abs(a - b))


class TestEuclideanSlimness:
    def test_area_bound_random_triangles(self):
        rng = random.Random(6)
        for _ in range(30):
            a = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            b = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            c = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            area = abs(((b - a).conjugate() * (c - a)).imag) / 2
            if area < 1e-3:
                continue
            delta = S.euclidean_triangle_slimness(a, b, c)
            assert delta <= 2 * math.sqrt(area) / 3**0.75 + S.DEFAULT_STEP

    def test_degenerate_triangle(self):
        assert S.euclidean_triangle_slimness(0, 2.0, 2.0) == pytest.approx(
            0.0, abs=1e-12
        )


class TestSampleDistances:
    def test_matrix_symmetry_and_self_zero(self, lshape_setup):
        s, fam, saddles = lshape_setup
        sc = saddles[0]
        reg = region_for(fam, sc.direction)
        x = FiberPoint(reg.anchor, sc.start)
        y = FiberPoint(0.2 + 0.1j, sc.end)
        path = build_preferred_path(s, x, y, fam, [sc])
        table = S._SigTable()
        samples = S.sample_path(path, table)
        balls = S._family_balls(fam)
        d = S.sample_distance_matrix(samples, samples, balls)
        assert np.allclose(d, d.T)
        assert np.allclose(np.diag(d), 0.0)
        assert (d >= -1e-12).all()


class TestTriangleSlimness:
    def test_degenerate_vertex(self, lshape_setup):
        s, fam, saddles = lshape_setup
        sc = saddles[0]
        reg = region_for(fam, sc.direction)
        x = FiberPoint(reg.anchor, sc.start)
        y = FiberPoint(reg.anchor, sc.end)
        # z = x: the side (x,y) coincides with the union of the others
        delta = S.triangle_slimness(
            s, fam, x, y, x, ([sc], [sc.reverse(s)], [])
        )
        assert delta == pytest.approx(0.0, abs=S.DEFAULT_STEP)

    def test_sweep_finite(self, lshape_setup):
        s, fam, saddles = lshape_setup
        rep = S.slimness_sweep(s, fam, saddles, count=20, seed=1)
        assert rep.samples == 20
        assert math.isfinite(rep.delta_max)
        assert rep.delta_max == max(v for _, v in rep.per_triangle)
        assert rep.delta_quantiles["q100"] == pytest.approx(rep.delta_max)

    def test_deterministic_given_config(self, lshape_setup):
        s, fam, saddles = lshape_setup
        r1 = S.slimness_sweep(s, fam, saddles, count=8, seed=3)
        r2 = S.slimness_sweep(s, fam, saddles, count=8, seed=3)
        assert r1.per_triangle == r2.per_triangle

    def test_discretization_consistency(self, lshape_setup):
        s, fam, saddles = lshape_setup
        rng = random.Random(9)
        checked = 0
        while checked < 5:
            tri = S.random_triangle_chains(s, saddles, rng)
            if tri is None:
                continue
            a, b, third = tri
            try:
                ra = region_for(fam, a.direction)
                rb = region_for(fam, b.direction)
                x = FiberPoint(ra.anchor, a.start)
                y = FiberPoint(rb.anchor, a.end)
                z = FiberPoint(ra.anchor, b.end)
                chains = ([a], [b], list(third.pieces))
                d1 = S.triangle_slimness(s, fam, x, y, z, chains, step=0.05)
                d2 = S.triangle_slimness(s, fam, x, y, z, chains, step=0.025)
            except FlatBundleError:
                continue
            assert abs(d1 - d2) < 0.05
            checked += 1

    def test_stability_split(self, lshape_setup):
        s, fam, saddles = lshape_setup
        rep = S.slimness_sweep(s, fam, saddles, count=16, seed=4)
        full, second = S.stability_split(rep)
        assert second <= full + 1e-12


class TestFanLemma:
    def test_k1_fan_passes(self, lshape_setup):
        s, fam, saddles = lshape_setup
        rng = random.Random(13)
        done = 0
        while done < 3:
            a, b = rng.choice(saddles), rng.choice(saddles)
            if rng.random() < 0.5:
                a = a.reverse(s)
            try:
                bottom = tighten_chain(s, [a.reverse(s), b])
                if len(bottom.pieces) != 1:
                    continue
                from flatbundle.paths import build_fan

                fan = build_fan(s, a, bottom)
                delta, holds = S.fan_lemma_check(s, fan, fam)
            except FlatBundleError:
                continue
            assert holds
            assert math.isfinite(delta) and delta >= 0
            done += 1

    def test_sweep(self, lshape_setup):
        s, fam, saddles = lshape_setup
        rep = S.fan_sweep(s, fam, saddles, count=15, seed=7)
        assert rep.samples == 15
        assert math.isfinite(rep.delta_max)
        assert rep.config["furthermoreFailures"] == 0


class TestConvexCocompact:
    def test_no_parabolics_reports_finite_delta(self):
        # purely hyperbolic group: no balls, collapse is the identity
        s = load_catalog_surface("octagon")
        p = load_group_preset("octagon_hyperbolic")
        g = build_group_data(
            s,
            p["generators"],
            depth=6,
            verify_basis=p.get("verify_basis"),
            verify_words=p.get("verify_words"),
        )
        saddles = enumerate_saddle_connections(s, 3.0)
        fam = build_horoball_family(g, saddles)
        assert all(reg.kind == "point" for reg in fam.values())
        assert S._family_balls(fam) == []
        rep = S.slimness_sweep(s, fam, saddles, count=10, seed=2)
        assert rep.samples == 10
        assert math.isfinite(rep.delta_max)
        full, second = S.stability_split(rep)
        assert second <= full + 1e-12
