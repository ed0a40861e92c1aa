import numpy as np
import pytest

from boxdyn import (
    CallableOracle,
    CubicalGrid,
    GridMismatch,
    PhaseSpace,
    PiecewiseExample1D,
    build_boxmap,
    encloses,
    restrict_to,
)


def identity_oracle(d=1):
    return CallableOracle(lambda x: x, lipschitz=1.0, dimension=d)


def constant_oracle(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return CallableOracle(lambda x: c, lipschitz=0.0, dimension=c.size)


class TestBuildBoxmap:
    def test_identity_maps_to_closed_neighborhood(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [3])
        bm = build_boxmap(grid, identity_oracle(), 0.0)
        for k in range(grid.box_count):
            want = [j for j in range(grid.box_count) if abs(j - k) <= 1]
            assert list(bm.targets(k)) == want

    def test_identity_2d_neighborhood(self):
        grid = CubicalGrid(PhaseSpace([0.0, 0.0], [1.0, 1.0]), [2, 2])
        bm = build_boxmap(grid, identity_oracle(2), 0.0)
        k = grid.linearize((1, 1))
        want = sorted(
            grid.linearize((i, j)) for i in (0, 1, 2) for j in (0, 1, 2)
        )
        assert sorted(bm.targets(k)) == want

    def test_constant_oracle_targets_boxes_containing_value(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [2])
        bm = build_boxmap(grid, constant_oracle([0.6]), 0.0)
        for k in range(grid.box_count):
            assert list(bm.targets(k)) == [2]
        # a constant on a shared face hits the closed boxes on both sides
        bm = build_boxmap(grid, constant_oracle([0.5]), 0.0)
        for k in range(grid.box_count):
            assert list(bm.targets(k)) == [1, 2]

    def test_piecewise_box_containing_zero_self_targets(self):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [6])
        oracle = PiecewiseExample1D(1.5)
        bm = build_boxmap(grid, oracle, 0.0)
        b = grid.linearize(grid.box_containing([0.0]))
        assert b in bm.targets(b)
        # brute-force cross-check of the full adjacency over all 64 boxes
        for k in range(grid.box_count):
            r = oracle.image_rect(grid.box_rect((k,)))
            want = [grid.linearize(t) for t in grid.boxes_intersecting(r)]
            assert list(bm.targets(k)) == want

    def test_exterior_flagging(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [2])
        bm = build_boxmap(grid, constant_oracle([5.0]), 0.0)
        assert bm.exterior.all()
        assert all(bm.targets(k).size == 0 for k in range(grid.box_count))

    def test_negative_rho_rejected(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [2])
        with pytest.raises(ValueError):
            build_boxmap(grid, identity_oracle(), -0.1)

    def test_dimension_mismatch(self):
        grid = CubicalGrid(PhaseSpace([0.0, 0.0], [1.0, 1.0]), [2, 2])
        with pytest.raises(GridMismatch):
            build_boxmap(grid, identity_oracle(1), 0.0)

    def test_determinism(self):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [7])
        a = build_boxmap(grid, PiecewiseExample1D(1.5), 1e-3)
        b = build_boxmap(grid, PiecewiseExample1D(1.5), 1e-3)
        assert np.array_equal(a.jmin, b.jmin)
        assert np.array_equal(a.jmax, b.jmax)
        assert np.array_equal(a.exterior, b.exterior)

    def test_pointwise_soundness(self, rng):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [6])
        oracle = PiecewiseExample1D(1.5)
        bm = build_boxmap(grid, oracle, 0.0)
        for _ in range(300):
            k = int(rng.integers(0, grid.box_count))
            r = grid.box_rect((k,))
            x = r.lower + rng.random(1) * (r.upper - r.lower)
            y = oracle.eval(x)
            t = grid.linearize(grid.box_containing(y))
            assert t in bm.targets(k)


class TestEncloses:
    def grid(self):
        return CubicalGrid(PhaseSpace([-2.0], [2.0]), [5])

    def test_reflexive(self):
        bm = build_boxmap(self.grid(), PiecewiseExample1D(1.5), 0.01)
        assert encloses(bm, bm)

    def test_rho_monotone(self):
        g = self.grid()
        small = build_boxmap(g, PiecewiseExample1D(1.5), 0.0)
        big = build_boxmap(g, PiecewiseExample1D(1.5), 0.2)
        assert encloses(big, small)
        assert not encloses(small, big)

    def test_random_rho_pairs(self, rng):
        g = self.grid()
        oracle = PiecewiseExample1D(1.5)
        for _ in range(50):
            r1, r2 = sorted(rng.random(2) * 0.3)
            assert encloses(
                build_boxmap(g, oracle, r2), build_boxmap(g, oracle, r1)
            )

    def test_grid_mismatch(self):
        a = build_boxmap(self.grid(), PiecewiseExample1D(1.5), 0.0)
        other = CubicalGrid(PhaseSpace([-2.0], [2.0]), [4])
        b = build_boxmap(other, PiecewiseExample1D(1.5), 0.0)
        with pytest.raises(GridMismatch):
            encloses(a, b)


class TestRestrictTo:
    def test_restrict_to_all_is_identity(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [3])
        bm = build_boxmap(grid, identity_oracle(), 0.0)
        sub = restrict_to(bm, range(grid.box_count))
        for k in range(grid.box_count):
            assert np.array_equal(sub.targets(k), bm.targets(k))

    def test_restrict_to_single_box_identity(self):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [3])
        bm = build_boxmap(grid, identity_oracle(), 0.0)
        sub = restrict_to(bm, [3])
        assert list(sub.targets(3)) == [3]
        assert sub.box_indices().tolist() == [3]

    def test_forward_invariant_set_loses_nothing(self):
        grid = CubicalGrid(PhaseSpace([-2.0], [2.0]), [6])
        bm = build_boxmap(grid, constant_oracle([0.0]), 0.0)
        inv = sorted(set(int(t) for t in bm.targets(0)))
        sub = restrict_to(bm, inv)
        for b in inv:
            assert np.array_equal(sub.targets(b), bm.targets(b))

    def test_edge_list_export(self, tmp_path):
        grid = CubicalGrid(PhaseSpace([0.0], [1.0]), [2])
        bm = build_boxmap(grid, identity_oracle(), 0.0)
        path = tmp_path / "edges.txt"
        bm.export_edge_list(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == bm.total_edges()
        assert lines[0] == "0 0"
