"""Torus grids, tabulation and the seminorm system."""

import csv

import numpy as np
import pytest

import sectorcalc as sc


class TestTorusGrid:
    def test_power_of_two_enforced(self):
        with pytest.raises(ValueError):
            sc.TorusGrid(n=1, points=20)

    def test_window_aliasing_guard(self):
        with pytest.raises(ValueError):
            sc.TorusGrid(n=1, points=16, xi_max=8)
        g = sc.TorusGrid(n=1, points=16, xi_max=7)
        assert g.modes_per_axis == 15

    def test_axes(self):
        g = sc.TorusGrid(n=1, points=8, xi_max=2)
        assert g.x_axis[0] == 0.0
        assert np.allclose(np.diff(g.x_axis), 2 * np.pi / 8)
        assert list(g.xi_axis) == [-2, -1, 0, 1, 2]

    def test_interior_mask(self):
        g = sc.TorusGrid(n=1, points=8, xi_max=3)
        assert list(g.interior_mask(1)) == [False, True, True, True, True, True, False]

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            sc.TorusGrid(n=3, points=8)


class TestSample:
    def test_constant_is_all_ones(self, grid16):
        gs = sc.sample(sc.parse_symbol("1", n=1), grid16)
        assert np.array_equal(gs.values, np.ones_like(gs.values))

    def test_bracket_square_values(self):
        g = sc.TorusGrid(n=1, points=8, xi_max=2)
        gs = sc.sample(sc.parse_symbol("bracket(xi)^2", n=1), g)
        assert np.allclose(gs.values[0, :, 0, 0], [5, 2, 1, 2, 5])

    def test_shape_and_finiteness(self, grid16, var_laplace):
        gs = sc.sample(var_laplace, grid16)
        assert gs.values.shape == (16, 15, 1, 1)
        with pytest.raises(sc.SectorcalcError):
            bad = gs.values.copy()
            bad[0, 0, 0, 0] = np.inf
            sc.GridSymbol(grid16, bad)

    def test_dimension_mismatch(self, grid16):
        with pytest.raises(sc.GridMismatchError):
            sc.sample(sc.parse_symbol("xi1+xi2", n=2), grid16)


class TestSeminorm:
    def test_bracket_square_q00_is_one(self, grid16):
        expr = sc.parse_symbol("bracket(xi)^2", n=1)
        q = sc.seminorm(expr, (0,), (0,), sc.SymbolClassParams(m=2), grid16)
        assert q == pytest.approx(1.0, abs=1e-12)

    def test_bracket_square_q10_approaches_two(self):
        g = sc.TorusGrid(n=1, points=64)
        expr = sc.parse_symbol("bracket(xi)^2", n=1)
        q = sc.seminorm(expr, (1,), (0,), sc.SymbolClassParams(m=2), g)
        xi = g.xi_max
        assert q == pytest.approx(2 * xi / np.sqrt(1 + xi * xi), abs=1e-12)
        assert q < 2.0

    def test_variable_laplace_q01_is_one(self, grid32, var_laplace):
        q = sc.seminorm(var_laplace, (0,), (1,), sc.SymbolClassParams(m=2), grid32)
        assert q == pytest.approx(1.0, abs=1e-12)

    def test_homogeneity(self, grid16, var_laplace):
        params = sc.SymbolClassParams(m=2)
        base = sc.seminorm(var_laplace, (1,), (1,), params, grid16)
        scaled = sc.seminorm(var_laplace.scaled(3.0 - 4.0j), (1,), (1,), params, grid16)
        assert scaled == pytest.approx(5.0 * base, rel=1e-12)

    def test_monotone_in_window(self, var_laplace):
        params = sc.SymbolClassParams(m=2)
        coarse = sc.seminorm(var_laplace, (1,), (0,), params,
                             sc.TorusGrid(n=1, points=16, xi_max=7))
        fine = sc.seminorm(var_laplace, (1,), (0,), params,
                           sc.TorusGrid(n=1, points=32, xi_max=15))
        assert fine >= coarse

    def test_x_independent_beta_seminorms_vanish(self, grid16):
        expr = sc.parse_symbol("bracket(xi)^2", n=1)
        q = sc.seminorm(expr, (0,), (1,), sc.SymbolClassParams(m=2), grid16)
        assert q <= 1e-12

    def test_exponential_outside_every_class(self):
        # sup-seminorm sweep diverges as the window grows: not in any S^m
        expr = sc.parse_symbol("exp(xi1)", n=1, validate=False)
        params = sc.SymbolClassParams(m=4)
        qs = [sc.seminorm(expr, (0,), (0,), params,
                          sc.TorusGrid(n=1, points=2 * (xi + 1), xi_max=xi))
              for xi in (7, 15, 31)]
        assert qs[1] > 10 * qs[0]
        assert qs[2] > 100 * qs[1]

    def test_matrix_seminorm_uses_spectral_norm(self, grid16):
        expr = sc.parse_symbol("[[0, 2], [0, 0]]", n=1, k=2)
        q = sc.seminorm(expr, (0,), (0,), sc.SymbolClassParams(m=0), grid16)
        assert q == pytest.approx(2.0, rel=1e-12)


class TestGridSeminorm:
    def test_matches_exact_on_quadratic(self, grid16):
        # lattice-step central differences are exact on a xi-quadratic;
        # compare on the interior where the sup lands at xi = 6
        expr = sc.parse_symbol("bracket(xi)^2", n=1)
        gs = sc.sample(expr, grid16)
        params = sc.SymbolClassParams(m=2)
        approx = sc.grid_seminorm(gs, (1,), (0,), params, interior_margin=1)
        assert approx == pytest.approx(2 * 6 / np.sqrt(1 + 36), rel=1e-10)

    def test_q00_no_derivatives_is_exact(self, grid16, var_laplace):
        gs = sc.sample(var_laplace, grid16)
        params = sc.SymbolClassParams(m=2)
        assert sc.grid_seminorm(gs, (0,), (0,), params) == \
            pytest.approx(sc.seminorm(var_laplace, (0,), (0,), params, grid16), rel=1e-12)


class TestCsvExport:
    def test_roundtrip_values(self, tmp_path):
        g = sc.TorusGrid(n=1, points=8, xi_max=2)
        gs = sc.sample(sc.parse_symbol("exp(i*x1)*(1+xi1^2)", n=1), g)
        path = tmp_path / "symbol.csv"
        gs.to_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["ix1", "xi1", "re11", "im11"]
        assert len(rows) == 1 + 8 * 5
        # row for x-index 1, xi = -2: e^{i x_1} * 5
        row = rows[1 + 1 * 5 + 0]
        x1 = 2 * np.pi / 8
        assert float(row[2]) == pytest.approx(5 * np.cos(x1))
        assert float(row[3]) == pytest.approx(5 * np.sin(x1))

    def test_2d_header(self, tmp_path, grid2d):
        gs = sc.sample(sc.parse_symbol("xi1+xi2", n=2), grid2d)
        path = tmp_path / "symbol2d.csv"
        gs.to_csv(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        assert header == ["ix1", "ix2", "xi1", "xi2", "re11", "im11"]
