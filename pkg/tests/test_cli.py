"""Command-line front end: exit codes, CSV schemas, determinism."""

import csv

import numpy as np
import pytest

from sectorcalc.cli import main

BASE_CFG = """
symbol.preset = variable_laplace
sector.theta = 1.5707963267948966
grid.points = 32
hypo.c = 0.5
shift = 5.0
parametrix.N = 3
lambda.count = 5
lambda.max = 2e3
functions = power_quotient 0.5, power_quotient 1
calc.quad_tol = 1e-5
bip.tmax = 2.0
bip.steps = 5
bip.n_reg = 100
bip.quad_tol = 1e-5
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(BASE_CFG)
    return str(path)


def write_cfg(tmp_path, text, name="alt.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestExitCodes:
    def test_check_passes(self, cfg_file, tmp_path):
        assert main(["check", "--config", cfg_file, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "hypo_report.csv").exists()
        assert (tmp_path / "hypo_summary.txt").exists()

    def test_check_fails_on_negated_preset(self, tmp_path):
        cfg = write_cfg(tmp_path, "symbol.preset = -bracket_power 2\ngrid.points = 16\n")
        assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["check", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path)]) == 1

    def test_bad_schema(self, tmp_path):
        cfg = write_cfg(tmp_path, "this is not a key value line\n")
        assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_bad_expression_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "symbol.expr = 2+*x1\nclass.m = 2\ngrid.points = 16\n")
        assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_duplicate_key_rejected(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + "parametrix.N = 1\n")
        assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_parametrix_rejects_bad_order(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG.replace("parametrix.N = 3",
                                                   "parametrix.N = 0"))
        assert main(["parametrix", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_parametrix_fails_upstream_check(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG.replace(
            "symbol.preset = variable_laplace", "symbol.preset = -variable_laplace"))
        assert main(["parametrix", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_calc_requires_functions(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG.replace(
            "functions = power_quotient 0.5, power_quotient 1", "functions ="))
        assert main(["calc", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_unknown_subcommand_is_usage_error(self, cfg_file, tmp_path):
        assert main(["frobnicate", "--config", cfg_file, "--out", str(tmp_path)]) == 1


class TestParametrixOutputs:
    def test_sweep_csv_schema(self, cfg_file, tmp_path):
        assert main(["parametrix", "--config", cfg_file, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "parametrix_sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:6] == ["lambda_re", "lambda_im", "bracket_lambda",
                               "sup_bN", "sup_rN", "sup_sN"]
        slope_rows = [r for r in rows if r[0] == "slope"]
        assert {r[1] for r in slope_rows} >= {"rN", "bN_weighted", "sN"}

    def test_x_independent_remainders_vanish(self, tmp_path):
        cfg = write_cfg(tmp_path, """
symbol.preset = bracket_power 2
grid.points = 16
shift = 1.0
parametrix.N = 2
lambda.count = 4
lambda.max = 1e3
""")
        assert main(["parametrix", "--config", cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "parametrix_sweep.csv") as fh:
            rows = [r for r in csv.reader(fh)][1:]
        data = [r for r in rows if r[0] != "slope" and r[0] != ""]
        assert data and all(float(r[4]) <= 1e-12 for r in data)


class TestCalcOutputs:
    def test_report_schema_and_ratios(self, cfg_file, tmp_path):
        assert main(["calc", "--config", cfg_file, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "fcalc_report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["name", "sup_norm", "op_norm_oracle", "op_norm_symbol",
                           "ratio", "discrepancy"]
        body = rows[1:-1]
        assert len(body) == 2
        m_row = rows[-1]
        assert m_row[0] == "M"
        M = float(m_row[4])
        for row in body:
            assert float(row[4]) <= M + 1e-15
            assert float(row[5]) <= 1e-6


class TestBipOutputs:
    def test_symmetry_and_unit_norm_at_zero(self, cfg_file, tmp_path):
        assert main(["bip", "--config", cfg_file, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "imaginary_powers.csv") as fh:
            rows = list(csv.reader(fh))
        body = [r for r in rows[1:] if r[0] not in ("rate", "theta")]
        norms = {float(t): float(v) for t, v in body}
        assert norms[0.0] == pytest.approx(1.0, abs=0.1)
        for t in (1.0, 2.0):
            assert norms[t] == pytest.approx(norms[-t], rel=1e-6)
        rate = float([r for r in rows if r[0] == "rate"][0][1])
        theta = float([r for r in rows if r[0] == "theta"][0][1])
        assert rate <= theta + 0.2


class TestTwoDimensional:
    def test_check_and_parametrix_on_2d_grid(self, tmp_path):
        cfg = write_cfg(tmp_path, """
symbol.expr = (2+sin(x1)*cos(x2))*(1+xi1^2+xi2^2)
symbol.n = 2
class.m = 2.0
grid.points = 8
shift = 3.0
parametrix.N = 2
lambda.count = 3
lambda.max = 1e3
""")
        assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert main(["parametrix", "--config", cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "parametrix_sweep.csv") as fh:
            rows = [r for r in csv.reader(fh)][1:]
        data = [r for r in rows if r[0] != "slope"]
        assert len(data) == 6  # 3 radii, both rays
        assert all(float(r[8]) <= 1e-10 for r in data)  # residual column


class TestDeterminism:
    def test_byte_identical_reruns(self, cfg_file, tmp_path):
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        for out in (out1, out2):
            for cmd in ("check", "parametrix", "calc", "bip"):
                assert main([cmd, "--config", cfg_file, "--out", str(out)]) == 0
        for name in ("hypo_report.csv", "hypo_summary.txt", "parametrix_sweep.csv",
                     "fcalc_report.csv", "imaginary_powers.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
