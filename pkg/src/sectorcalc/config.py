"""Run-configuration parsing for the command-line front end.

The format is plain text, one ``dotted.key = value`` per line, ``#`` starts
a comment.  Dots nest keys; values are typed by the consumer.  The schema
is documented in ``docs/config.md``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import SymbolClassParams, parse_symbol
from .errors import ConfigError, SectorcalcError
from .presets import get_preset
from .sector import Sector
from .grid import TorusGrid


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    return values


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


class _Cfg:
    def __init__(self, values):
        self.values = values

    def get(self, key, default=None):
        return self.values.get(key, default)

    def get_float(self, key, default=None):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return float(default)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: not a number: {raw!r}") from exc

    def get_int(self, key, default=None):
        val = self.get_float(key, default)
        if val != int(val):
            raise ConfigError(f"config key {key!r}: expected an integer, got {val!r}")
        return int(val)


@dataclass
class RunConfig:
    """Validated run configuration resolved into package objects."""

    expr: object
    base_expr: object
    class_params: SymbolClassParams
    sector: Sector
    grid: TorusGrid
    n: int
    k: int
    shift_c: float
    hypo_c: float
    hypo_C: float
    hypo_max_order: int
    parametrix_N: int
    parametrix_tol: float
    lambda_min: float
    lambda_max: float
    lambda_count: int
    contour_tol: float
    contour_nodes_per_decade: int
    calc_quad_tol: float
    function_specs: list = field(default_factory=list)
    bip_tmax: float = 5.0
    bip_steps: int = 11
    bip_n_reg: int = 1000
    bip_quad_tol: float = 1e-6


def resolve_config(values):
    """Validate raw key/value pairs and build the run objects."""
    cfg = _Cfg(values)
    n = cfg.get_int("symbol.n", 1)
    k = cfg.get_int("symbol.k", 1)
    preset = cfg.get("symbol.preset")
    expr_text = cfg.get("symbol.expr")
    if preset and expr_text:
        raise ConfigError("give either symbol.preset or symbol.expr, not both")
    try:
        if preset:
            base_expr, params = get_preset(preset, n=n)
        elif expr_text:
            base_expr = parse_symbol(expr_text, n=n, k=k)
            params = SymbolClassParams(m=cfg.get_float("class.m"))
        else:
            raise ConfigError("config must set symbol.preset or symbol.expr")
    except SectorcalcError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    params = SymbolClassParams(
        m=cfg.get_float("class.m", params.m),
        rho=cfg.get_float("class.rho", params.rho),
        delta=cfg.get_float("class.delta", params.delta))
    try:
        params.validate(strict=True, require_nonnegative_order=True)
        sector = Sector(theta=cfg.get_float("sector.theta", np.pi / 2))
        grid = TorusGrid(n=n, points=cfg.get_int("grid.points", 128),
                         xi_max=cfg.get_int("grid.xi_max", -1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    parametrix_N = cfg.get_int("parametrix.N", 3)
    if parametrix_N < 1:
        raise ConfigError("parametrix.N must be >= 1")
    shift_c = cfg.get_float("shift", 0.0)
    if shift_c < 0:
        raise ConfigError("shift must be >= 0")
    expr = base_expr.shifted(shift_c) if shift_c > 0 else base_expr
    raw_functions = cfg.get("functions", "")
    function_specs = [spec.strip() for spec in raw_functions.split(",") if spec.strip()]
    return RunConfig(
        expr=expr, base_expr=base_expr, class_params=params, sector=sector,
        grid=grid, n=n, k=base_expr.k, shift_c=shift_c,
        hypo_c=cfg.get_float("hypo.c", 0.5),
        hypo_C=cfg.get_float("hypo.C", 0.0),
        hypo_max_order=cfg.get_int("hypo.max_order", 2),
        parametrix_N=parametrix_N,
        parametrix_tol=cfg.get_float("parametrix.tol", 1e-11),
        lambda_min=cfg.get_float("lambda.min", 0.0),
        lambda_max=cfg.get_float("lambda.max", 1e4),
        lambda_count=cfg.get_int("lambda.count", 10),
        contour_tol=cfg.get_float("contour.tol", 1e-8),
        contour_nodes_per_decade=cfg.get_int("contour.nodes_per_decade", 0),
        calc_quad_tol=cfg.get_float("calc.quad_tol", 1e-5),
        function_specs=function_specs,
        bip_tmax=cfg.get_float("bip.tmax", 5.0),
        bip_steps=cfg.get_int("bip.steps", 11),
        bip_n_reg=cfg.get_int("bip.n_reg", 1000),
        bip_quad_tol=cfg.get_float("bip.quad_tol", 1e-6),
    )


def build_function_family(specs, n_reg=1000):
    """Resolve ``functions = name arg, ...`` specs into HFun objects."""
    from .funcalc import imaginary_power_regularized, power_quotient
    family = []
    for spec in specs:
        parts = spec.split()
        name = parts[0]
        try:
            if name == "power_quotient":
                family.append(power_quotient(float(parts[1])))
            elif name == "imag_power":
                family.append(imaginary_power_regularized(float(parts[1]), n_reg))
            else:
                raise ConfigError(f"unknown function spec {spec!r} "
                                  "(use power_quotient S or imag_power T)")
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"bad function spec {spec!r}: {exc}") from exc
    return family
