"""Named symbol presets so run configurations stay declarative.

A preset spec is ``"name"`` or ``"name arg"``; a leading ``-`` negates the
symbol (handy for deliberately failing sector checks).
"""

from __future__ import annotations

from .dsl import SymbolClassParams, parse_symbol
from .errors import ConfigError


def _bracket_power(arg, n):
    m = float(arg) if arg is not None else 2.0
    text = f"bracket(xi)^{m!r}" if m != int(m) else f"bracket(xi)^{int(m)}"
    return parse_symbol(text, n=n), SymbolClassParams(m=m)


def _variable_laplace(arg, n):
    xi2 = "+".join(f"xi{ax + 1}^2" for ax in range(n))
    expr = parse_symbol(f"(2+sin(x1))*(1+{xi2})", n=n)
    return expr, SymbolClassParams(m=2.0)


def _rotated_phase(arg, n):
    omega = float(arg) if arg is not None else 0.0
    xi2 = "+".join(f"xi{ax + 1}^2" for ax in range(n))
    expr = parse_symbol(f"exp(i*{omega!r})*(1+{xi2})", n=n)
    return expr, SymbolClassParams(m=2.0)


def _jordan2(arg, n):
    # 2x2 non-normal block: double eigenvalue <xi>^2, nilpotent coupling.
    expr = parse_symbol(
        "[[bracket(xi)^2, bracket(xi)], [0, bracket(xi)^2]]", n=n, k=2)
    return expr, SymbolClassParams(m=2.0)


_REGISTRY = {
    "bracket_power": _bracket_power,
    "variable_laplace": _variable_laplace,
    "rotated_phase": _rotated_phase,
    "jordan2": _jordan2,
}


def preset_names():
    return sorted(_REGISTRY)


def get_preset(spec, n=1):
    """Resolve a preset spec string to (SymbolExpr, SymbolClassParams)."""
    spec = spec.strip()
    negate = spec.startswith("-")
    if negate:
        spec = spec[1:]
    parts = spec.split()
    if not parts or parts[0] not in _REGISTRY:
        raise ConfigError(
            f"unknown preset {spec!r}; known presets: {', '.join(preset_names())}")
    arg = parts[1] if len(parts) > 1 else None
    expr, params = _REGISTRY[parts[0]](arg, n)
    if negate:
        expr = expr.scaled(-1.0)
    return expr, params
