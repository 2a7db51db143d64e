"""Sectorial functional calculus for pseudodifferential symbols on the
discrete torus: symbol DSL with exact derivatives, hypoellipticity checks,
exact Leibniz composition, the parametrix recursion with Neumann inversion,
and contour-quadrature functional calculus validated against a dense
operator oracle."""

from .dsl import (MAX_DERIVATIVE_ORDER, SymbolClassParams, SymbolExpr,
                  differentiate, parse_symbol, validate_symbol)
from .densela import apply_fft, dense_resolvent, operator_norm, resolvent_norm_sweep
from .errors import (ConfigError, ContourError, DerivativeOrderError,
                     GridMismatchError, NonPeriodicError, SectorcalcError,
                     SingularOperatorError, SymbolDomainError, SymbolSyntaxError,
                     UnknownIdentifierError)
from .funcalc import (Contour, HFun, HinfFun, HinfProbeReport, bn_f_deformed,
                      bn_f_straight, build_contour, f_of_operator_oracle,
                      f_of_symbol, hinf_bound_probe, imaginary_power,
                      imaginary_power_regularized, power_quotient,
                      regularizer_value, resolvent_decay_probe, resolvent_quotient)
from .grid import (GridSymbol, TorusGrid, grid_seminorm, sample, seminorm,
                   unit_symbol)
from .hypo import (HypoReport, check_spectrum, eigenvalues_grid,
                   estimate_hypo_constants, omega_region)
from .parametrix import (LeibnizResolvent, ParametrixCalculator,
                         ParamSymbolFamily, bj_derivative_bound, bj_term_lists,
                         class_weighted_sup, excision_weights, parametrix_sweep,
                         shift, smooth_step)
from .presets import get_preset, preset_names
from .quantop import (QuantOp, compose_exact, extract_symbol, leibniz_inverse,
                      leibniz_truncated, quantize)
from .sector import OmegaRegion, Sector

__version__ = "0.1.0"
