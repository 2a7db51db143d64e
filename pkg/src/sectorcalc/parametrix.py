"""Parameter-dependent parametrix of a - lambda and the Leibniz resolvent.

The recursion produces b_0 = (a-lambda)^{-1} and

    b_{j+1} = -b_0 sum_{|alpha|+k=j+1, 0<=k<=j} (1/alpha!) d^alpha_xi a . D^alpha_x b_k,

which this module represents exactly as a term algebra: every b_j is a
finite sum of ordered products of b_0 factors and tabulated derivatives of
a.  Differentiating a term uses the resolvent derivative rule
d b_0 = -b_0 (d a) b_0, so arbitrary mixed derivatives of b_j evaluate with
no finite-difference noise - which is what makes the derivative-over-b_0
boundedness diagnostics observable.

On top of the recursion sit the excised sum b^N, the remainder
r^N = (a-lambda)#b^N - 1, the Neumann inversion of 1 + r^N (dense fallback
when the remainder is not small), and the empirical invertibility radius R.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .densela import inverse_refined, operator_norm
from .errors import SectorcalcError, SingularOperatorError
from .grid import GridSymbol, sample, unit_symbol
from .quantop import QuantOp, extract_symbol, leibniz_truncated, quantize
from .util import (fit_loglog_slope, japanese_bracket, multi_factorial,
                   multi_indices_of_order)

_B0 = ("b0",)


# ---------------------------------------------------------------------------
# Term algebra over {b0, derivative-of-a} factors
# ---------------------------------------------------------------------------

def _da(alpha, beta):
    return ("da", tuple(alpha), tuple(beta))


def _bump(idx, axis):
    out = list(idx)
    out[axis] += 1
    return tuple(out)


def _collect(acc):
    return [(c, f) for f, c in sorted(acc.items()) if abs(c) > 1e-300]


def _acc(acc, coeff, factors):
    acc[factors] = acc.get(factors, 0.0 + 0.0j) + coeff


def _partial_terms(terms, kind, axis, n):
    """Plain partial derivative (d_x or d_xi) of a term list, product rule."""
    zero = (0,) * n
    acc = {}
    for coeff, factors in terms:
        for pos, f in enumerate(factors):
            if f == _B0:
                da = _da(_bump(zero, axis), zero) if kind == "xi" \
                    else _da(zero, _bump(zero, axis))
                nf = factors[:pos] + (_B0, da, _B0) + factors[pos + 1:]
                _acc(acc, -coeff, nf)
            else:
                _, al, be = f
                nf = factors[:pos] + \
                    ((_da(_bump(al, axis), be) if kind == "xi" else _da(al, _bump(be, axis))),) \
                    + factors[pos + 1:]
                _acc(acc, coeff, nf)
    return _collect(acc)


def apply_derivative(terms, alpha, beta, n, x_as_D=True):
    """d^alpha_xi then (D_x or d_x)^beta applied to a term list."""
    for ax, order in enumerate(alpha):
        for _ in range(order):
            terms = _partial_terms(terms, "xi", ax, n)
    total_beta = 0
    for ax, order in enumerate(beta):
        total_beta += order
        for _ in range(order):
            terms = _partial_terms(terms, "x", ax, n)
    if x_as_D and total_beta:
        terms = [(c * (-1j) ** total_beta, f) for c, f in terms]
    return terms


def bj_term_lists(n, N):
    """Term lists for b_0 .. b_{N-1} (right parametrix)."""
    zero = (0,) * n
    lists = [[(1.0 + 0.0j, (_B0,))]]
    for j in range(N - 1):
        acc = {}
        for total in range(1, j + 2):
            k = j + 1 - total
            for alpha in multi_indices_of_order(n, total):
                dxb = apply_derivative(lists[k], zero, alpha, n, x_as_D=True)
                scale = -1.0 / multi_factorial(alpha)
                for coeff, factors in dxb:
                    _acc(acc, scale * coeff, (_B0, _da(alpha, zero)) + factors)
        lists.append(_collect(acc))
    return lists


def left_bj_term_lists(n, N):
    """Term lists for the left parametrix (operand order swapped)."""
    zero = (0,) * n
    lists = [[(1.0 + 0.0j, (_B0,))]]
    for j in range(N - 1):
        acc = {}
        for total in range(1, j + 2):
            k = j + 1 - total
            for alpha in multi_indices_of_order(n, total):
                dxib = apply_derivative(lists[k], alpha, zero, n)
                scale = -((-1j) ** total) / multi_factorial(alpha)
                for coeff, factors in dxib:
                    _acc(acc, scale * coeff, factors + (_da(zero, alpha), _B0))
        lists.append(_collect(acc))
    return lists


# ---------------------------------------------------------------------------
# Excision
# ---------------------------------------------------------------------------

def smooth_step(t):
    """C^inf bridge: 0 for t <= 1, 1 for t >= 2, strictly monotone between."""
    t = np.asarray(t, dtype=float)
    def g(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out
    lo, hi = g(t - 1.0), g(2.0 - t)
    denom = lo + hi
    safe = denom > 0
    out = np.where(t >= 2.0, 1.0, 0.0)
    out[safe] = (lo[safe] / denom[safe])
    return out


def excision_weights(grid, C):
    """Smooth zero-excision on the frequency window.

    Vanishes for |xi| <= C, is 1 for |xi| >= 2C.  C <= 0 disables excision
    (the spectral condition then holds on all frequencies, phi == 1).
    """
    if C <= 0:
        return np.ones(grid.xi_shape)
    return smooth_step(grid.xi_norm() / C)


# ---------------------------------------------------------------------------
# Calculator: all lambda-dependent objects for one symbol on one grid
# ---------------------------------------------------------------------------

@dataclass
class LeibnizResolvent:
    """Result of inverting a - lambda with respect to the Leibniz product."""

    symbol: GridSymbol
    s_n: GridSymbol
    matrix: np.ndarray
    diagnostics: dict


class ParametrixCalculator:
    """Caches the lambda-independent data of the parametrix construction.

    Derivative tabulations of a, the term lists of the recursion, the
    quantized symbol and the excision weights are computed once; everything
    per-lambda (b_j, b^N, r^N, the resolvent) is then cheap and independent
    across lambda.
    """

    def __init__(self, expr, grid, class_params, sector, N, C=0.0):
        if N < 1:
            raise ValueError("parametrix order N must be >= 1")
        class_params.validate(strict=True, require_nonnegative_order=True)
        self.expr = expr
        self.grid = grid
        self.class_params = class_params
        self.sector = sector
        self.N = N
        self.C = float(C)
        self.a_tab = sample(expr, grid, class_params)
        self.k = self.a_tab.k
        self.sup_a = float(np.max(self.a_tab.spectral_norms()))
        if self.k == 1:
            self.min_a = float(np.min(np.abs(self.a_tab.values[..., 0, 0])))
        else:
            self.min_a = float(np.min(
                np.linalg.svd(self.a_tab.values, compute_uv=False)[..., -1]))
        self.phi = excision_weights(grid, self.C)
        self.term_lists = bj_term_lists(grid.n, N)
        self.left_term_lists = left_bj_term_lists(grid.n, N)
        # Sweep sups exclude the edge band where mode-truncation leak of the
        # exact composition sits (lambda-flat, confined to O(1) modes);
        # clamped so tiny windows keep at least the central mode.
        self.default_interior_margin = min(max(4, grid.xi_max // 6),
                                           max(0, grid.xi_max - 1))
        self._deriv_cache = {}
        self._scalar_compiled = {}
        self._q_a = None

    # -- caches ---------------------------------------------------------------

    def derivative_tab(self, alpha, beta):
        key = (tuple(alpha), tuple(beta))
        if key not in self._deriv_cache:
            self._deriv_cache[key] = sample(self.expr.diff(alpha, beta), self.grid).values
        return self._deriv_cache[key]

    @property
    def quantized_symbol(self):
        if self._q_a is None:
            self._q_a = quantize(self.a_tab)
        return self._q_a

    def shifted_matrix(self, lam):
        m = self.quantized_symbol.matrix
        return m - lam * np.eye(m.shape[0], dtype=complex)

    # -- lambda admissibility ---------------------------------------------------

    def lambda_admissible(self, lam):
        """lambda outside every exclusion region Omega_{x,xi}."""
        return bool(self.sector.contains(lam)) or abs(lam) >= 2.0 * self.sup_a

    def require_admissible(self, lam):
        if not self.lambda_admissible(lam):
            raise SectorcalcError(
                f"lambda={lam!r} lies inside an exclusion region Omega_(x,xi) "
                f"(|lambda| < 2 sup|a| = {2 * self.sup_a!r} and outside the sector)")

    # -- evaluation -------------------------------------------------------------

    def b0_values(self, lam):
        """Pointwise (a - lambda)^{-1}; lam may broadcast over node axes."""
        lam = np.asarray(lam, dtype=complex)
        if self.k == 1:
            return 1.0 / (self.a_tab.values - lam[..., None, None])
        shifted = self.a_tab.values - \
            lam[..., None, None] * np.eye(self.k, dtype=complex)
        return np.linalg.inv(shifted)

    def _compiled_scalar(self, terms):
        """k=1 fast path: per term, the lambda-independent factor product."""
        key = tuple(terms)
        if key not in self._scalar_compiled:
            compiled = []
            for coeff, factors in terms:
                nb0 = sum(1 for f in factors if f == _B0)
                static = None
                for f in factors:
                    if f == _B0:
                        continue
                    tab = self.derivative_tab(f[1], f[2])[..., 0, 0]
                    static = tab if static is None else static * tab
                compiled.append((coeff, nb0, static))
            self._scalar_compiled[key] = compiled
        return self._scalar_compiled[key]

    def eval_terms(self, terms, lam, b0=None):
        """Evaluate a term list at lambda; returns node-shaped (..., k, k)."""
        if b0 is None:
            b0 = self.b0_values(lam)
        if self.k == 1:
            s = b0[..., 0, 0]
            acc = np.zeros(np.broadcast_shapes(s.shape, self.a_tab.values.shape[:-2]),
                           dtype=complex)
            for coeff, nb0, static in self._compiled_scalar(terms):
                term = coeff * s ** nb0
                if static is not None:
                    term = term * static
                acc = acc + term
            return acc[..., None, None]
        acc = None
        for coeff, factors in terms:
            cur = None
            for f in factors:
                arr = b0 if f == _B0 else self.derivative_tab(f[1], f[2])
                cur = arr if cur is None else cur @ arr
            cur = coeff * cur
            acc = cur if acc is None else acc + cur
        return acc

    def bj(self, lam):
        """GridSymbols b_0 .. b_{N-1} at lambda (checked admissible)."""
        self.require_admissible(lam)
        b0 = self.b0_values(complex(lam))
        out = []
        for terms in self.term_lists:
            vals = self.eval_terms(terms, complex(lam), b0=b0)
            vals = np.broadcast_to(vals, self.a_tab.values.shape)
            out.append(GridSymbol(self.grid, np.ascontiguousarray(vals),
                                  self.class_params, check=False))
        return out

    def assemble_bN(self, lam, left=False):
        """b^N(lambda) = phi(xi) sum_{j<N} b_j(lambda)."""
        self.require_admissible(lam)
        term_lists = self.left_term_lists if left else self.term_lists
        b0 = self.b0_values(complex(lam))
        total = None
        for terms in term_lists:
            vals = self.eval_terms(terms, complex(lam), b0=b0)
            total = vals if total is None else total + vals
        total = np.ascontiguousarray(np.broadcast_to(total, self.a_tab.values.shape))
        gs = GridSymbol(self.grid, total, self.class_params, check=False)
        return gs.scale_modes(self.phi)

    def remainder(self, lam, bN=None, left=False):
        """r^N = (a-lambda)#b^N - 1 (or the left variant b^N#(a-lambda) - 1).

        Returns (GridSymbol, remainder matrix); the matrix is exactly the
        quantization of the remainder symbol.
        """
        if bN is None:
            bN = self.assemble_bN(lam, left=left)
        m_shift = self.shifted_matrix(lam)
        q_b = quantize(bN).matrix
        prod = (q_b @ m_shift) if left else (m_shift @ q_b)
        r_mat = prod - np.eye(prod.shape[0], dtype=complex)
        r_sym = extract_symbol(QuantOp(self.grid, self.k, r_mat))
        return r_sym, r_mat

    def remainder_split(self, lam, bN=None):
        """Diagnostic split of r^N: ((a-lam)#b^N - q_N, q_N - 1) with
        q_N the N-term Leibniz expansion of the product."""
        if bN is None:
            bN = self.assemble_bN(lam)
        r_sym, _ = self.remainder(lam, bN=bN)
        q_n = leibniz_truncated(self.expr, bN, self.N, lam=lam)
        one = unit_symbol(self.grid, self.k)
        oscillatory = r_sym + one - q_n
        return oscillatory, q_n - one

    # -- resolvent ---------------------------------------------------------------

    def leibniz_resolvent(self, lam, tol=1e-11, method="auto", max_neumann=400):
        """(a - lambda)^{-#} with Neumann inversion of 1 + r^N when possible.

        The Neumann series is truncated once the geometric tail bound
        ||r||^(K+1)/(1 - ||r||) drops below ``tol``; remainders with
        ||quantize(r^N)|| >= 1/2 fall back to the dense Leibniz inverse.
        """
        self.require_admissible(lam)
        bN = self.assemble_bN(lam)
        diag = {"lambda": complex(lam), "method": None, "r_norm": None,
                "neumann_terms": 0, "residual": None}
        m_shift = self.shifted_matrix(lam)
        res_mat = None
        if method in ("auto", "neumann"):
            _, r_mat = self.remainder(lam, bN=bN)
            r_norm = operator_norm(r_mat)
            diag["r_norm"] = r_norm
            if r_norm < 0.5:
                K = int(np.ceil(np.log(tol * (1.0 - r_norm)) / np.log(r_norm))) \
                    if r_norm > 0 else 0
                K = max(0, min(K, max_neumann))
                eye = np.eye(r_mat.shape[0], dtype=complex)
                series = eye.copy()
                for _ in range(K):
                    series = eye - r_mat @ series
                res_mat = quantize(bN).matrix @ series
                diag["method"] = "neumann"
                diag["neumann_terms"] = K + 1
            elif method == "neumann":
                raise SingularOperatorError(
                    f"Neumann precondition violated: ||quantize(r^N)|| = {r_norm:.3f} >= 1/2")
        if res_mat is None:
            try:
                res_mat, _ = inverse_refined(m_shift)
            except SingularOperatorError as exc:
                raise SingularOperatorError(
                    f"neither Neumann nor dense inversion converged at lambda={lam!r}; "
                    f"lambda lies in the spectrum: {exc}") from exc
            diag["method"] = "dense"
        residual_sym = extract_symbol(
            QuantOp(self.grid, self.k,
                    m_shift @ res_mat - np.eye(res_mat.shape[0], dtype=complex)))
        diag["residual"] = residual_sym.sup_norm()
        if diag["residual"] > tol and diag["method"] == "neumann":
            # tail bound was optimistic (non-normal remainder): dense rescue
            res_mat, _ = inverse_refined(m_shift)
            diag["method"] = "neumann->dense"
            residual_sym = extract_symbol(
                QuantOp(self.grid, self.k,
                        m_shift @ res_mat - np.eye(res_mat.shape[0], dtype=complex)))
            diag["residual"] = residual_sym.sup_norm()
        symbol = extract_symbol(QuantOp(self.grid, self.k, res_mat))
        return LeibnizResolvent(symbol=symbol, s_n=symbol - bN,
                                matrix=res_mat, diagnostics=diag)

    def resolvent_matrix(self, lam, tol=1e-11, method="dense"):
        """Fast path for contour quadrature: the resolvent matrix only."""
        if method == "dense":
            self.require_admissible(lam)
            mat, _ = inverse_refined(self.shifted_matrix(lam))
            return mat
        return self.leibniz_resolvent(lam, tol=tol, method=method).matrix

    # -- invertibility radius ------------------------------------------------------

    def find_R(self, ceiling=2.0 ** 20, start=1.0):
        """Smallest power-of-two R with ||quantize(r^N)|| <= 1/2 on all
        sampled boundary points with |lambda| >= R."""
        radii = []
        r = start
        while r <= ceiling:
            radii.append(r)
            r *= 2.0
        norms = []
        for rad in radii:
            for upper in (True, False):
                lam = self.sector.boundary_point(rad, upper=upper)
                _, r_mat = self.remainder(lam)
                norms.append((rad, operator_norm(r_mat)))
        for candidate in radii:
            if all(nrm <= 0.5 for rad, nrm in norms if rad >= candidate):
                return candidate
        raise SectorcalcError(
            f"no invertibility radius R <= {ceiling:g}: remainder does not decay "
            "on this grid (symbol outside the tractable class?)")


def shift(expr, c):
    """The shifted symbol a + c (c > 0 real); class parameters unchanged."""
    c = float(c)
    if c <= 0:
        raise ValueError("shift constant must be a positive real")
    return expr.shifted(c)


# ---------------------------------------------------------------------------
# lambda-sweep families
# ---------------------------------------------------------------------------

@dataclass
class ParamSymbolFamily:
    """Per-lambda records of a parametrix sweep plus fitted decay slopes."""

    N: int
    R: float
    rows: list
    slopes: dict = field(default_factory=dict)
    symbols: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lambda_re", "lambda_im", "bracket_lambda",
                             "sup_bN", "sup_rN", "sup_sN",
                             "class_sup_rN", "class_sup_sN", "residual", "method"])
            for row in self.rows:
                lam = row["lambda"]
                writer.writerow([
                    repr(lam.real), repr(lam.imag), repr(row["bracket"]),
                    repr(row["sup_bN"]), repr(row["sup_rN"]),
                    "" if row["sup_sN"] is None else repr(row["sup_sN"]),
                    repr(row["class_sup_rN"]),
                    "" if row["class_sup_sN"] is None else repr(row["class_sup_sN"]),
                    repr(row["residual"]), row["method"]])
            for name in sorted(self.slopes):
                writer.writerow(["slope", name, repr(self.slopes[name]),
                                 "", "", "", "", "", "", ""])


def class_weighted_sup(gs, weight_exponent, interior_margin=0):
    """sup over (interior) nodes of |p(x, xi)| <xi>^weight_exponent.

    With weight_exponent = -(order of p's class) this is the q_{0,0}
    seminorm of the class, the quantity the decay statements are about.
    """
    g = gs.grid
    w = g.bracket_xi() ** weight_exponent
    norms = gs.spectral_norms() * w.reshape((1,) * g.n + g.xi_shape)
    if interior_margin > 0:
        mask = g.interior_mask(interior_margin)
        if not np.any(mask):
            raise ValueError(f"interior margin {interior_margin} leaves no "
                             f"window modes (half-width {g.xi_max})")
        norms = norms[(slice(None),) * g.n + (mask,)]
    return float(np.max(norms))


def parametrix_sweep(calc, radii, R, tol=1e-11, store_symbols=False,
                     resolvent_method="auto", interior_margin=None,
                     slope_min_bracket=None):
    """Sweep lambda over both boundary rays: sup norms of b^N, r^N, s^N.

    Record per lambda both the plain sup and the class seminorm
    (|.| <xi>^(N(rho-delta)-m), the q_{0,0} of the remainder class, which is
    what decays like <lambda>^{-1} for r^N and <lambda>^{-2} for s^N).
    Sups are taken over the interior window - the default margin absorbs the
    mode-truncation leak confined to the window edge.  s^N is only recorded
    for |lambda| >= R where the Neumann inverse is trusted.

    Fitted log-log slopes against <lambda>: ``rN`` near -1, ``sN`` near -2,
    ``bN_weighted`` (of <lambda> sup|b^N|) near 0.  The decay laws are
    asymptotic; below the spectral-gap scale the remainder is flat, so the
    fits exclude rows with <lambda> under ``slope_min_bracket`` (default:
    twice the smallest pointwise symbol modulus, dropped if fewer than three
    radii would survive).
    """
    if interior_margin is None:
        interior_margin = calc.default_interior_margin
    if slope_min_bracket is None:
        slope_min_bracket = 2.0 * calc.min_a
    params = calc.class_params
    rem_weight = calc.N * (params.rho - params.delta) - params.m
    rows = []
    symbols = {}
    for rad in np.asarray(radii, dtype=float):
        for upper in (True, False):
            lam = complex(calc.sector.boundary_point(rad, upper=upper))
            if not calc.sector.contains(lam):
                raise SectorcalcError(f"sweep lambda {lam!r} escaped the sector")
            bN = calc.assemble_bN(lam)
            r_sym, _ = calc.remainder(lam, bN=bN)
            row = {
                "lambda": lam,
                "bracket": float(japanese_bracket(lam)),
                "sup_bN": class_weighted_sup(bN, 0.0, interior_margin),
                "sup_rN": class_weighted_sup(r_sym, 0.0, interior_margin),
                "class_sup_rN": class_weighted_sup(r_sym, rem_weight, interior_margin),
                "sup_sN": None,
                "class_sup_sN": None,
                "residual": np.nan,
                "method": "",
            }
            if rad >= R:
                lr = calc.leibniz_resolvent(lam, tol=tol, method=resolvent_method)
                row["sup_sN"] = class_weighted_sup(lr.s_n, 0.0, interior_margin)
                row["class_sup_sN"] = class_weighted_sup(lr.s_n, rem_weight,
                                                         interior_margin)
                row["residual"] = lr.diagnostics["residual"]
                row["method"] = lr.diagnostics["method"]
                if store_symbols:
                    symbols[lam] = {"bN": bN, "rN": r_sym, "sN": lr.s_n,
                                    "resolvent": lr.symbol}
            elif store_symbols:
                symbols[lam] = {"bN": bN, "rN": r_sym}
            rows.append(row)
    fit_rows = [row for row in rows if row["bracket"] >= slope_min_bracket]
    if len({row["bracket"] for row in fit_rows}) < 3:
        fit_rows = rows
    brackets = [row["bracket"] for row in fit_rows]
    slopes = {}
    slopes["rN"], _ = fit_loglog_slope(brackets,
                                       [row["class_sup_rN"] for row in fit_rows])
    slopes["bN_weighted"], _ = fit_loglog_slope(
        brackets, [row["bracket"] * row["sup_bN"] for row in fit_rows])
    s_pairs = [(row["bracket"], row["class_sup_sN"]) for row in fit_rows
               if row["class_sup_sN"] is not None and row["class_sup_sN"] > 0]
    if len(s_pairs) >= 2:
        slopes["sN"], _ = fit_loglog_slope([p[0] for p in s_pairs],
                                           [p[1] for p in s_pairs])
    return ParamSymbolFamily(N=calc.N, R=R, rows=rows, slopes=slopes, symbols=symbols)


def bj_derivative_bound(calc, j, alpha, beta, arc_angles=None):
    """Key-observation diagnostic: sup over nodes and per-node boundary-arc
    lambdas of |d^alpha_xi D^beta_x b_j| <xi>^(rho|a|-delta|b|) / |b_0|."""
    n = calc.grid.n
    terms = apply_derivative(calc.term_lists[j], tuple(alpha), tuple(beta), n)
    if arc_angles is None:
        theta = calc.sector.theta
        arc_angles = np.linspace(-0.95 * theta, 0.95 * theta, 5)
    anorm = calc.a_tab.spectral_norms()
    weight = calc.grid.bracket_xi() ** (
        calc.class_params.rho * sum(alpha) - calc.class_params.delta * sum(beta))
    weight = weight.reshape((1,) * n + calc.grid.xi_shape)
    worst = 0.0
    for phi in arc_angles:
        lam = 2.0 * anorm * np.exp(1j * phi)
        b0 = calc.b0_values(lam)
        vals = calc.eval_terms(terms, lam, b0=b0)
        vals = np.broadcast_to(vals, calc.a_tab.values.shape)
        num = _specnorm(vals) * weight
        den = _specnorm(b0)
        worst = max(worst, float(np.max(num / den)))
    return worst


def _specnorm(values):
    if values.shape[-1] == 1:
        return np.abs(values[..., 0, 0])
    return np.linalg.svd(values, compute_uv=False)[..., 0]
