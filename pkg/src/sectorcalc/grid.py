"""Discrete torus grids, symbol tabulation and the seminorm system.

The sup over continuous phase space is replaced by a sup over grid nodes:
x runs over the P-point uniform grid per axis, xi over the integer frequency
window {-Xi..Xi}^n.  Class membership is therefore only certified on the
window; reports record the window used.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, SectorcalcError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the n-torus with a symmetric frequency window.

    Parameters
    ----------
    n : int
        Space dimension, 1 or 2 (the dense oracle makes n >= 3 intractable).
    points : int
        Points per axis P (power of two); x_i = 2*pi*i/P.
    xi_max : int, optional
        Window half-width Xi; defaults to P/2 - 1, the largest window with
        no aliasing (P >= 2*Xi + 2).
    h_xi : float
        Step used by off-lattice finite-difference validation only.
    """

    n: int
    points: int
    xi_max: int = field(default=-1)
    h_xi: float = 1e-4

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        P = self.points
        if P < 4 or (P & (P - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two >= 4, got {P}")
        if self.xi_max < 0:
            object.__setattr__(self, "xi_max", P // 2 - 1)
        if self.points < 2 * self.xi_max + 2:
            raise ValueError(
                f"points={self.points} < 2*xi_max+2={2 * self.xi_max + 2}: window would alias")

    # -- axes and meshes ------------------------------------------------------

    @property
    def x_axis(self):
        return 2.0 * np.pi * np.arange(self.points) / self.points

    @property
    def xi_axis(self):
        return np.arange(-self.xi_max, self.xi_max + 1, dtype=float)

    @property
    def modes_per_axis(self):
        return 2 * self.xi_max + 1

    @property
    def x_shape(self):
        return (self.points,) * self.n

    @property
    def xi_shape(self):
        return (self.modes_per_axis,) * self.n

    @property
    def n_modes(self):
        return self.modes_per_axis ** self.n

    def x_mesh(self):
        """x coordinate arrays broadcastable over x_shape + xi_shape."""
        out = []
        for ax in range(self.n):
            shape = [1] * (2 * self.n)
            shape[ax] = self.points
            out.append(self.x_axis.reshape(shape))
        return tuple(out)

    def xi_mesh(self):
        out = []
        for ax in range(self.n):
            shape = [1] * (2 * self.n)
            shape[self.n + ax] = self.modes_per_axis
            out.append(self.xi_axis.reshape(shape))
        return tuple(out)

    def mode_vectors(self):
        """All window mode vectors, lexicographic, shape (n_modes, n)."""
        grids = np.meshgrid(*([self.xi_axis.astype(int)] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def xi_norm(self):
        """|xi| (Euclidean) per window node, shape xi_shape."""
        mesh = np.meshgrid(*([self.xi_axis] * self.n), indexing="ij")
        return np.sqrt(sum(m * m for m in mesh))

    def bracket_xi(self):
        """<xi> = (1+|xi|^2)^(1/2) per window node, shape xi_shape."""
        return np.sqrt(1.0 + self.xi_norm() ** 2)

    def interior_mask(self, margin):
        """Window nodes with |xi_axis| <= Xi - margin on every axis."""
        keep = np.abs(self.xi_axis) <= self.xi_max - margin
        mesh = np.meshgrid(*([keep] * self.n), indexing="ij")
        out = mesh[0]
        for m in mesh[1:]:
            out = out & m
        return out


def _spectral_norms(values):
    """Pointwise matrix modulus: |a(x,xi)| as the spectral norm."""
    k = values.shape[-1]
    if k == 1:
        return np.abs(values[..., 0, 0])
    return np.linalg.svd(values, compute_uv=False)[..., 0]


class GridSymbol:
    """A symbol tabulated on a :class:`TorusGrid`.

    ``values`` has shape ``x_shape + xi_shape + (k, k)`` (k=1 for scalars)
    and is immutable by convention after construction.
    """

    __slots__ = ("grid", "k", "values", "class_params")

    def __init__(self, grid, values, class_params=None, check=True):
        values = np.asarray(values, dtype=complex)
        if values.shape[-1] != values.shape[-2]:
            raise ValueError("trailing axes must be square (k, k)")
        expected = grid.x_shape + grid.xi_shape + values.shape[-2:]
        if values.shape != expected:
            raise ValueError(f"values shape {values.shape} != expected {expected}")
        if check and not np.all(np.isfinite(values)):
            raise SectorcalcError("tabulated symbol contains non-finite entries")
        self.grid = grid
        self.k = values.shape[-1]
        self.values = values
        self.class_params = class_params

    # -- algebra, pointwise ---------------------------------------------------

    def _check_same(self, other):
        if self.grid != other.grid or self.k != other.k:
            raise GridMismatchError("operands live on different grids")

    def __add__(self, other):
        if isinstance(other, GridSymbol):
            self._check_same(other)
            return GridSymbol(self.grid, self.values + other.values, self.class_params,
                              check=False)
        return self.plus_scalar(other)

    def __sub__(self, other):
        if isinstance(other, GridSymbol):
            self._check_same(other)
            return GridSymbol(self.grid, self.values - other.values, self.class_params,
                              check=False)
        return self.plus_scalar(-other)

    def __mul__(self, c):
        return GridSymbol(self.grid, self.values * c, self.class_params, check=False)

    __rmul__ = __mul__

    def plus_scalar(self, c):
        """a + c*identity (scalar added on the matrix diagonal)."""
        out = self.values.copy()
        idx = np.arange(self.k)
        out[..., idx, idx] += c
        return GridSymbol(self.grid, out, self.class_params, check=False)

    def minus_lambda(self, lam):
        return self.plus_scalar(-lam)

    def scale_modes(self, weights):
        """Multiply by a per-frequency-node weight array (e.g. an excision)."""
        w = np.asarray(weights).reshape((1,) * self.grid.n + self.grid.xi_shape + (1, 1))
        return GridSymbol(self.grid, self.values * w, self.class_params, check=False)

    # -- norms ----------------------------------------------------------------

    def spectral_norms(self):
        return _spectral_norms(self.values)

    def sup_norm(self, interior_margin=0):
        """sup over grid nodes of the pointwise matrix modulus.

        ``interior_margin`` restricts the sup to window modes at least that
        far from the window edge (composition outputs are only faithful
        there).
        """
        norms = self.spectral_norms()
        if interior_margin > 0:
            mask = self.grid.interior_mask(interior_margin)
            if not np.any(mask):
                raise ValueError(f"interior margin {interior_margin} leaves no "
                                 f"window modes (half-width {self.grid.xi_max})")
            norms = norms[(slice(None),) * self.grid.n + (mask,)]
        return float(np.max(norms))

    # -- export ---------------------------------------------------------------

    def to_csv(self, path):
        """Write the tabulation as CSV: x index tuple, xi tuple, re/im per entry."""
        g = self.grid
        header = [f"ix{ax + 1}" for ax in range(g.n)] + \
                 [f"xi{ax + 1}" for ax in range(g.n)] + \
                 [f"{part}{r + 1}{c + 1}" for r in range(self.k)
                  for c in range(self.k) for part in ("re", "im")]
        flat = self.values.reshape(g.points ** g.n, g.n_modes, self.k, self.k)
        x_idx = np.stack(np.unravel_index(np.arange(g.points ** g.n), g.x_shape), axis=-1)
        modes = self.grid.mode_vectors()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for x_flat in range(g.points ** g.n):
                for mi in range(g.n_modes):
                    row = [int(v) for v in x_idx[x_flat]] + [int(v) for v in modes[mi]]
                    for r in range(self.k):
                        for c in range(self.k):
                            z = flat[x_flat, mi, r, c]
                            row += [repr(float(z.real)), repr(float(z.imag))]
                    writer.writerow(row)


def sample(expr, grid, class_params=None):
    """Tabulate a :class:`SymbolExpr` on the grid.

    ``values[i, j] = expr(x_i, xi_j)``; evaluation failures (non-finite
    values) raise.
    """
    if expr.n != grid.n:
        raise GridMismatchError(f"symbol dimension {expr.n} != grid dimension {grid.n}")
    values = expr.eval(grid.x_mesh(), grid.xi_mesh())
    values = np.broadcast_to(values, grid.x_shape + grid.xi_shape + (expr.k, expr.k))
    return GridSymbol(grid, np.ascontiguousarray(values), class_params)


def seminorm(expr, alpha, beta, class_params, grid):
    """Grid seminorm q_{alpha,beta}: sup |d^a_xi d^b_x a| <xi>^(-m+rho|a|-delta|b|).

    Derivatives are exact (expression-tree differentiation); the sup runs
    over the grid window, so the value is a certified lower bound for the
    continuum seminorm.
    """
    class_params.validate(strict=False)
    deriv = expr.diff(alpha, beta)
    tab = sample(deriv, grid)
    weight = grid.bracket_xi() ** class_params.xi_weight_exponent(
        _tup(alpha, grid.n), _tup(beta, grid.n))
    weighted = tab.spectral_norms() * weight.reshape((1,) * grid.n + grid.xi_shape)
    return float(np.max(weighted))


def grid_seminorm(gs, alpha, beta, class_params, interior_margin=0):
    """Seminorm of a tabulated symbol (no expression available).

    x-derivatives are spectral (exact for window-band-limited content);
    xi-derivatives use lattice central differences, so this is a
    validation-grade estimate, adequate for ratio/stability diagnostics.
    """
    class_params.validate(strict=False)
    alpha = _tup(alpha, gs.grid.n)
    beta = _tup(beta, gs.grid.n)
    vals = gs.values
    for ax, order in enumerate(beta):
        vals = _spectral_x_derivative(vals, gs.grid, ax, order)
    for ax, order in enumerate(alpha):
        for _ in range(order):
            vals = np.gradient(vals, 1.0, axis=gs.grid.n + ax)
    weight = gs.grid.bracket_xi() ** class_params.xi_weight_exponent(alpha, beta)
    norms = _spectral_norms(vals) * weight.reshape((1,) * gs.grid.n + gs.grid.xi_shape)
    if interior_margin > 0:
        mask = gs.grid.interior_mask(interior_margin)
        if not np.any(mask):
            raise ValueError(f"interior margin {interior_margin} leaves no "
                             f"window modes (half-width {gs.grid.xi_max})")
        norms = norms[(slice(None),) * gs.grid.n + (mask,)]
    return float(np.max(norms))


def _spectral_x_derivative(vals, grid, axis, order):
    if order == 0:
        return vals
    freqs = np.fft.fftfreq(grid.points, d=1.0 / grid.points)
    shape = [1] * vals.ndim
    shape[axis] = grid.points
    mult = (1j * freqs.reshape(shape)) ** order
    spec = np.fft.fft(vals, axis=axis)
    return np.fft.ifft(spec * mult, axis=axis)


def _tup(idx, n):
    if isinstance(idx, (int, np.integer)):
        if n != 1:
            raise ValueError("multi-index required in dimension > 1")
        return (int(idx),)
    return tuple(int(v) for v in idx)


def unit_symbol(grid, k=1):
    """The constant symbol 1 (identity matrix for k > 1)."""
    values = np.zeros(grid.x_shape + grid.xi_shape + (k, k), dtype=complex)
    idx = np.arange(k)
    values[..., idx, idx] = 1.0
    return GridSymbol(grid, values, check=False)
