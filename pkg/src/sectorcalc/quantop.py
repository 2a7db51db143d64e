"""Quantization on the discrete torus and the Leibniz product.

A tabulated symbol a(x, xi) becomes the operator

    (op(a) u)(x) = sum_{xi in window} e^{i x.xi} a(x, xi) u_hat(xi),

realized as a dense matrix in the Fourier-mode basis of the window
{-Xi..Xi}^n (dimension k * (2Xi+1)^n).  In that basis ``quantize(1)`` is the
identity matrix exactly, Fourier multipliers are diagonal, and e^{i x.e_j}
is a mode shift truncated at the window edge.  Composition of operators is
exact finite matrix algebra; the truncated Leibniz expansion is compared
against it.

Faithfulness caveat: ``quantize(extract_symbol(A)) == A`` holds to machine
precision for every matrix, while ``extract_symbol(quantize(a)) == a`` holds
where the x-frequency content of a(., xi), shifted by xi, stays inside the
window - i.e. for x-trigonometric symbols of degree B at modes
|xi| <= Xi - B (exactly, for x-independent symbols).  Compositions are
asserted on the interior window |xi| <= Xi - K for the same reason: mode
shifts leak past the truncation at the edge.
"""

from __future__ import annotations

import numpy as np

from .densela import inverse_refined
from .dsl import SymbolExpr
from .errors import GridMismatchError, SingularOperatorError
from .grid import GridSymbol, sample, unit_symbol
from .util import multi_factorial, multi_indices_below


class QuantOp:
    """Dense realization of op(a) on window-mode coefficient vectors.

    The matrix has shape (k*M, k*M) with M = (2Xi+1)^n; row/column index is
    ``mode_flat * k + component``.  Instances are immutable by convention.
    """

    __slots__ = ("grid", "k", "matrix", "provenance")

    def __init__(self, grid, k, matrix, provenance=None):
        dim = k * grid.n_modes
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {matrix.shape} != ({dim}, {dim})")
        self.grid = grid
        self.k = k
        self.matrix = matrix
        self.provenance = provenance

    @property
    def dim(self):
        return self.k * self.grid.n_modes

    def __matmul__(self, other):
        if not isinstance(other, QuantOp):
            return NotImplemented
        if self.grid != other.grid or self.k != other.k:
            raise GridMismatchError("cannot compose operators from different grids")
        prov = None
        if self.provenance and other.provenance:
            prov = f"({self.provenance})#({other.provenance})"
        return QuantOp(self.grid, self.k, self.matrix @ other.matrix, prov)

    def minus_lambda(self, lam):
        return QuantOp(self.grid, self.k,
                       self.matrix - lam * np.eye(self.dim, dtype=complex),
                       self.provenance)

    # -- grid-function application -------------------------------------------

    def analyze(self, u):
        """Grid samples -> window-mode coefficient vector (Nyquist dropped)."""
        g = self.grid
        u = np.asarray(u, dtype=complex)
        if self.k > 1:
            if u.shape != g.x_shape + (self.k,):
                raise GridMismatchError(f"expected samples of shape {g.x_shape + (self.k,)}")
            hat = np.fft.fftn(u, axes=tuple(range(g.n))) / g.points ** g.n
        else:
            if u.shape != g.x_shape:
                raise GridMismatchError(f"expected samples of shape {g.x_shape}")
            hat = (np.fft.fftn(u) / g.points ** g.n)[..., None]
        modes = g.mode_vectors() % g.points
        coeffs = hat[tuple(modes[:, ax] for ax in range(g.n))]
        return coeffs.reshape(-1)

    def synthesize(self, coeffs):
        """Window-mode coefficient vector -> grid samples."""
        g = self.grid
        coeffs = np.asarray(coeffs, dtype=complex).reshape(g.n_modes, self.k)
        hat = np.zeros(g.x_shape + (self.k,), dtype=complex)
        modes = g.mode_vectors() % g.points
        hat[tuple(modes[:, ax] for ax in range(g.n))] = coeffs
        u = np.fft.ifftn(hat, axes=tuple(range(g.n))) * g.points ** g.n
        return u if self.k > 1 else u[..., 0]

    def apply(self, u):
        """Apply by matrix on the mode coefficients of u."""
        return self.synthesize(self.matrix @ self.analyze(u))


def _index_arrays(grid):
    """Gather/scatter index arrays between DFT bins and matrix entries.

    Entry (row mode eta_p, column mode xi_q) corresponds to the x-DFT bin
    (eta_p - xi_q) mod P of the tabulation column xi_q; the map is injective
    per column because the window spans fewer than P modes per axis.
    """
    modes = grid.mode_vectors()
    diff = (modes[:, None, :] - modes[None, :, :]) % grid.points
    idx = tuple(diff[..., ax] for ax in range(grid.n))
    idx += (np.arange(grid.n_modes)[None, :],)
    return idx


_MAX_DENSE_DIM = 512


def quantize(a):
    """Exact dense operator of a tabulated symbol.

    Columns realize op(a) on the Fourier modes: op(a) e_xi = e^{i x.xi} a(x, xi),
    expanded over the window modes via the x-DFT of a(., xi).  Dimension is
    capped at 512 so LU solves stay sub-second per contour node.
    """
    g = a.grid
    if a.k * g.n_modes > _MAX_DENSE_DIM:
        raise GridMismatchError(
            f"operator dimension {a.k * g.n_modes} exceeds the desk-scale cap "
            f"{_MAX_DENSE_DIM}; shrink the grid or matrix size")
    fft = np.fft.fftn(a.values, axes=tuple(range(g.n))) / g.points ** g.n
    fft = fft.reshape((g.points,) * g.n + (g.n_modes, a.k, a.k))
    block = fft[_index_arrays(g)]
    matrix = block.transpose(0, 2, 1, 3).reshape(a.k * g.n_modes, a.k * g.n_modes)
    return QuantOp(g, a.k, matrix)


def extract_symbol(op):
    """Discrete inverse of quantize: a(x_i, xi_j) = e^{-i x_i.xi_j} (A e_{xi_j})(x_i)."""
    g = op.grid
    block = op.matrix.reshape(g.n_modes, op.k, g.n_modes, op.k).transpose(0, 2, 1, 3)
    fft = np.zeros((g.points,) * g.n + (g.n_modes, op.k, op.k), dtype=complex)
    fft[_index_arrays(g)] = block
    values = np.fft.ifftn(fft, axes=tuple(range(g.n))) * g.points ** g.n
    values = values.reshape(g.x_shape + g.xi_shape + (op.k, op.k))
    return GridSymbol(g, values, check=False)


def compose_exact(a, b):
    """The discrete Leibniz product a#b = extract(quantize(a) quantize(b)).

    Exact finite matrix algebra; faithful on the interior window (see the
    module docstring for the edge caveat).
    """
    if a.grid != b.grid or a.k != b.k:
        raise GridMismatchError("operands live on different grids")
    return extract_symbol(quantize(a) @ quantize(b))


def leibniz_truncated(a_expr, b, K, grid=None, lam=None):
    """Truncated Leibniz expansion sum_{|alpha|<K} (1/alpha!) d^alpha_xi a . D^alpha_x b.

    ``a_expr`` is a SymbolExpr (exact xi-derivatives); ``b`` is a GridSymbol
    or SymbolExpr (sampled first).  D_x = -i d_x acts spectrally on the
    tabulation.  ``lam`` subtracts lam from the alpha=0 factor, giving the
    expansion of (a - lam)#b.
    """
    if isinstance(b, SymbolExpr):
        if grid is None:
            raise ValueError("grid required when b is an expression")
        b = sample(b, grid)
    g = b.grid
    acc = np.zeros_like(b.values)
    for alpha in multi_indices_below(g.n, K):
        da = sample(a_expr.diff(alpha=alpha), g).values
        if lam is not None and sum(alpha) == 0:
            idx = np.arange(b.k)
            da = da.copy()
            da[..., idx, idx] -= lam
        dxb = b.values
        for ax, order in enumerate(alpha):
            dxb = _dx_spectral(dxb, g, ax, order)
        acc = acc + np.einsum("...rs,...st->...rt", da, dxb) / multi_factorial(alpha)
    return GridSymbol(g, acc, b.class_params, check=False)


def _dx_spectral(vals, grid, axis, order):
    """(D_x)^order along one x-axis: multiplier m^order on mode m."""
    if order == 0:
        return vals
    freqs = np.fft.fftfreq(grid.points, d=1.0 / grid.points)
    shape = [1] * vals.ndim
    shape[axis] = grid.points
    spec = np.fft.fft(vals, axis=axis)
    return np.fft.ifft(spec * freqs.reshape(shape) ** order, axis=axis)


def leibniz_inverse(u, tol=1e-10):
    """Exact Leibniz inverse v = extract(quantize(u)^{-1}).

    Post-condition: both composition residuals ||u#v - 1|| and ||v#u - 1||
    (sup over the window) are below ``tol``.
    """
    op = quantize(u)
    try:
        inv, residual = inverse_refined(op.matrix)
    except SingularOperatorError as exc:
        raise SingularOperatorError(f"symbol is not Leibniz invertible: {exc}") from exc
    v = extract_symbol(QuantOp(u.grid, u.k, inv))
    one = unit_symbol(u.grid, u.k)
    r1 = (compose_exact(u, v) - one).sup_norm()
    r2 = (compose_exact(v, u) - one).sup_norm()
    if max(r1, r2) > tol:
        raise SingularOperatorError(
            f"Leibniz inverse residual {max(r1, r2):.3e} exceeds tol {tol:.1e} "
            "(numerically singular symbol)")
    return v
