"""Uniform-grid discretisation of the spatial operators.

The domain [0, a] is split into N equal subintervals with N + 1 nodes
x_i = i a / N, both end points included.  Two operators are provided:

* the top-hat convolution u -> int_{alpha(x)}^{beta(x)} u(y) dy, where the
  window is [0, a] when a <= 1/2 and [x - 1/2, x + 1/2] clipped to [0, a]
  otherwise.  The integrand is taken to vary linearly between nodes, so the
  quadrature is the trapezium rule with fractional end panels.
* the second derivative by central differences, with a three-point closure
  for Neumann ends.

Window limits are handled in index units (position / dx).  The half-width
of the window in index units is m = N / (2a); in these units the whole
operator depends on a only through m and the overall factor dx.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InvalidResolutionError, ParameterError

__all__ = [
    "BC",
    "Params",
    "Grid",
    "Profile",
    "ConvolutionOperator",
    "build_grid",
    "build_convolution",
    "apply_convolution",
    "second_derivative",
    "as_values",
    "DEFAULT_N",
]

DEFAULT_N = 1000
MIN_N = 8


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BC":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"bc must be 'dirichlet' or 'neumann', got {value!r}") from None


@dataclass(frozen=True)
class Params:
    """Problem instance: domain length ``a``, diffusivity ``D`` and boundary kind."""

    a: float
    D: float
    bc: BC = BC.DIRICHLET

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise ParameterError(f"a must be > 0, got {self.a}")
        if not (np.isfinite(self.D) and self.D > 0):
            raise ParameterError(f"D must be > 0, got {self.D}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "bc", BC.parse(self.bc))

    def with_a(self, a: float) -> "Params":
        return Params(a, self.D, self.bc)


@dataclass(frozen=True)
class Grid:
    a: float
    N: int
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def dx(self) -> float:
        return self.a / self.N

    def __len__(self) -> int:
        return self.N + 1

    def trapezium_weights(self) -> np.ndarray:
        w = np.full(self.N + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class Profile:
    """Nodal values of a solution on a grid."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N + 1,):
            raise DimensionError(f"profile has shape {v.shape}, grid needs ({self.grid.N + 1},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.values.size


def as_values(u, grid: Grid | None = None) -> np.ndarray:
    """Return the nodal values of ``u`` (Profile or array), checking the length."""
    if isinstance(u, Profile):
        if grid is not None and (u.grid.N != grid.N or not math.isclose(u.grid.a, grid.a)):
            raise DimensionError("profile lives on a different grid")
        return u.values
    v = np.asarray(u, dtype=float)
    if grid is not None and v.shape != (grid.N + 1,):
        raise DimensionError(f"array has shape {v.shape}, grid needs ({grid.N + 1},)")
    return v


def build_grid(params: Params | float, N: int = DEFAULT_N) -> Grid:
    a = params.a if isinstance(params, Params) else float(params)
    if int(N) != N or N < MIN_N:
        raise InvalidResolutionError(f"N must be an integer >= {MIN_N}, got {N}")
    N = int(N)
    nodes = np.linspace(0.0, a, N + 1)
    nodes.setflags(write=False)
    return Grid(a=a, N=N, nodes=nodes)


def _hat_primitive(t: np.ndarray) -> np.ndarray:
    """Integral of the unit hat function over (-inf, t]."""
    t = np.clip(t, -1.0, 1.0)
    return np.where(t < 0.0, 0.5 * (t + 1.0) ** 2, 1.0 - 0.5 * (1.0 - t) ** 2)


def window_limits(a: float, N: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Index-space integration limits (lo_i, hi_i) and the half-width m."""
    i = np.arange(N + 1, dtype=float)
    if a <= 0.5:
        m = math.inf
        lo = np.zeros(N + 1)
        hi = np.full(N + 1, float(N))
    else:
        m = N / (2.0 * a)
        lo = np.maximum(i - m, 0.0)
        hi = np.minimum(i + m, float(N))
    return lo, hi, m


def _weight_bands(lo: np.ndarray, hi: np.ndarray, halfwidth: int) -> np.ndarray:
    """Row-banded weights (index units): bands[i, k] multiplies u[i + k - halfwidth].

    Nodes at least one cell inside the window carry weight 1; only the few
    nodes within one cell of either end need the hat primitive.
    """
    n = lo.size
    i = np.arange(n)
    k = np.arange(2 * halfwidth + 1)[None, :]
    first = np.ceil(lo + 1.0) - i + halfwidth
    last = np.floor(hi - 1.0) - i + halfwidth
    w = ((k >= first[:, None]) & (k <= last[:, None])).astype(float)
    for end in (lo, hi):
        base = np.floor(end).astype(np.int64)
        for shift in (-1, 0, 1, 2):
            jj = base + shift
            kk = jj - i + halfwidth
            ok = (kk >= 0) & (kk <= 2 * halfwidth) & (jj >= 0) & (jj < n)
            r = i[ok]
            w[r, kk[ok]] = _hat_primitive(hi[r] - jj[ok]) - _hat_primitive(lo[r] - jj[ok])
    return w


@dataclass(frozen=True, eq=False)
class ConvolutionOperator:
    """Precomputed trapezium weights for the top-hat convolution on one grid.

    ``bands[i, k]`` is the weight (already multiplied by dx) of node
    ``i + k - halfwidth`` in row ``i``.  ``alpha``/``beta`` are the physical
    integration limits per node.
    """

    grid: Grid
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)
    halfwidth: int
    bands: np.ndarray = field(repr=False)
    # cell index and offset of each window end, reused by every application
    lo_cell: tuple | None = field(repr=False, default=None)
    hi_cell: tuple | None = field(repr=False, default=None)

    @property
    def m(self) -> float:
        return self.grid.N / (2.0 * self.grid.a) if self.grid.a > 0.5 else math.inf

    @property
    def weights(self) -> sp.csr_matrix:
        return bands_to_csr(self.bands, self.halfwidth)

    def dense(self) -> np.ndarray:
        return self.weights.toarray()

    def apply(self, u) -> np.ndarray:
        return apply_convolution(self, u)


def build_convolution(grid: Grid, params: Params | None = None) -> ConvolutionOperator:
    if params is not None and not math.isclose(params.a, grid.a, rel_tol=1e-14):
        raise DimensionError(f"grid length {grid.a} does not match a = {params.a}")
    N, a = grid.N, grid.a
    lo, hi, m = window_limits(a, N)
    halfwidth = N if not math.isfinite(m) else min(int(math.ceil(m)) + 1, N)
    bands = _weight_bands(lo, hi, halfwidth) * grid.dx
    for arr in (lo, hi, bands):
        arr.setflags(write=False)
    alpha = lo * grid.dx
    beta = hi * grid.dx
    return ConvolutionOperator(grid, alpha, beta, lo, hi, halfwidth, bands, _cells(lo, N), _cells(hi, N))


def _cells(p: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.minimum(np.floor(p).astype(np.intp), N - 1)
    return j, p - j


def _cumulative_at(u: np.ndarray, cum: np.ndarray, cell: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Integral (index units) of the linear interpolant of u over [0, p], p = j + th."""
    j, th = cell
    uj = u[j]
    return cum[j] + th * uj + 0.5 * th * th * (u[j + 1] - uj)


def interpolate_index(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Linear interpolant of nodal values u at fractional index positions p."""
    N = u.size - 1
    j = np.minimum(np.floor(p).astype(np.intp), N - 1)
    th = p - j
    return (1.0 - th) * u[j] + th * u[j + 1]


def apply_convolution(op: ConvolutionOperator, u) -> np.ndarray:
    """Windowed integrals of ``u`` at every node, O(N) via a cumulative sum."""
    v = as_values(u)
    if v.shape != (op.grid.N + 1,):
        raise DimensionError(f"array has shape {v.shape}, operator needs ({op.grid.N + 1},)")
    cum = np.empty_like(v)
    cum[0] = 0.0
    np.cumsum(0.5 * (v[1:] + v[:-1]), out=cum[1:])
    hi_cell = op.hi_cell or _cells(op.hi, op.grid.N)
    lo_cell = op.lo_cell or _cells(op.lo, op.grid.N)
    return op.grid.dx * (_cumulative_at(v, cum, hi_cell) - _cumulative_at(v, cum, lo_cell))


def second_derivative(grid: Grid, u, bc: BC | str = BC.DIRICHLET) -> np.ndarray:
    """Second difference of ``u``.

    Interior nodes use the three-point central formula.  At the end points a
    Dirichlet problem gets the one-sided four-point formula (the boundary
    rows of assembled systems carry the boundary condition instead); a
    Neumann problem gets the second-order formula that builds in u' = 0.
    """
    bc = BC.parse(bc)
    v = as_values(u, grid)
    h2 = grid.dx**2
    out = np.empty_like(v)
    out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h2
    if bc is BC.DIRICHLET:
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
        out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    else:
        out[0] = (-7.0 * v[0] + 8.0 * v[1] - v[2]) / (2.0 * h2)
        out[-1] = (-7.0 * v[-1] + 8.0 * v[-2] - v[-3]) / (2.0 * h2)
    return out


# -- band storage helpers ---------------------------------------------------


def bands_to_csr(bands: np.ndarray, halfwidth: int) -> sp.csr_matrix:
    n = bands.shape[0]
    rows = np.repeat(np.arange(n), bands.shape[1])
    cols = (np.arange(n)[:, None] + np.arange(-halfwidth, halfwidth + 1)[None, :]).ravel()
    vals = bands.ravel()
    keep = (cols >= 0) & (cols < n) & (vals != 0.0)
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))


def _diagonals(n: int, halfwidth: int):
    """Yield (k, offset, rows) for each stored diagonal of an n x n banded matrix."""
    for k in range(2 * halfwidth + 1):
        off = k - halfwidth
        lo, hi = max(0, -off), min(n, n - off)
        if lo < hi:
            yield k, off, slice(lo, hi)


def bands_to_lapack(bands: np.ndarray, halfwidth: int) -> np.ndarray:
    """Convert row-banded storage to the layout expected by ``scipy.linalg.solve_banded``."""
    n, width = bands.shape
    ab = np.zeros((width, n))
    for k, off, rows in _diagonals(n, halfwidth):
        ab[halfwidth - off, rows.start + off : rows.stop + off] = bands[rows, k]
    return ab


def bands_to_dense(bands: np.ndarray, halfwidth: int) -> np.ndarray:
    n, width = bands.shape
    # row i of the padded matrix holds its band in columns i .. i + 2 * halfwidth
    pad = np.zeros((n, n + 2 * halfwidth))
    view = np.lib.stride_tricks.as_strided(pad, shape=(n, width), strides=(pad.strides[0] + pad.strides[1], pad.strides[1]))
    view[:] = bands
    return pad[:, halfwidth : halfwidth + n].copy()
