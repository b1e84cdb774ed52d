r"""Discrete fractional integrals and derivatives on uniform grids.

All six operators are linear maps on node samples and are realized as
:class:`OperatorMatrix` instances:

* left/right Riemann-Liouville integrals -- product-trapezoidal rule
  (piecewise-linear interpolant integrated exactly against the kernel);
* left/right Caputo derivatives -- L1 scheme, exact on affine functions;
* left/right Riemann-Liouville derivatives -- Caputo value plus the
  end-point term :math:`f(a)(x-a)^{-\alpha}/\Gamma(1-\alpha)`.

Order ``1`` selects the classical counterparts (``d/dx``, ``-d/dx`` and the
plain integrals); order ``0`` for the integrals is the identity.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, GridError, ShapeError

__all__ = [
    "Grid",
    "FractionalOrder",
    "SampledFunction",
    "Kind",
    "Side",
    "OperatorMatrix",
    "gamma",
    "operator_matrix",
    "apply",
    "left_rlfi",
    "right_rlfi",
    "left_cfd",
    "right_cfd",
    "left_rlfd",
    "right_rlfd",
    "trapezoid",
    "ibp_residual_rlfi",
    "ibp_residual_caputo",
]


# {{{ gamma

# Lanczos approximation, g = 7, 9 terms
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x: float) -> float:
    """Gamma function for positive real arguments (Lanczos approximation)."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma is only defined here for finite x > 0, got {x!r}")

    if x == math.floor(x) and x <= 171:
        return float(math.factorial(int(x) - 1))

    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))

    x -= 1.0
    acc = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc += _LANCZOS_COEFFS[i] / (x + i)

    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def _rgamma(x: float) -> float:
    """Reciprocal gamma, with ``1/Gamma(0) = 0``."""
    return 0.0 if x == 0.0 else 1.0 / gamma(x)


# }}}


# {{{ domain types


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[a, b]`` into *n* intervals."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise GridError(f"need finite a < b, got a={self.a!r}, b={self.b!r}")
        if int(self.n) != self.n or self.n < 2:
            raise GridError(f"need an integer n >= 2, got n={self.n!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.a + np.arange(self.n + 1) * self.h

    @functools.cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w


@dataclass(frozen=True)
class FractionalOrder:
    """Order of a fractional operator; ``1`` flags the classical mode."""

    value: float

    def __post_init__(self) -> None:
        if not (0.0 < self.value <= 1.0):
            raise DomainError(f"fractional order must lie in (0, 1], got {self.value!r}")
        object.__setattr__(self, "value", float(self.value))

    @property
    def classical(self) -> bool:
        return self.value == 1.0

    def __float__(self) -> float:
        return self.value


OrderLike = Union[float, FractionalOrder]


def _order(alpha: OrderLike, *, allow_zero: bool = False) -> float:
    value = float(alpha)
    lower_ok = value >= 0.0 if allow_zero else value > 0.0
    if not (lower_ok and value <= 1.0):
        raise DomainError(f"order must lie in {'[0' if allow_zero else '(0'}, 1], got {value!r}")
    return value


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Node values of a function on a :class:`Grid`.

    *singular* marks nodes where the sampled function is genuinely unbounded
    (end-points of Riemann-Liouville derivatives). The stored value at such
    a node is the finite part only and must not enter norms.
    """

    grid: Grid
    values: np.ndarray
    singular: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n + 1,):
            raise ShapeError(
                f"expected {self.grid.n + 1} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite")
        values.flags.writeable = False

        if self.singular is None:
            singular = np.zeros(self.grid.n + 1, dtype=bool)
        else:
            singular = np.array(self.singular, dtype=bool)
            if singular.shape != values.shape:
                raise ShapeError("singular mask does not match the samples")
        singular.flags.writeable = False

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "singular", singular)

    @classmethod
    def from_callable(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> SampledFunction:
        return cls(grid, np.broadcast_to(f(grid.nodes), (grid.n + 1,)))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def reflected(self) -> SampledFunction:
        """Samples of ``x -> f(a + b - x)``."""
        return SampledFunction(self.grid, self.values[::-1], self.singular[::-1])

    def __len__(self) -> int:
        return self.grid.n + 1


class Kind(enum.Enum):
    LeftRLFI = "left_rlfi"
    RightRLFI = "right_rlfi"
    LeftRLFD = "left_rlfd"
    RightRLFD = "right_rlfd"
    LeftCFD = "left_cfd"
    RightCFD = "right_cfd"

    @property
    def is_left(self) -> bool:
        return self.name.startswith("Left")

    @property
    def is_integral(self) -> bool:
        return self.name.endswith("RLFI")


class Side(enum.Enum):
    Left = "left"
    Right = "right"


# }}}


# {{{ operator matrices


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    r"""Linear realization of one fractional operator on a grid.

    The operator is stored in factored form. Integrals act on the samples
    directly; derivatives act on the forward differences
    :math:`f_{j+1} - f_j`, which is what makes the Caputo derivative of a
    constant come out as exactly zero. Riemann-Liouville derivatives carry
    an extra column multiplying the anchoring end value.

    ``op @ values`` and :meth:`apply` evaluate the factored form and are the
    code path used by the apply-functions (:func:`left_cfd` etc.), so they
    agree bit for bit. :attr:`entries` is the equivalent dense
    :math:`(n+1)\times(n+1)` matrix, used for transposes and Hessians.
    """

    kind: Kind
    order: float
    grid: Grid
    weights: np.ndarray
    on_differences: bool
    endpoint: Optional[np.ndarray] = None

    @property
    def anchor(self) -> int:
        """Index of the end value multiplying :attr:`endpoint`."""
        return 0 if self.kind.is_left else self.grid.n

    @functools.cached_property
    def entries(self) -> np.ndarray:
        n = self.grid.n
        if self.on_differences:
            m = np.zeros((n + 1, n + 1))
            m[:, 1:] += self.weights
            m[:, :-1] -= self.weights
        else:
            m = np.array(self.weights)

        if self.endpoint is not None:
            m[:, self.anchor] += self.endpoint

        m.flags.writeable = False
        return m

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.grid.n + 1,):
            raise ShapeError(
                f"operator expects {self.grid.n + 1} samples, got shape {values.shape}")

        if self.on_differences:
            result = self.weights @ np.diff(values)
        else:
            result = self.weights @ values

        if self.endpoint is not None:
            result = result + self.endpoint * values[self.anchor]

        return result

    def __matmul__(self, other):
        if isinstance(other, SampledFunction):
            if other.grid != self.grid:
                raise ShapeError("operator and samples live on different grids")
            other = other.values
        return self.apply(other)


def _rlfi_weights(order: float, n: int, h: float) -> np.ndarray:
    """Product-trapezoidal weights for the left integral of the given order."""
    if order == 0.0:
        return np.eye(n + 1)

    p = order + 1.0
    k = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    m = (k - j).astype(np.float64)

    w = np.zeros((n + 1, n + 1))
    interior = (j >= 1) & (m >= 1)
    mi = m[interior]
    w[interior] = (mi + 1.0) ** p - 2.0 * mi**p + (mi - 1.0) ** p
    w[np.diag_indices(n + 1)] = 1.0

    kk = np.arange(1, n + 1, dtype=np.float64)
    w[1:, 0] = (kk - 1.0) ** p - (kk - order - 1.0) * kk**order
    w[0, :] = 0.0

    return w * (h**order * _rgamma(order + 2.0))


def _l1_weights(order: float, n: int, h: float) -> np.ndarray:
    """L1 weights of the left Caputo derivative, acting on forward differences."""
    if order == 1.0:
        # central differences inside, one-sided at the ends
        w = np.zeros((n + 1, n))
        rows = np.arange(1, n)
        w[rows, rows - 1] = 0.5 / h
        w[rows, rows] = 0.5 / h
        w[0, 0] = 1.0 / h
        w[n, n - 1] = 1.0 / h
        return w

    q = 1.0 - order
    k = np.arange(n + 1)[:, None]
    j = np.arange(n)[None, :]
    m = (k - 1 - j).astype(np.float64)

    w = np.zeros((n + 1, n))
    mask = m >= 0
    mm = m[mask]
    w[mask] = (mm + 1.0) ** q - mm**q

    return w * (h**-order * _rgamma(2.0 - order))


@functools.lru_cache(maxsize=64)
def _build(kind: Kind, order: float, grid: Grid) -> OperatorMatrix:
    n, h = grid.n, grid.h

    endpoint = None
    if kind.is_integral:
        weights = _rlfi_weights(order, n, h)
        on_differences = False
    else:
        weights = _l1_weights(order, n, h)
        on_differences = True
        if kind in (Kind.LeftRLFD, Kind.RightRLFD) and order < 1.0:
            endpoint = np.zeros(n + 1)
            endpoint[1:] = (np.arange(1, n + 1) * h) ** -order * _rgamma(1.0 - order)

    if not kind.is_left:
        # reflection x -> a + b - x; derivatives pick up a sign through f'
        weights = weights[::-1, ::-1]
        if on_differences:
            weights = -weights
        if endpoint is not None:
            endpoint = endpoint[::-1]

    weights = np.ascontiguousarray(weights)
    weights.flags.writeable = False
    if endpoint is not None:
        endpoint = np.ascontiguousarray(endpoint)
        endpoint.flags.writeable = False

    return OperatorMatrix(kind, order, grid, weights, on_differences, endpoint)


def operator_matrix(kind: Union[Kind, str], alpha: OrderLike, grid: Grid) -> OperatorMatrix:
    """Materialize the operator *kind* of order *alpha* on *grid*.

    Integral kinds accept order 0 (identity); derivative kinds need
    ``0 < alpha <= 1``.
    """
    kind = Kind(kind) if isinstance(kind, str) else kind
    order = _order(alpha, allow_zero=kind.is_integral)
    return _build(kind, order, grid)


# }}}


# {{{ apply functions


def _check_samples(f: SampledFunction) -> None:
    if not isinstance(f, SampledFunction):
        raise ShapeError(f"expected SampledFunction, got {type(f).__name__}")


def apply(kind: Union[Kind, str], f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    _check_samples(f)
    op = operator_matrix(kind, alpha, f.grid)
    values = op @ f

    singular = None
    if op.endpoint is not None and f.values[op.anchor] != 0.0:
        singular = np.zeros(f.grid.n + 1, dtype=bool)
        singular[op.anchor] = True

    return SampledFunction(f.grid, values, singular)


def left_rlfi(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    r""":math:`{}_aI_x^\alpha f`; exactly zero at :math:`x_0`."""
    return apply(Kind.LeftRLFI, f, alpha)


def right_rlfi(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    r""":math:`{}_xI_b^\alpha f`; exactly zero at :math:`x_n`."""
    return apply(Kind.RightRLFI, f, alpha)


def left_cfd(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    r"""Left Caputo derivative :math:`{}^C_aD_x^\alpha f` (L1 scheme).

    The value at :math:`x_0` has an empty history and is zero.
    """
    return apply(Kind.LeftCFD, f, alpha)


def right_cfd(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    r"""Right Caputo derivative :math:`{}^C_xD_b^\alpha f`; ``-f'`` at order 1."""
    return apply(Kind.RightCFD, f, alpha)


def left_rlfd(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    """Left Riemann-Liouville derivative.

    Node 0 is flagged singular whenever ``f(a) != 0``.
    """
    return apply(Kind.LeftRLFD, f, alpha)


def right_rlfd(f: SampledFunction, alpha: OrderLike) -> SampledFunction:
    """Right Riemann-Liouville derivative; node n is singular if ``f(b) != 0``."""
    return apply(Kind.RightRLFD, f, alpha)


# }}}


# {{{ integration by parts checks


def trapezoid(values: np.ndarray, grid: Grid) -> float:
    return float(grid.weights @ np.asarray(values, dtype=np.float64))


def _same_grid(f: SampledFunction, g: SampledFunction) -> None:
    _check_samples(f)
    _check_samples(g)
    if f.grid != g.grid:
        raise ShapeError("f and g are sampled on different grids")


def ibp_residual_rlfi(f: SampledFunction, g: SampledFunction, alpha: OrderLike) -> float:
    r"""Defect of :math:`\int g\,{}_aI_x^\alpha f = \int f\,{}_xI_b^\alpha g`."""
    _same_grid(f, g)
    grid = f.grid
    lhs = trapezoid(g.values * left_rlfi(f, alpha).values, grid)
    rhs = trapezoid(f.values * right_rlfi(g, alpha).values, grid)
    return abs(lhs - rhs)


def _integral_against_rlfd(f: SampledFunction, g: SampledFunction,
                           alpha: float, side: Side) -> float:
    r"""Quadrature of :math:`\int_a^b f\,D^\alpha g` for an RL derivative of *g*.

    The derivative splits into a Caputo part, integrated by the trapezoid
    rule, and the weakly singular end-point term
    :math:`g(b)(b-x)^{-\alpha}/\Gamma(1-\alpha)`, whose integral against *f*
    is :math:`g(b)\,{}_aI_x^{1-\alpha}f(b)` and is evaluated with the
    product-trapezoidal weights.
    """
    grid = f.grid
    if side is Side.Left:
        # right RLFD of g, singular at b
        smooth = trapezoid(f.values * right_cfd(g, alpha).values, grid)
        if alpha == 1.0:
            return smooth
        return smooth + g.values[-1] * left_rlfi(f, 1.0 - alpha).values[-1]

    smooth = trapezoid(f.values * left_cfd(g, alpha).values, grid)
    if alpha == 1.0:
        return smooth
    return smooth + g.values[0] * right_rlfi(f, 1.0 - alpha).values[0]


def ibp_residual_caputo(f: SampledFunction, g: SampledFunction, alpha: OrderLike,
                        side: Union[Side, str] = Side.Left) -> float:
    r"""Defect of the Caputo integration-by-parts formula on the given side.

    Left:  :math:`\int g\,{}^C_aD_x^\alpha f
    = [f\,{}_xI_b^{1-\alpha}g]_a^b + \int f\,{}_xD_b^\alpha g`.

    Right: :math:`\int g\,{}^C_xD_b^\alpha f
    = -[f\,{}_aI_x^{1-\alpha}g]_a^b + \int f\,{}_aD_x^\alpha g`.
    """
    _same_grid(f, g)
    side = Side(side) if isinstance(side, str) else side
    order = _order(alpha)
    grid = f.grid

    if side is Side.Left:
        lhs = trapezoid(g.values * left_cfd(f, order).values, grid)
        ig = right_rlfi(g, 1.0 - order).values
        boundary = f.values[-1] * ig[-1] - f.values[0] * ig[0]
    else:
        lhs = trapezoid(g.values * right_cfd(f, order).values, grid)
        ig = left_rlfi(g, 1.0 - order).values
        boundary = -(f.values[-1] * ig[-1] - f.values[0] * ig[0])

    rhs = boundary + _integral_against_rlfd(f, g, order, side)
    return abs(lhs - rhs)


# }}}

