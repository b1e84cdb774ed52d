"""Variational problems with Caputo derivatives and free end-point values.

A Lagrangian is called as ``L(x, y, z, t, u, v)`` where ``z`` is the left
Caputo derivative of order alpha, ``t`` the right Caputo derivative of
order beta and ``u``, ``v`` the end values ``y(a)``, ``y(b)``. Partial
derivatives are numbered 1..6 in that order. All callables must accept
numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ConfigError, ConstraintError, EvaluationError, RegistryError, ShapeError)
from .operators import (
    FractionalOrder, Grid, SampledFunction, left_cfd, right_cfd, trapezoid)

__all__ = [
    "Lagrangian",
    "Fixed",
    "Free",
    "BoundarySpec",
    "Problem",
    "fd_partial",
    "eval_functional",
    "slot_values",
    "builtin_problem",
    "classical_reference",
    "REGISTRY",
]

LagrangianFn = Callable[..., np.ndarray]

_CBRT_EPS = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)


@dataclass(frozen=True)
class Lagrangian:
    """Integrand ``L(x, y, z, t, u, v)`` with optional analytic partials.

    *partials* maps an argument index (1..6) to a callable with the same
    signature as *func*. Missing entries fall back to central differences,
    see :func:`fd_partial`.
    """

    func: LagrangianFn
    partials: Mapping[int, LagrangianFn] = field(default_factory=dict)
    smoothness_declared: bool = True

    def __post_init__(self) -> None:
        bad = [i for i in self.partials if i not in range(1, 7)]
        if bad:
            raise ValueError(f"partial indices must be in 1..6, got {bad}")
        object.__setattr__(self, "partials", dict(self.partials))

    def __call__(self, x, y, z, t, u, v):
        return self.func(x, y, z, t, u, v)

    def partial(self, i: int, *args):
        """``d_i L`` at *args*, analytic when available."""
        fn = self.partials.get(i)
        if fn is not None:
            return np.broadcast_to(fn(*args), np.broadcast(*args).shape) * 1.0
        return fd_partial(self, i, args, prefer_analytic=False)

    def __add__(self, other: Lagrangian) -> Lagrangian:
        return self.combine(1.0, other, 1.0)

    def combine(self, c1: float, other: Lagrangian, c2: float) -> Lagrangian:
        """The Lagrangian ``c1 * self + c2 * other``."""
        def func(*args):
            return c1 * self.func(*args) + c2 * other.func(*args)

        partials = {}
        for i in set(self.partials) & set(other.partials):
            partials[i] = (lambda f1, f2: lambda *a: c1 * f1(*a) + c2 * f2(*a))(
                self.partials[i], other.partials[i])
        return Lagrangian(func, partials, self.smoothness_declared and other.smoothness_declared)


def fd_partial(lag: Lagrangian, i: int, point: Sequence, *,
               prefer_analytic: bool = True) -> Union[float, np.ndarray]:
    """Partial derivative of *lag* in argument *i* at *point*.

    Uses the analytic partial when *lag* has one and *prefer_analytic* is
    set; otherwise a central difference with step
    ``cbrt(eps) * max(1, |point_i|)``. Array arguments are differentiated
    element-wise.
    """
    if i not in range(1, 7):
        raise ValueError(f"partial index must be in 1..6, got {i}")
    if len(point) != 6:
        raise ShapeError(f"expected 6 arguments, got {len(point)}")
    if prefer_analytic and i in lag.partials:
        return lag.partial(i, *point)

    args = [np.asarray(p, dtype=np.float64) for p in point]
    xi = args[i - 1]
    step = _CBRT_EPS * np.maximum(1.0, np.abs(xi))

    plus = list(args)
    minus = list(args)
    # divide by the realized step, not the nominal one
    xp = xi + step
    xm = xi - step
    plus[i - 1] = xp
    minus[i - 1] = xm

    fp = np.asarray(lag.func(*plus), dtype=np.float64)
    fm = np.asarray(lag.func(*minus), dtype=np.float64)
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        bad = np.flatnonzero(~(np.isfinite(fp) & np.isfinite(fm)).ravel())
        raise EvaluationError(
            f"Lagrangian is not finite near the probe point (argument {i})",
            node=int(bad[0]) if bad.size else None)

    result = (fp - fm) / (xp - xm)
    return float(result) if result.ndim == 0 else result


# {{{ boundary specification


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ConfigError(f"fixed boundary value must be finite, got {self.value!r}")
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Free:
    pass


EndCondition = Union[Fixed, Free]


@dataclass(frozen=True)
class BoundarySpec:
    left: EndCondition = Free()
    right: EndCondition = Free()

    @property
    def left_free(self) -> bool:
        return isinstance(self.left, Free)

    @property
    def right_free(self) -> bool:
        return isinstance(self.right, Free)

    def fixed_nodes(self, n: int) -> Dict[int, float]:
        """Map of node index to prescribed value."""
        nodes = {}
        if isinstance(self.left, Fixed):
            nodes[0] = self.left.value
        if isinstance(self.right, Fixed):
            nodes[n] = self.right.value
        return nodes


# }}}


@dataclass(frozen=True)
class Problem:
    lagrangian: Lagrangian
    alpha: FractionalOrder
    beta: FractionalOrder
    boundary: BoundarySpec
    grid: Grid
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for attr in ("alpha", "beta"):
            value = getattr(self, attr)
            if not isinstance(value, FractionalOrder):
                object.__setattr__(self, attr, FractionalOrder(value))

    def with_grid(self, grid: Grid) -> Problem:
        return replace(self, grid=grid)

    def project(self, y: Union[SampledFunction, np.ndarray], *, tol: float = 1e-12) -> np.ndarray:
        """Node values of *y* with fixed end values enforced.

        Raises :class:`ConstraintError` if a fixed value is off by more
        than *tol*.
        """
        if isinstance(y, SampledFunction):
            if y.grid != self.grid:
                raise ShapeError("y is not sampled on the problem grid")
            values = np.array(y.values)
        else:
            values = np.array(y, dtype=np.float64)
            if values.shape != (self.grid.n + 1,):
                raise ShapeError(f"expected {self.grid.n + 1} values, got {values.shape}")

        for node, target in self.boundary.fixed_nodes(self.grid.n).items():
            if abs(values[node] - target) > tol:
                raise ConstraintError(
                    f"y[{node}] = {values[node]!r} violates the fixed value {target!r}")
            values[node] = target
        return values


def slot_values(p: Problem, values: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Node-wise arguments ``(x, y, z, t, u, v)`` of the Lagrangian."""
    grid = p.grid
    f = SampledFunction(grid, values)
    ones = np.ones(grid.n + 1)
    return (
        grid.nodes,
        f.values,
        left_cfd(f, p.alpha).values,
        right_cfd(f, p.beta).values,
        values[0] * ones,
        values[-1] * ones,
    )


def _checked(values, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        node = int(np.flatnonzero(~np.isfinite(values))[0])
        raise EvaluationError(f"{what} is not finite at node {node}", node=node)
    return values


def eval_functional(p: Problem, y: Union[SampledFunction, np.ndarray]) -> float:
    """Trapezoidal approximation of the functional at *y*."""
    values = p.project(y)
    args = slot_values(p, values)
    integrand = np.broadcast_to(p.lagrangian(*args), values.shape)
    return trapezoid(_checked(integrand, "Lagrangian"), p.grid)


# {{{ registry


def _example_lagrangian(gamma: float, lam: float) -> Lagrangian:
    def func(x, y, z, t, u, v):
        return 0.5 * (z**2 + gamma * u**2 + lam * (v - 1.0) ** 2)

    def zero(x, y, z, t, u, v):
        return 0.0 * x

    return Lagrangian(func, {
        1: zero,
        2: zero,
        3: lambda x, y, z, t, u, v: z,
        4: zero,
        5: lambda x, y, z, t, u, v: gamma * u,
        6: lambda x, y, z, t, u, v: lam * (v - 1.0),
    })


def _energy_lagrangian() -> Lagrangian:
    def zero(x, y, z, t, u, v):
        return 0.0 * x

    return Lagrangian(
        lambda x, y, z, t, u, v: 0.5 * z**2,
        {1: zero, 2: zero, 3: lambda x, y, z, t, u, v: z, 4: zero, 5: zero, 6: zero})


def _number(params: Mapping, key: str, default=None) -> float:
    if key not in params or params[key] is None:
        if default is None:
            raise ConfigError(f"missing parameter {key!r}")
        return default
    try:
        value = float(params[key])
    except (TypeError, ValueError):
        raise ConfigError(f"parameter {key!r} must be a number, got {params[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"parameter {key!r} must be finite, got {value!r}")
    return value


def _grid(params: Mapping) -> Grid:
    a = _number(params, "a", 0.0)
    b = _number(params, "b", 1.0)
    n = _number(params, "n")
    if n != int(n) or n < 2:
        raise ConfigError(f"parameter 'n' must be an integer >= 2, got {params['n']!r}")
    if not a < b:
        raise ConfigError(f"need a < b, got a={a}, b={b}")
    return Grid(a, b, int(n))


def _order_param(params: Mapping, key: str, default=None) -> FractionalOrder:
    value = _number(params, key, default)
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"parameter {key!r} must lie in (0, 1], got {value}")
    return FractionalOrder(value)


def _positive(params: Mapping, key: str) -> float:
    value = _number(params, key)
    if value <= 0.0:
        raise ConfigError(f"parameter {key!r} must be positive, got {value}")
    return value


def _caputo_quadratic(params: Mapping) -> Problem:
    gamma, lam = _positive(params, "gamma"), _positive(params, "lambda")
    alpha = _order_param(params, "alpha")
    beta = _order_param(params, "beta", alpha.value)
    return Problem(_example_lagrangian(gamma, lam), alpha, beta, BoundarySpec(Free(), Free()),
                   _grid(params), "caputo_quadratic_free_endpoints",
                   {"gamma": gamma, "lambda": lam})


def _classical_limit(params: Mapping) -> Problem:
    gamma, lam = _positive(params, "gamma"), _positive(params, "lambda")
    for key in ("alpha", "beta"):
        if key in params and params[key] is not None and _number(params, key) != 1.0:
            raise ConfigError(f"classical_limit requires {key} = 1")
    one = FractionalOrder(1.0)
    return Problem(_example_lagrangian(gamma, lam), one, one, BoundarySpec(Free(), Free()),
                   _grid(params), "classical_limit", {"gamma": gamma, "lambda": lam})


def _fixed_endpoint_quadratic(params: Mapping) -> Problem:
    alpha = _order_param(params, "alpha")
    beta = _order_param(params, "beta", alpha.value)
    ya = _number(params, "ya", 0.0)
    yb = _number(params, "yb", 1.0)
    return Problem(_energy_lagrangian(), alpha, beta, BoundarySpec(Fixed(ya), Fixed(yb)),
                   _grid(params), "fixed_endpoint_quadratic", {"ya": ya, "yb": yb})


REGISTRY: Dict[str, Callable[[Mapping], Problem]] = {
    "caputo_quadratic_free_endpoints": _caputo_quadratic,
    "classical_limit": _classical_limit,
    "fixed_endpoint_quadratic": _fixed_endpoint_quadratic,
}


def builtin_problem(name: str, params: Mapping) -> Problem:
    """Instantiate a registered problem.

    ``caputo_quadratic_free_endpoints``
        ``L = (z^2 + gamma u^2 + lambda (v - 1)^2) / 2``, both ends free.
        Needs ``gamma``, ``lambda``, ``alpha``, ``n``.
    ``classical_limit``
        The same Lagrangian with ``alpha = beta = 1``. Needs ``gamma``,
        ``lambda``, ``n``.
    ``fixed_endpoint_quadratic``
        ``L = z^2 / 2`` with ``y(a) = ya``, ``y(b) = yb`` (default 0 and 1).
        Needs ``alpha``, ``n``.

    ``a``, ``b`` default to 0 and 1; ``beta`` defaults to ``alpha``.
    """
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise RegistryError(
            f"unknown problem {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    return factory(params)


def classical_reference(gamma: float, lam: float, a: float = 0.0, b: float = 1.0
                        ) -> Callable[[np.ndarray], np.ndarray]:
    r"""Affine minimizer of the classical quadratic problem on ``[a, b]``.

    Stationarity gives :math:`y'' = 0` with
    :math:`y'(a) = \ell\gamma y(a)` and :math:`y'(b) = -\ell\lambda(y(b) - 1)`,
    :math:`\ell = b - a`. On ``[0, 1]`` this is
    ``(gamma*lam*x + lam) / (gamma*lam + lam + gamma)``.
    """
    ell = b - a
    # y = c + s (x - a):  s = ell*gamma*c,  s = -ell*lam*(c + s*ell - 1)
    c = lam / (gamma + lam + ell**2 * gamma * lam)
    s = ell * gamma * c

    def ybar(x):
        return c + s * (np.asarray(x, dtype=np.float64) - a)

    return ybar


# }}}
