"""Direct method: minimize the discretized functional over the node values.

Free end values are ordinary unknowns, so the natural boundary conditions
are not imposed but emerge as first-order optimality of the discrete
problem; :mod:`fracvar.residuals` checks them afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .operators import Kind, SampledFunction, operator_matrix
from .problem import (
    Problem, builtin_problem, classical_reference, eval_functional, slot_values)
from .residuals import ResidualReport, residual_report

__all__ = [
    "SolveOptions",
    "SolveReport",
    "discrete_gradient",
    "discrete_hessian",
    "initial_guess",
    "solve_direct",
    "ConvergenceRow",
    "ConvergenceTable",
    "convergence_study",
]

logger = logging.getLogger(__name__)

_CBRT_EPS = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class SolveOptions:
    """Options of :func:`solve_direct`.

    *metric* selects the inner product defining the steepest-descent
    direction: ``"hessian"`` (the local quadratic model of the discrete
    functional, i.e. a Newton-type direction) or ``"euclidean"`` (plain
    gradient descent).
    """

    max_iters: int = 5000
    grad_tol: float = 1e-8
    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    seed: int = 0
    metric: str = "hessian"
    perturbation: float = 1e-2

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not (self.grad_tol > 0 and self.step_init > 0):
            raise ValueError("grad_tol and step_init must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.metric not in ("hessian", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.perturbation < 0:
            raise ValueError("perturbation must be non-negative")


@dataclass(frozen=True)
class SolveReport:
    minimizer: SampledFunction
    j_value: float
    grad_norm: float
    el_residual_norm: float
    nbc_left_residual: Optional[float]
    nbc_right_residual: Optional[float]
    iterations: int
    converged: bool
    message: str = ""
    residuals: Optional[ResidualReport] = field(default=None, repr=False)


# {{{ derivatives of the discrete functional


def _free_mask(p: Problem) -> np.ndarray:
    mask = np.ones(p.grid.n + 1, dtype=bool)
    for node in p.boundary.fixed_nodes(p.grid.n):
        mask[node] = False
    return mask


def discrete_gradient(p: Problem, y) -> np.ndarray:
    r"""Exact gradient of the discrete functional with respect to node values.

    With trapezoid weights :math:`w` and Caputo matrices :math:`A, B`,

    .. math::

        g = w\,\partial_2 L + A^T (w\,\partial_3 L) + B^T (w\,\partial_4 L)
            + e_0 \sum w\,\partial_5 L + e_n \sum w\,\partial_6 L.

    Entries at fixed nodes are zero.
    """
    values = p.project(y)
    args = slot_values(p, values)
    lag = p.lagrangian
    w = p.grid.weights
    shape = values.shape

    def weighted(k):
        return w * np.broadcast_to(lag.partial(k, *args), shape)

    g = weighted(2)
    g = g + operator_matrix(Kind.LeftCFD, p.alpha, p.grid).entries.T @ weighted(3)
    g = g + operator_matrix(Kind.RightCFD, p.beta, p.grid).entries.T @ weighted(4)
    g[0] += np.sum(weighted(5))
    g[-1] += np.sum(weighted(6))

    g[~_free_mask(p)] = 0.0
    return g


def _second_partials(p: Problem, args) -> dict:
    """Node samples of ``d_k d_l L`` for k, l in 2..6 (central differences
    of the first partials), symmetrized; all-zero entries are omitted."""
    lag = p.lagrangian
    shape = args[0].shape
    raw = {}
    for l in range(2, 7):
        xl = args[l - 1]
        step = _CBRT_EPS * np.maximum(1.0, np.abs(xl))
        plus, minus = list(args), list(args)
        plus[l - 1] = xl + step
        minus[l - 1] = xl - step
        realized = plus[l - 1] - minus[l - 1]
        for k in range(2, 7):
            fp = np.broadcast_to(lag.partial(k, *plus), shape)
            fm = np.broadcast_to(lag.partial(k, *minus), shape)
            raw[k, l] = (fp - fm) / realized

    second = {}
    for k in range(2, 7):
        for l in range(k, 7):
            d = 0.5 * (raw[k, l] + raw[l, k])
            if np.any(d != 0.0):
                second[k, l] = d
    return second


def discrete_hessian(p: Problem, y) -> np.ndarray:
    """Hessian of the discrete functional (finite differences of the partials
    inside an exact chain rule), rows/columns of fixed nodes included."""
    values = p.project(y)
    args = slot_values(p, values)
    n1 = p.grid.n + 1
    w = p.grid.weights

    dense = {
        3: operator_matrix(Kind.LeftCFD, p.alpha, p.grid).entries,
        4: operator_matrix(Kind.RightCFD, p.beta, p.grid).entries,
    }
    rows = {5: 0, 6: n1 - 1}

    def right_factor(l, d):
        # diag(d) J_l
        if l == 2:
            return np.diag(d)
        if l in dense:
            return d[:, None] * dense[l]
        m = np.zeros((n1, n1))
        m[:, rows[l]] = d
        return m

    def left_apply(k, m):
        # J_k^T m
        if k == 2:
            return m
        if k in dense:
            return dense[k].T @ m
        out = np.zeros_like(m)
        out[rows[k]] = m.sum(axis=0)
        return out

    hess = np.zeros((n1, n1))
    for (k, l), d in _second_partials(p, args).items():
        block = left_apply(k, right_factor(l, w * d))
        hess += block
        if k != l:
            hess += block.T
    return hess


# }}}


# {{{ direct solver


def initial_guess(p: Problem, seed: int = 0, perturbation: float = 1e-2) -> np.ndarray:
    """Affine interpolant of the fixed end data, plus a seeded smooth wiggle.

    A single fixed end gives a constant; two free ends start from the
    constant ``0.5 (a + b)``. The wiggle vanishes at fixed nodes.
    """
    grid = p.grid
    x = grid.nodes
    s = (x - grid.a) / (grid.b - grid.a)
    fixed = p.boundary.fixed_nodes(grid.n)

    if 0 in fixed and grid.n in fixed:
        y = fixed[0] + (fixed[grid.n] - fixed[0]) * s
    elif fixed:
        y = np.full_like(x, next(iter(fixed.values())))
    else:
        y = np.full_like(x, 0.5 * (grid.a + grid.b))

    if perturbation > 0:
        rng = np.random.default_rng(seed)
        c = rng.uniform(-1.0, 1.0, size=3)
        wiggle = c[0] + c[1] * s + c[2] * s**2
        if not p.boundary.left_free:
            wiggle = wiggle * s
        if not p.boundary.right_free:
            wiggle = wiggle * (1.0 - s)
        y = y + perturbation * wiggle

    for node, value in fixed.items():
        y[node] = value
    return y


def _direction(p: Problem, y: np.ndarray, g: np.ndarray, free: np.ndarray,
               metric: str) -> np.ndarray:
    d = np.zeros_like(g)
    if metric == "euclidean":
        d[free] = -g[free]
        return d

    hess = discrete_hessian(p, y)[np.ix_(free, free)]
    scale = max(np.max(np.abs(np.diag(hess))), 1e-300)
    shift = 0.0
    while True:
        try:
            factor = sla.cho_factor(hess + shift * np.eye(len(hess)), check_finite=False)
            break
        except np.linalg.LinAlgError:
            shift = max(10.0 * shift, 1e-10 * scale)
            if shift > 1e10 * scale:
                d[free] = -g[free]
                return d

    d[free] = -sla.cho_solve(factor, g[free], check_finite=False)
    return d


def _make_report(p: Problem, y: np.ndarray, j: float, gnorm: float, iterations: int,
                 converged: bool, message: str) -> SolveReport:
    res = residual_report(p, y)
    return SolveReport(
        minimizer=SampledFunction(p.grid, y),
        j_value=j,
        grad_norm=gnorm,
        el_residual_norm=res.el_norm,
        nbc_left_residual=res.nbc_left,
        nbc_right_residual=res.nbc_right,
        iterations=iterations,
        converged=converged,
        message=message,
        residuals=res,
    )


def solve_direct(p: Problem, opts: Optional[SolveOptions] = None) -> SolveReport:
    """Minimize the discrete functional by descent with Armijo backtracking.

    Each iteration moves along the steepest-descent direction of the chosen
    metric (falling back to ``-g`` when that is not a descent direction) and
    backtracks until the sufficient-decrease condition holds. Fixed nodes
    never move. A step below ``1e-16``, or one that leaves ``y`` unchanged
    in floating point, ends the run with ``converged=False``.
    """
    opts = opts or SolveOptions()
    free = _free_mask(p)

    y = initial_guess(p, opts.seed, opts.perturbation)
    j = eval_functional(p, y)
    g = discrete_gradient(p, y)
    gnorm = float(np.max(np.abs(g)))

    iterations = 0
    while gnorm > opts.grad_tol:
        if iterations >= opts.max_iters:
            return _make_report(p, y, j, gnorm, iterations, False,
                                f"reached max_iters={opts.max_iters}")

        d = _direction(p, y, g, free, opts.metric)
        slope = float(g @ d)
        if not slope < 0.0:
            d = np.where(free, -g, 0.0)
            slope = float(g @ d)

        step = opts.step_init
        while True:
            trial = y + step * d
            j_trial = eval_functional(p, trial)
            if j_trial <= j + opts.armijo_c * step * slope:
                break
            step *= opts.backtrack_factor
            if step < _MIN_STEP:
                return _make_report(p, y, j, gnorm, iterations, False,
                                    "line search failed: step underflow")

        if np.array_equal(trial, y):
            return _make_report(p, y, j, gnorm, iterations, False,
                                "line search failed: step does not change y")
        y, j = trial, j_trial
        g = discrete_gradient(p, y)
        gnorm = float(np.max(np.abs(g)))
        iterations += 1
        logger.debug("iter %d  J=%.16g  |g|=%.3e  step=%.3e", iterations, j, gnorm, step)

    return _make_report(p, y, j, gnorm, iterations, True, "gradient tolerance reached")


# }}}


# {{{ refinement study


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    j_value: float
    el_norm: float
    nbc_left: Optional[float]
    nbc_right: Optional[float]
    converged: bool
    max_dev_from_reference: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceTable:
    rows: List[ConvergenceRow]

    def column(self, name: str) -> List[Optional[float]]:
        return [getattr(r, name) for r in self.rows]

    def monotone(self, name: str, slack: float = 0.1, atol: float = 1e-10) -> Optional[bool]:
        """Whether column *name* is non-increasing from coarse to fine.

        Allows growth by a factor ``1 + slack`` plus *atol* (round-off
        floor). Returns ``None`` when some solve did not converge.
        """
        if not all(r.converged for r in self.rows):
            return None
        values = self.column(name)
        if any(v is None for v in values):
            return None
        return all(b <= (1.0 + slack) * a + atol for a, b in zip(values, values[1:]))


def convergence_study(name: str, params: Mapping, grid_sizes: Sequence[int],
                      opts: Optional[SolveOptions] = None,
                      reference: Optional[str] = None) -> ConvergenceTable:
    """Solve the registry problem *name* once per grid size.

    ``reference="classical"`` adds the max node deviation from the affine
    minimizer of the classical quadratic problem (needs ``gamma`` and
    ``lambda`` in *params*).
    """
    rows = []
    for n in sorted(int(n) for n in grid_sizes):
        p = builtin_problem(name, {**params, "n": n})
        report = solve_direct(p, opts)

        dev = None
        if reference == "classical":
            ybar = classical_reference(p.params["gamma"], p.params["lambda"],
                                       p.grid.a, p.grid.b)
            dev = float(np.max(np.abs(report.minimizer.values - ybar(p.grid.nodes))))
        elif reference is not None:
            raise ValueError(f"unknown reference {reference!r}")

        rows.append(ConvergenceRow(
            n=n, j_value=report.j_value, el_norm=report.el_residual_norm,
            nbc_left=report.nbc_left_residual, nbc_right=report.nbc_right_residual,
            converged=report.converged, max_dev_from_reference=dev))

    return ConvergenceTable(rows)


# }}}
