"""Residuals of the fractional Euler-Lagrange equation and natural boundary
conditions, and a sampled sufficiency probe.

For a candidate ``y`` the partials ``d_k L`` are sampled along
``(x, y, z, t, y(a), y(b))`` and

* Euler-Lagrange:  ``d_2 L + xD_b^alpha[d_3 L] + aD_x^beta[d_4 L]``,
* free ``y(a)``:   ``int d_5 L dx - [xI_b^{1-alpha} d_3 L - aI_x^{1-beta} d_4 L](a)``,
* free ``y(b)``:   ``int d_6 L dx - [aI_x^{1-beta} d_4 L - xI_b^{1-alpha} d_3 L](b)``,

with Riemann-Liouville derivatives/integrals on the right of the operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from .errors import PreconditionError, UsageError
from .operators import (
    SampledFunction, left_rlfd, left_rlfi, right_rlfd, right_rlfi, trapezoid)
from .problem import Problem, eval_functional, slot_values

__all__ = [
    "TRIM",
    "ResidualReport",
    "ProbeReport",
    "partials_along",
    "euler_lagrange_residual",
    "el_norm",
    "natural_bc_left_residual",
    "natural_bc_right_residual",
    "residual_report",
    "convexity_probe",
    "verify_against_corollary_agrawal",
]

#: nodes dropped next to each end (besides the end nodes) in ``el_norm``
TRIM = 2

YLike = Union[SampledFunction, np.ndarray]


def partials_along(p: Problem, y: YLike) -> Dict[int, np.ndarray]:
    """Node samples of ``d_k L`` (k = 2..6) along *y*."""
    values = p.project(y)
    args = slot_values(p, values)
    shape = values.shape
    return {k: np.broadcast_to(p.lagrangian.partial(k, *args), shape) * 1.0
            for k in range(2, 7)}


def _samples(p: Problem, values: np.ndarray) -> SampledFunction:
    return SampledFunction(p.grid, values)


def euler_lagrange_residual(p: Problem, y: YLike, *,
                            parts: Optional[Dict[int, np.ndarray]] = None) -> SampledFunction:
    """Pointwise Euler-Lagrange residual.

    Both end nodes are flagged singular, as are any nodes flagged by the
    Riemann-Liouville derivatives.
    """
    if parts is None:
        parts = partials_along(p, y)

    right = right_rlfd(_samples(p, parts[3]), p.alpha)
    left = left_rlfd(_samples(p, parts[4]), p.beta)

    singular = right.singular | left.singular
    singular[0] = singular[-1] = True
    return SampledFunction(p.grid, parts[2] + right.values + left.values, singular)


def _admissible(r: SampledFunction, trim: int = TRIM) -> np.ndarray:
    mask = ~r.singular
    mask[: trim + 1] = False
    mask[len(mask) - trim - 1:] = False
    return mask


def el_norm(r: SampledFunction, trim: int = TRIM) -> float:
    """Max-norm over admissible interior nodes."""
    mask = _admissible(r, trim)
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(r.values[mask])))


def _bracket_left(p: Problem, parts) -> float:
    return (right_rlfi(_samples(p, parts[3]), 1.0 - p.alpha.value).values[0]
            - left_rlfi(_samples(p, parts[4]), 1.0 - p.beta.value).values[0])


def _bracket_right(p: Problem, parts) -> float:
    return (left_rlfi(_samples(p, parts[4]), 1.0 - p.beta.value).values[-1]
            - right_rlfi(_samples(p, parts[3]), 1.0 - p.alpha.value).values[-1])


def natural_bc_left_residual(p: Problem, y: YLike, *, parts=None) -> float:
    """Defect of the natural boundary condition for a free ``y(a)``."""
    if not p.boundary.left_free:
        raise UsageError("y(a) is fixed; the left natural condition does not apply")
    if parts is None:
        parts = partials_along(p, y)
    return abs(trapezoid(parts[5], p.grid) - _bracket_left(p, parts))


def natural_bc_right_residual(p: Problem, y: YLike, *, parts=None) -> float:
    """Defect of the natural boundary condition for a free ``y(b)``."""
    if not p.boundary.right_free:
        raise UsageError("y(b) is fixed; the right natural condition does not apply")
    if parts is None:
        parts = partials_along(p, y)
    return abs(trapezoid(parts[6], p.grid) - _bracket_right(p, parts))


@dataclass(frozen=True)
class ResidualReport:
    el_pointwise: SampledFunction
    el_norm: float
    nbc_left: Optional[float] = None
    nbc_right: Optional[float] = None

    @property
    def admissible(self) -> np.ndarray:
        """Nodes entering :attr:`el_norm`."""
        return _admissible(self.el_pointwise)


def residual_report(p: Problem, y: YLike) -> ResidualReport:
    parts = partials_along(p, y)
    r = euler_lagrange_residual(p, y, parts=parts)
    return ResidualReport(
        el_pointwise=r,
        el_norm=el_norm(r),
        nbc_left=natural_bc_left_residual(p, y, parts=parts) if p.boundary.left_free else None,
        nbc_right=natural_bc_right_residual(p, y, parts=parts) if p.boundary.right_free else None,
    )


def verify_against_corollary_agrawal(p: Problem, y: YLike) -> ResidualReport:
    """Residuals for Lagrangians that do not depend on ``y(a)``, ``y(b)``.

    The natural conditions then reduce to the bracket terms alone, e.g.
    ``[xI_b^{1-alpha} d_3 L - aI_x^{1-beta} d_4 L](a) = 0``.
    """
    parts = partials_along(p, y)
    for k in (5, 6):
        if np.any(parts[k] != 0.0):
            raise PreconditionError(
                f"d_{k} L does not vanish along y (max |d_{k} L| = "
                f"{np.max(np.abs(parts[k])):.3e}); the corollary does not apply")

    r = euler_lagrange_residual(p, y, parts=parts)
    return ResidualReport(
        el_pointwise=r,
        el_norm=el_norm(r),
        nbc_left=abs(_bracket_left(p, parts)) if p.boundary.left_free else None,
        nbc_right=abs(_bracket_right(p, parts)) if p.boundary.right_free else None,
    )


# {{{ sufficiency probe


@dataclass(frozen=True)
class ProbeReport:
    all_nonneg: bool
    min_gap: float
    tol: float
    trials: int


def _perturbation_basis(p: Problem) -> np.ndarray:
    x = p.grid.nodes
    s = (x - p.grid.a) / (p.grid.b - p.grid.a)
    basis = [np.ones_like(s), s, s**2, s**3,
             s * (1 - s), (s * (1 - s)) ** 2, s**2 * (1 - s), s * (1 - s) ** 2]

    envelope = np.ones_like(s)
    if not p.boundary.left_free:
        envelope = envelope * s
    if not p.boundary.right_free:
        envelope = envelope * (1 - s)
    basis = np.array([b * envelope for b in basis])

    # exact zeros at fixed nodes
    for node in p.boundary.fixed_nodes(p.grid.n):
        basis[:, node] = 0.0
    return basis


def convexity_probe(p: Problem, y0: YLike, trials: int = 200, magnitude: float = 0.1,
                    seed: int = 0) -> ProbeReport:
    """Sample ``J(y0 + h) - J(y0)`` over random admissible perturbations.

    Perturbations are random combinations of low-order polynomials and
    polynomial bumps, scaled to max-norm *magnitude* and vanishing at fixed
    end-points. A gap below ``-tol`` with ``tol = 1e-9 max(1, |J(y0)|)``
    shows that *y0* is not a minimizer.
    """
    values = p.project(y0)
    j0 = eval_functional(p, values)
    tol = 1e-9 * max(1.0, abs(j0))
    if trials <= 0:
        return ProbeReport(True, math.inf, tol, 0)

    basis = _perturbation_basis(p)
    rng = np.random.default_rng(seed)
    min_gap = math.inf
    for _ in range(trials):
        h = rng.uniform(-1.0, 1.0, size=len(basis)) @ basis
        scale = np.max(np.abs(h))
        if scale == 0.0:
            continue
        h *= magnitude / scale
        min_gap = min(min_gap, eval_functional(p, values + h) - j0)

    return ProbeReport(min_gap >= -tol, min_gap, tol, trials)


# }}}
