import dataclasses

import numpy as np
import pytest

from fracvar.errors import ConfigError, ConstraintError, EvaluationError, RegistryError
from fracvar.operators import Grid, SampledFunction
from fracvar.problem import (
    REGISTRY, BoundarySpec, Fixed, Free, Lagrangian, Problem, builtin_problem,
    classical_reference, eval_functional, fd_partial)

EXAMPLE = {"gamma": 1.0, "lambda": 1.0, "alpha": 0.5, "n": 100}

REGISTRY_PARAMS = {
    "caputo_quadratic_free_endpoints": {"gamma": 1.7, "lambda": 0.6, "alpha": 0.5, "n": 10},
    "classical_limit": {"gamma": 1.7, "lambda": 0.6, "n": 10},
    "fixed_endpoint_quadratic": {"alpha": 0.5, "n": 10},
}


def test_example_at_zero():
    p = builtin_problem("caputo_quadratic_free_endpoints", EXAMPLE)
    y = SampledFunction(p.grid, np.zeros(101))
    assert eval_functional(p, y) == pytest.approx(0.5, abs=1e-15)


def test_classical_value_at_candidate():
    p = builtin_problem("classical_limit", {"gamma": 1, "lambda": 1, "n": 200})
    ybar = classical_reference(1.0, 1.0)
    y = SampledFunction.from_callable(p.grid, ybar)
    assert eval_functional(p, y) == pytest.approx(1 / 6, abs=1e-12)


def test_constant_integrand():
    lag = Lagrangian(lambda x, y, z, t, u, v: y)
    p = Problem(lag, 0.5, 0.5, BoundarySpec(), Grid(0.0, 3.0, 30))
    assert eval_functional(p, np.full(31, 2.0)) == pytest.approx(6.0, abs=1e-14)


def test_fixed_boundary_is_enforced():
    p = builtin_problem("fixed_endpoint_quadratic", {"alpha": 0.5, "n": 10})
    y = np.linspace(0.0, 1.0, 11)
    eval_functional(p, y)
    eval_functional(p, y + np.r_[1e-13, np.zeros(10)])

    bad = y.copy()
    bad[-1] = 1.1
    with pytest.raises(ConstraintError):
        eval_functional(p, bad)


def test_non_finite_lagrangian_reports_node():
    lag = Lagrangian(lambda x, y, z, t, u, v: 1.0 / (x - 0.5))
    p = Problem(lag, 0.5, 0.5, BoundarySpec(), Grid(0.0, 1.0, 4))
    with pytest.raises(EvaluationError) as exc, np.errstate(divide="ignore"):
        eval_functional(p, np.zeros(5))
    assert exc.value.node == 2


# {{{ partials


def test_fd_partial_square():
    lag = Lagrangian(lambda x, y, z, t, u, v: y**2)
    assert fd_partial(lag, 2, (0.0, 3.0, 0.0, 0.0, 0.0, 0.0)) == pytest.approx(6.0, abs=1e-7)


def test_fd_partial_example_u():
    lag = builtin_problem("caputo_quadratic_free_endpoints", EXAMPLE).lagrangian
    point = (0.3, 0.1, 0.2, 0.0, 0.5, 0.9)
    assert fd_partial(lag, 5, point, prefer_analytic=False) == pytest.approx(0.5, abs=1e-7)
    assert fd_partial(lag, 5, point) == 0.5


def test_fd_partial_independent_argument():
    lag = Lagrangian(lambda x, y, z, t, u, v: np.sin(y) * z**3)
    for i in (1, 4, 5, 6):
        assert abs(fd_partial(lag, i, (0.1, 0.2, 0.3, 0.4, 0.5, 0.6))) <= 1e-9


def test_fd_partial_non_finite():
    lag = Lagrangian(lambda x, y, z, t, u, v: np.log(y))
    with pytest.raises(EvaluationError), np.errstate(invalid="ignore"):
        fd_partial(lag, 2, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0))


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_partials_match_finite_differences(name):
    lag = builtin_problem(name, REGISTRY_PARAMS[name]).lagrangian
    rng = np.random.default_rng(11)
    points = rng.uniform(-3, 3, size=(6, 100))
    for i in range(2, 7):
        analytic = lag.partial(i, *points)
        numeric = fd_partial(lag, i, points, prefer_analytic=False)
        np.testing.assert_allclose(analytic, numeric, rtol=0, atol=1e-6)


# }}}


# {{{ functional properties


def test_functional_linear_in_lagrangian():
    grid = Grid(0.0, 1.0, 40)
    l1 = Lagrangian(lambda x, y, z, t, u, v: z**2 + u * y)
    l2 = Lagrangian(lambda x, y, z, t, u, v: np.cos(x) * t + v**2)
    y = np.sin(3 * grid.nodes) + 0.2
    c1, c2 = 0.7, -2.3

    def j(lag):
        return eval_functional(Problem(lag, 0.6, 0.4, BoundarySpec(), grid), y)

    assert j(l1.combine(c1, l2, c2)) == pytest.approx(c1 * j(l1) + c2 * j(l2), abs=1e-12)


def test_functional_invariant_under_boundary_kind():
    grid = Grid(0.0, 1.0, 40)
    lag = Lagrangian(lambda x, y, z, t, u, v: z**2 + y * t)
    y = np.exp(grid.nodes)
    free = Problem(lag, 0.3, 0.8, BoundarySpec(Free(), Free()), grid)
    fixed = dataclasses.replace(free, boundary=BoundarySpec(Fixed(y[0]), Fixed(y[-1])))
    assert eval_functional(free, y) == eval_functional(fixed, y)


# }}}


# {{{ registry


def test_builtin_example():
    p = builtin_problem("caputo_quadratic_free_endpoints", EXAMPLE)
    assert p.boundary.left_free and p.boundary.right_free
    assert p.alpha.value == 0.5 and p.grid == Grid(0.0, 1.0, 100)


def test_builtin_classical():
    p = builtin_problem("classical_limit", {"gamma": 1, "lambda": 1, "n": 10})
    assert p.alpha.classical and p.beta.classical
    with pytest.raises(ConfigError):
        builtin_problem("classical_limit", {"gamma": 1, "lambda": 1, "n": 10, "alpha": 0.5})


def test_builtin_fixed():
    p = builtin_problem("fixed_endpoint_quadratic", {"alpha": 1, "n": 10, "ya": 2, "yb": -1})
    assert p.boundary == BoundarySpec(Fixed(2.0), Fixed(-1.0))


def test_unknown_problem():
    with pytest.raises(RegistryError):
        builtin_problem("foo", {})


@pytest.mark.parametrize("missing", ["gamma", "lambda", "alpha", "n"])
def test_missing_parameter(missing):
    params = {k: v for k, v in EXAMPLE.items() if k != missing}
    with pytest.raises(ConfigError):
        builtin_problem("caputo_quadratic_free_endpoints", params)


@pytest.mark.parametrize("params", [
    {**EXAMPLE, "alpha": 1.5},
    {**EXAMPLE, "gamma": -1},
    {**EXAMPLE, "n": 1},
    {**EXAMPLE, "a": 2.0, "b": 1.0},
    {**EXAMPLE, "gamma": "x"},
])
def test_bad_parameter(params):
    with pytest.raises(ConfigError):
        builtin_problem("caputo_quadratic_free_endpoints", params)


@pytest.mark.parametrize("gamma, lam", [(1, 1), (2, 1), (1, 3), (5, 5)])
def test_classical_reference_formula(gamma, lam):
    ybar = classical_reference(gamma, lam)
    x = np.linspace(0, 1, 7)
    d = gamma * lam + lam + gamma
    np.testing.assert_allclose(ybar(x), gamma * lam / d * x + lam / d, rtol=1e-15)
    # natural conditions of the classical problem
    slope = gamma * lam / d
    assert gamma * ybar(0.0) == pytest.approx(slope)
    assert lam * (ybar(1.0) - 1) == pytest.approx(-slope)


def test_classical_reference_on_other_interval():
    gamma, lam, a, b = 2.0, 0.5, -1.0, 2.0
    ybar = classical_reference(gamma, lam, a, b)
    slope = ybar(1.0) - ybar(0.0)
    ell = b - a
    assert slope == pytest.approx(ell * gamma * ybar(a))
    assert slope == pytest.approx(-ell * lam * (ybar(b) - 1))


# }}}
