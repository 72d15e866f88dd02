import numpy as np
import pytest

from sysrisk.errors import (
    DimensionMismatchError,
    InfeasibleError,
    NoBracketError,
    NoConvergenceError,
    UnboundedError,
)
from sysrisk.numerics import (
    LinearProgram,
    QuadratureConfig,
    bisect_root,
    directional_derivative_fd,
    grid_minimize,
    integrate_unit_interval,
    solve_lp,
    zoom_window,
)
from sysrisk.tests import coin_flip_system


class TestQuadrature:
    @pytest.mark.parametrize(
        "f, expected",
        [
            (lambda g: g**2, 1 / 3),
            (lambda g: np.exp(g), np.e - 1),
            (lambda g: 1.0, 1.0),
        ],
    )
    def test_integrate(self, f, expected):
        assert integrate_unit_interval(f) == pytest.approx(expected, abs=1e-10)

    def test_no_convergence(self):
        cfg = QuadratureConfig(initial_nodes=3, tol=1e-12, max_nodes=5)
        with pytest.raises(NoConvergenceError, match="did not converge"):
            integrate_unit_interval(lambda g: np.sin(80 * g), cfg)

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"initial_nodes": 4}, "odd"),
            ({"tol": 0.0}, "tol must be positive"),
            ({"initial_nodes": 11, "max_nodes": 5}, "must not be below"),
        ],
    )
    def test_invalid_config(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            QuadratureConfig(**kwargs)

    @pytest.mark.parametrize(
        "coeffs", [(1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 1.0), (2.0, -3.0, 0.5, 4.0), (-1.5, 2.5, -6.0, 3.0)]
    )
    @pytest.mark.parametrize(
        "cfg", [QuadratureConfig(initial_nodes=3, max_nodes=3), QuadratureConfig()], ids=["three-nodes", "default"]
    )
    def test_exact_on_cubics(self, coeffs, cfg):
        a, b, c, d = coeffs
        result = integrate_unit_interval(lambda g: a + b * g + c * g**2 + d * g**3, cfg)
        assert result == pytest.approx(a + b / 2 + c / 3 + d / 4, abs=1e-13)


class TestFiniteDifferences:
    def test_central(self):
        assert directional_derivative_fd(lambda x: x**2, 3.0, 1.0) == pytest.approx(6.0, rel=1e-8)

    def test_forward_at_kink(self):
        relu = lambda x: max(x, 0.0)
        assert directional_derivative_fd(relu, 0.0, 1.0, side="forward") == pytest.approx(1.0)
        assert directional_derivative_fd(relu, 0.0, -1.0, side="forward") == pytest.approx(0.0)

    def test_on_system_loss(self):
        X = coin_flip_system()
        d = directional_derivative_fd(lambda Y: float(Y.values.sum()), X, X)
        assert d == pytest.approx(2.0)

    def test_unknown_side(self):
        with pytest.raises(ValueError, match="central"):
            directional_derivative_fd(lambda x: x, 0.0, 1.0, side="left")


def smooth_triple(seed: int):
    """Random smooth F, G on R^3, a smooth scalar h, and a point X with direction U."""
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(3, 3))
    Q = rng.normal(size=(3, 3))
    Q = (Q + Q.T) / 2

    def F(x):
        return np.sin(a @ x) + 0.5 * x @ Q @ x

    def G(x):
        return np.exp(0.3 * b @ x) + c @ x

    h = np.tanh if seed % 2 else (lambda t: np.log1p(t**2))
    X, U = rng.uniform(-1.0, 1.0, size=(2, 3))
    return F, G, h, X, U


class TestGateauxRules:
    @pytest.mark.parametrize("seed", range(100))
    def test_sum_rule(self, seed):
        F, G, _, X, U = smooth_triple(seed)
        combined = directional_derivative_fd(lambda x: F(x) + G(x), X, U)
        expected = directional_derivative_fd(F, X, U) + directional_derivative_fd(G, X, U)
        assert float(combined) == pytest.approx(float(expected), abs=1e-5)

    @pytest.mark.parametrize("seed", range(100))
    def test_product_rule(self, seed):
        F, G, _, X, U = smooth_triple(seed)
        combined = directional_derivative_fd(lambda x: F(x) * G(x), X, U)
        expected = F(X) * directional_derivative_fd(G, X, U) + G(X) * directional_derivative_fd(F, X, U)
        assert float(combined) == pytest.approx(float(expected), abs=1e-5)

    @pytest.mark.parametrize("seed", range(100))
    def test_chain_rule(self, seed):
        F, _, h, X, U = smooth_triple(seed)
        combined = directional_derivative_fd(lambda x: h(F(x)), X, U)
        expected = directional_derivative_fd(h, F(X), directional_derivative_fd(F, X, U))
        assert float(combined) == pytest.approx(float(expected), abs=1e-5)


class TestLinearProgram:
    def test_simple(self):
        lp = LinearProgram(objective=[1.0, 1.0], constraints=[[1.0, 1.0]], rhs=[1.0])
        sol = solve_lp(lp)
        assert sol.value == pytest.approx(1.0)
        assert sol.argmin.sum() == pytest.approx(1.0)

    def test_free_variable(self):
        lp = LinearProgram(objective=[1.0], constraints=[[1.0]], rhs=[-3.0], nonnegative=[False])
        sol = solve_lp(lp)
        assert sol.value == pytest.approx(-3.0)
        np.testing.assert_allclose(sol.argmin, [-3.0])

    def test_two_constraints(self):
        # minimize 2x + 3y s.t. x + y >= 4, x - y >= -2, x, y >= 0
        lp = LinearProgram([2.0, 3.0], [[1.0, 1.0], [1.0, -1.0]], [4.0, -2.0])
        sol = solve_lp(lp)
        assert sol.value == pytest.approx(8.0)
        np.testing.assert_allclose(sol.argmin, [4.0, 0.0], atol=1e-12)

    def test_infeasible(self):
        lp = LinearProgram([1.0], [[1.0], [-1.0]], [1.0, 0.0])
        with pytest.raises(InfeasibleError):
            solve_lp(lp)

    def test_unbounded(self):
        lp = LinearProgram([-1.0], [[1.0]], [0.0])
        with pytest.raises(UnboundedError):
            solve_lp(lp)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError, match="Constraint matrix"):
            LinearProgram([1.0, 1.0], [[1.0]], [1.0])


class TestBisection:
    def test_widens_bracket(self):
        assert bisect_root(lambda x: x - 5.0) == pytest.approx(5.0, abs=1e-9)

    def test_root_on_bracket_end(self):
        assert bisect_root(lambda x: x - 1.0, (-1.0, 1.0)) == 1.0

    def test_no_sign_change(self):
        with pytest.raises(NoBracketError, match="No sign change"):
            bisect_root(lambda x: 1.0, max_doublings=3)

    def test_nan(self):
        with pytest.raises(NoBracketError, match="NaN"):
            bisect_root(lambda x: np.nan)

    def test_bad_bracket(self):
        with pytest.raises(ValueError, match="lo < hi"):
            bisect_root(lambda x: x, (1.0, 0.0))


class TestGridSearch:
    def test_minimize(self):
        f = lambda p: (p[0] - 0.3) ** 2 + (p[1] + 0.7) ** 2
        result = grid_minimize(f, [(-1.0, 1.0), (-1.0, 1.0)], resolution=21)
        assert result.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(result.argmin, [0.3, -0.7], atol=1e-9)

    def test_vectorized_matches(self):
        target = np.array([0.123, -0.456])
        f = lambda P: ((P - target) ** 2).sum(axis=1)
        result = grid_minimize(f, [(-1.0, 1.0), (-1.0, 1.0)], resolution=11, refinements=16, vectorized=True)
        np.testing.assert_allclose(result.argmin, target, atol=1e-6)

    def test_nan_counts_as_infinite(self):
        f = lambda p: np.nan if p[0] < 0 else p[0]
        result = grid_minimize(f, [(-1.0, 1.0)], resolution=11, refinements=0)
        assert result.value == pytest.approx(0.0, abs=1e-12)

    def test_empty_box(self):
        result = grid_minimize(lambda p: 2.0, [])
        assert result.value == 2.0
        assert result.argmin.size == 0

    @pytest.mark.parametrize("resolution, expected", [(101, 0.05), (11, 0.2), (3, 1.0)])
    def test_zoom_window(self, resolution, expected):
        assert zoom_window(resolution) == pytest.approx(expected)

    def test_zoom_window_too_coarse(self):
        with pytest.raises(ValueError, match="at least 2"):
            zoom_window(1)
