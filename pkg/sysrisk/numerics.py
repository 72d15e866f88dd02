"""
Numerical kernels shared by the risk measures.

Composite Simpson quadrature on [0, 1], finite-difference directional
derivatives, a dense two-phase simplex solver, bracketing bisection and a
nested grid search used as a brute-force oracle.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from collections.abc import Callable, Sequence
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect

from sysrisk.errors import (
    DimensionMismatchError,
    InfeasibleError,
    NoBracketError,
    NoConvergenceError,
    NumericalError,
    UnboundedError,
)

logger = logging.getLogger(__name__)

LP_TOLERANCE = 1e-9
LP_CERTIFICATE_TOLERANCE = 1e-8
FD_RELATIVE_STEP = 1e-5


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    """Composite Simpson settings: start at ``initial_nodes`` and double until estimates agree to ``tol``."""

    initial_nodes: int = 201
    tol: float = 1e-8
    max_nodes: int = 3201

    def __post_init__(self) -> None:
        if self.initial_nodes < 3 or self.initial_nodes % 2 == 0:
            raise ValueError(
                f"initial_nodes must be odd and at least 3, but got {self.initial_nodes}"
            )
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, but got {self.tol}")
        if self.max_nodes < self.initial_nodes:
            raise ValueError(
                f"max_nodes ({self.max_nodes}) must not be below initial_nodes ({self.initial_nodes})"
            )


def integrate_unit_interval(
    f: Callable[[float], float], cfg: QuadratureConfig | None = None
) -> float:
    """
    Integrate ``f`` over [0, 1] with composite Simpson, doubling the intervals until converged.

    Values already computed are reused when the grid is refined.

    Parameters
    ----------
    f : callable
        Real function of gamma in [0, 1].
    cfg : QuadratureConfig, optional

    Returns
    -------
    float
        The last Simpson estimate.

    Raises
    ------
    NoConvergenceError
        If ``max_nodes`` is reached while successive estimates still differ by more than 100 * tol.
    """
    if cfg is None:
        cfg = QuadratureConfig()

    nodes = cfg.initial_nodes
    grid = np.linspace(0.0, 1.0, nodes)
    values = np.array([f(g) for g in grid], dtype=np.float64)
    estimate = simpson(values, x=grid)

    while True:
        refined = 2 * nodes - 1
        if refined > cfg.max_nodes:
            break
        grid = np.linspace(0.0, 1.0, refined)
        new_values = np.empty(refined)
        new_values[::2] = values
        new_values[1::2] = [f(g) for g in grid[1::2]]
        new_estimate = simpson(new_values, x=grid)
        gap = abs(new_estimate - estimate)
        logger.debug("simpson with %d nodes: %r (gap %.3g)", refined, new_estimate, gap)
        nodes, values, estimate = refined, new_values, new_estimate
        if gap < cfg.tol:
            return float(estimate)

    if nodes == cfg.initial_nodes:
        # no refinement possible, nothing to compare against
        return float(estimate)
    if gap > 100 * cfg.tol:
        raise NoConvergenceError(
            f"Simpson quadrature did not converge: successive estimates differ by {gap:.3g} "
            f"at {nodes} nodes (tol {cfg.tol:g})"
        )
    warnings.warn(
        f"Simpson quadrature stopped at {nodes} nodes with gap {gap:.3g} above tol {cfg.tol:g}",
        RuntimeWarning,
        stacklevel=2,
    )
    return float(estimate)


class Side(str, Enum):
    TWO_SIDED = "two-sided"
    RIGHT = "right"


def _sup_norm(X: Any) -> float:
    values = getattr(X, "values", X)
    return float(np.max(np.abs(values))) if np.size(values) else 0.0


def fd_step(X: Any) -> float:
    return FD_RELATIVE_STEP * max(1.0, _sup_norm(X))


def directional_derivative_fd(
    F: Callable[[Any], Any], X: Any, U: Any, *, side: str = "central"
) -> Any:
    """
    Finite-difference approximation of the Gâteaux differential δF(X, U).

    ``side="central"`` gives (F(X+hU) − F(X−hU)) / 2h; ``side="forward"`` gives
    the one-sided (F(X+hU) − F(X)) / h, which approximates the right derivative
    at kinks. The step is h = 1e-5 · max(1, ‖X‖_∞). ``X`` and ``U`` may be
    scalars, arrays or anything supporting ``+`` and scalar ``*`` (e.g. SystemLoss).

    Examples
    --------
    >>> directional_derivative_fd(lambda x: max(x, 0.0), 0.0, -1.0, side="forward")
    0.0
    """
    h = fd_step(X)
    if side == "central":
        return (np.asarray(F(X + h * U)) - np.asarray(F(X - h * U))) / (2 * h)
    if side == "forward":
        return (np.asarray(F(X + h * U)) - np.asarray(F(X))) / h
    raise ValueError(f"side must be 'central' or 'forward', but got {side!r}")


@dataclasses.dataclass(frozen=True)
class LinearProgram:
    """
    minimize c·z  subject to  A z ≥ b, with z_j ≥ 0 wherever ``nonnegative[j]``.
    """

    objective: np.ndarray
    constraints: np.ndarray
    rhs: np.ndarray
    nonnegative: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=np.float64)
        A = np.atleast_2d(np.asarray(self.constraints, dtype=np.float64))
        b = np.asarray(self.rhs, dtype=np.float64)
        nonneg = (
            np.ones(c.size, dtype=bool)
            if self.nonnegative is None
            else np.asarray(self.nonnegative, dtype=bool)
        )
        if c.ndim != 1 or b.ndim != 1 or nonneg.shape != c.shape:
            raise DimensionMismatchError(
                "Objective, right-hand side and nonnegativity flags must be vectors of matching length"
            )
        if A.shape != (b.size, c.size):
            raise DimensionMismatchError(
                f"Constraint matrix has shape {A.shape}, expected {(b.size, c.size)}"
            )
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraints", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "nonnegative", nonneg)


class LPSolution(NamedTuple):
    value: float
    argmin: np.ndarray


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _price(T: np.ndarray, basis: list[int], cost: np.ndarray) -> None:
    T[-1] = 0.0
    T[-1, : cost.size] = cost
    for r, var in enumerate(basis):
        if cost[var] != 0.0:
            T[-1] -= cost[var] * T[r]


def _run_simplex(T: np.ndarray, basis: list[int], max_iter: int) -> int:
    for iteration in range(max_iter):
        reduced = T[-1, :-1]
        entering = np.flatnonzero(reduced < -LP_TOLERANCE)
        if entering.size == 0:
            return iteration
        # Bland: lowest-index improving column, ties in the ratio test by lowest basic index
        col = int(entering[0])
        column = T[:-1, col]
        rows = np.flatnonzero(column > LP_TOLERANCE)
        if rows.size == 0:
            raise UnboundedError(f"Linear program is unbounded along column {col}")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + LP_TOLERANCE]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise NoConvergenceError(f"Simplex did not terminate within {max_iter} pivots")


def solve_lp(lp: LinearProgram) -> LPSolution:
    """
    Solve a small dense LP with the two-phase simplex method and Bland's rule.

    Free variables are split into positive and negative parts, surplus variables
    turn ``A z ≥ b`` into equalities, and phase I drives artificial variables to
    zero. The optimizer returned is checked against the original constraints.

    Raises
    ------
    InfeasibleError
        If phase I cannot reach a feasible point.
    UnboundedError
        If the objective decreases without bound.
    NumericalError
        If the optimizer violates the constraints by more than 1e-8.
    """
    c, A, b, nonneg = lp.objective, lp.constraints, lp.rhs, lp.nonnegative
    m, d = A.shape
    free = np.flatnonzero(~nonneg)

    A_std = np.hstack([A, -A[:, free], -np.eye(m)])
    c_std = np.concatenate([c, -c[free], np.zeros(m)])
    flip = b < 0
    A_std[flip] *= -1
    b_std = np.where(flip, -b, b)
    N = A_std.shape[1]

    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A_std
    T[:m, N : N + m] = np.eye(m)
    T[:m, -1] = b_std
    basis = list(range(N, N + m))
    max_iter = 50 * (N + m + 1)

    _price(T, basis, np.concatenate([np.zeros(N), np.ones(m)]))
    pivots = _run_simplex(T, basis, max_iter)
    infeasibility = -T[-1, -1]
    scale = max(1.0, float(np.max(np.abs(b_std), initial=0.0)))
    if infeasibility > LP_TOLERANCE * scale:
        raise InfeasibleError(
            f"Linear program is infeasible (phase I residual {infeasibility:.3g})"
        )

    redundant = []
    for r, var in enumerate(basis):
        if var >= N:
            candidates = np.flatnonzero(np.abs(T[r, :N]) > LP_TOLERANCE)
            if candidates.size:
                col = int(candidates[0])
                _pivot(T, r, col)
                basis[r] = col
            else:
                redundant.append(r)
    if redundant:
        T = np.delete(T, redundant, axis=0)
        basis = [var for r, var in enumerate(basis) if r not in redundant]
    T = np.delete(T, np.arange(N, N + m), axis=1)

    _price(T, basis, c_std)
    pivots += _run_simplex(T, basis, max_iter)
    logger.debug("simplex finished after %d pivots", pivots)

    x_std = np.zeros(N)
    x_std[basis] = T[:-1, -1]
    z = x_std[:d].copy()
    z[free] -= x_std[d : d + free.size]

    residual = A @ z - b
    bound = LP_CERTIFICATE_TOLERANCE * max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if np.any(residual < -bound) or np.any(z[nonneg] < -bound):
        raise NumericalError(
            f"Simplex optimizer fails the feasibility certificate (worst residual {residual.min():.3g})"
        )
    return LPSolution(float(c @ z), z)


def bisect_root(
    g: Callable[[float], float],
    bracket: Sequence[float] = (-1.0, 1.0),
    *,
    xtol: float = 1e-10,
    maxiter: int = 200,
    max_doublings: int = 60,
) -> float:
    """
    Find a sign change of a monotone function by bisection.

    The bracket is widened symmetrically, doubling its width, until g changes sign.

    Raises
    ------
    NoBracketError
        If no sign change is found after ``max_doublings`` widenings, or g returns NaN.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"Bracket must satisfy lo < hi, but got {(lo, hi)}")
    g_lo, g_hi = g(lo), g(hi)
    for _ in range(max_doublings + 1):
        if np.isnan(g_lo) or np.isnan(g_hi):
            raise NoBracketError(f"Function is NaN on the bracket {(lo, hi)}")
        if g_lo * g_hi <= 0:
            break
        half = (hi - lo) / 2
        lo, hi = lo - half, hi + half
        g_lo, g_hi = g(lo), g(hi)
    else:
        raise NoBracketError(
            f"No sign change found after {max_doublings} bracket doublings (last bracket {(lo, hi)})"
        )
    logger.debug("bisection bracket %r", (lo, hi))

    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    root, info = bisect(g, lo, hi, xtol=xtol, maxiter=maxiter, full_output=True, disp=False)
    if not info.converged:
        warnings.warn(
            f"Bisection stopped after {maxiter} iterations without reaching xtol={xtol:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(root)


class GridResult(NamedTuple):
    value: float
    argmin: np.ndarray


def zoom_window(resolution: int) -> float:
    """
    Half-width of the next search window, relative to the current one.

    A tenth of the window (a 10× zoom), widened to two grid spacings on coarse grids.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, but got {resolution}")
    return max(0.05, 2.0 / (resolution - 1))


def grid_minimize(
    f: Callable[[np.ndarray], Any],
    box: Sequence[tuple[float, float]],
    resolution: int = 101,
    refinements: int = 3,
    *,
    vectorized: bool = False,
) -> GridResult:
    """
    Brute-force minimization over a box by nested grid search.

    Each refinement re-grids a window ten times narrower than the previous one
    (less on grids coarser than 41 points, see :func:`zoom_window`), centred on
    the best point so far and clipped to the box.

    Parameters
    ----------
    f : callable
        Takes a point of shape (d,), or with ``vectorized=True`` a batch of
        shape (P, d) returning P values. NaN counts as +inf.
    box : sequence of (lo, hi)
        One bound pair per dimension. An empty box evaluates f once.
    resolution : int
        Grid points per dimension.
    refinements : int
        Number of zoom steps after the initial grid.
    """
    bounds = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    d = bounds.shape[0]
    if d == 0:
        point = np.empty(0)
        value = f(point[None, :])[0] if vectorized else f(point)
        return GridResult(float(value), point)

    lo, hi = bounds[:, 0].copy(), bounds[:, 1].copy()
    best_value, best_point = np.inf, (lo + hi) / 2
    for level in range(refinements + 1):
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        if vectorized:
            values = np.asarray(f(points), dtype=np.float64)
        else:
            values = np.array([f(p) for p in points], dtype=np.float64)
        values = np.where(np.isnan(values), np.inf, values)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best_point = float(values[i]), points[i].copy()
        logger.debug("grid level %d: best %r", level, best_value)
        half = (hi - lo) * zoom_window(resolution)
        lo = np.maximum(bounds[:, 0], best_point - half)
        hi = np.minimum(bounds[:, 1], best_point + half)
    return GridResult(best_value, best_point)
