"""
Finite probability spaces and the random quantities that live on them.

Every other module computes on these types. They are immutable: the numpy
arrays they hold are copied on construction and marked read-only.
"""

from __future__ import annotations

import dataclasses
import warnings
from collections.abc import Iterable, Sequence
from typing import NamedTuple, Union

import numpy as np
import xarray as xr
from scipy.special import logsumexp, xlogy

from sysrisk.errors import (
    BadGroupStructureError,
    DimensionMismatchError,
    MismatchedSpaceError,
)

PROBABILITY_TOLERANCE = 1e-12
RENORMALIZE_TOLERANCE = 1e-6
DENSITY_TOLERANCE = 1e-10
DETERMINISTIC_VARIANCE = 1e-18

Scalar = Union[int, float, np.floating]


def _readonly(values, *, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatchError(
            f"{what} must be {ndim}-dimensional, but got an array of shape {arr.shape}"
        )
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class ScenarioSpace:
    """
    A finite probability space: K scenarios, each with strictly positive probability.

    Zero-probability scenarios are rejected rather than silently dropped.
    """

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = _readonly(self.probabilities, ndim=1, what="Scenario probabilities")
        if p.size == 0:
            raise ValueError("A scenario space needs at least one scenario")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValueError(
                f"Scenario probabilities must be strictly positive, but got {p.tolist()}"
            )
        if abs(p.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(
                f"Scenario probabilities must sum to 1, but they sum to {p.sum()!r}"
            )
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls, K: int) -> "ScenarioSpace":
        return cls(np.full(K, 1.0 / K))

    @classmethod
    def from_weights(
        cls, weights: Iterable[float], *, tolerance: float = RENORMALIZE_TOLERANCE
    ) -> "ScenarioSpace":
        """
        Build a space from weights that sum to 1 up to ``tolerance``, renormalizing them.

        Raises
        ------
        ValueError
            If the weights miss 1 by more than ``tolerance``.
        """
        w = np.asarray(list(weights), dtype=np.float64)
        total = w.sum()
        if abs(total - 1.0) > tolerance:
            raise ValueError(
                f"Scenario probabilities sum to {total!r}, which is not within {tolerance} of 1"
            )
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            warnings.warn(
                f"Renormalizing scenario probabilities which sum to {total!r}",
                UserWarning,
                stacklevel=2,
            )
        return cls(w / total)

    @property
    def K(self) -> int:
        return int(self.probabilities.size)

    def __len__(self) -> int:
        return self.K

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioSpace):
            return NotImplemented
        return self is other or np.array_equal(self.probabilities, other.probabilities)

    def __hash__(self) -> int:
        return hash(self.probabilities.tobytes())

    def __repr__(self) -> str:
        return f"ScenarioSpace<K={self.K}>"


def _check_same_space(a: ScenarioSpace, b: ScenarioSpace) -> None:
    if a != b:
        raise MismatchedSpaceError(
            f"Random quantities live on different scenario spaces: {a!r} and {b!r}"
        )


@dataclasses.dataclass(frozen=True, eq=False)
class RandomVariable:
    """A real-valued random variable: one value per scenario of its space."""

    values: np.ndarray
    space: ScenarioSpace

    def __post_init__(self) -> None:
        values = _readonly(self.values, ndim=1, what="Random variable values")
        if values.size != self.space.K:
            raise DimensionMismatchError(
                f"Random variable has {values.size} values but its space has {self.space.K} scenarios"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float, space: ScenarioSpace) -> "RandomVariable":
        return cls(np.full(space.K, float(value)), space)

    def expectation(self) -> float:
        return float(self.space.probabilities @ self.values)

    @property
    def variance(self) -> float:
        mean = self.expectation()
        return float(self.space.probabilities @ (self.values - mean) ** 2)

    @property
    def is_deterministic(self) -> bool:
        return self.variance < DETERMINISTIC_VARIANCE

    def _operand(self, other) -> np.ndarray | float:
        if isinstance(other, RandomVariable):
            _check_same_space(self.space, other.space)
            return other.values
        return float(other)

    def __add__(self, other) -> "RandomVariable":
        return RandomVariable(self.values + self._operand(other), self.space)

    __radd__ = __add__

    def __sub__(self, other) -> "RandomVariable":
        return RandomVariable(self.values - self._operand(other), self.space)

    def __rsub__(self, other) -> "RandomVariable":
        return RandomVariable(self._operand(other) - self.values, self.space)

    def __mul__(self, other) -> "RandomVariable":
        return RandomVariable(self.values * self._operand(other), self.space)

    __rmul__ = __mul__

    def __neg__(self) -> "RandomVariable":
        return RandomVariable(-self.values, self.space)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RandomVariable):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"{type(self).__name__}<K={self.space.K}, mean={self.expectation():.6g}>"


@dataclasses.dataclass(frozen=True, eq=False, repr=False)
class Density(RandomVariable):
    """
    A Radon-Nikodym density dQ/dP: nonnegative values with expectation 1.

    Arithmetic on a density returns a plain RandomVariable.
    """

    def __post_init__(self) -> None:
        super().__post_init__()
        if np.any(self.values < 0):
            raise ValueError(f"Density values must be nonnegative, but got {self.values.tolist()}")
        mean = self.expectation()
        if abs(mean - 1.0) > DENSITY_TOLERANCE:
            raise ValueError(f"Density must have expectation 1, but it has {mean!r}")

    @classmethod
    def uniform(cls, space: ScenarioSpace) -> "Density":
        return cls(np.ones(space.K), space)

    @classmethod
    def from_log_weights(cls, log_weights, space: ScenarioSpace) -> "Density":
        """Normalize ``exp(log_weights)`` to expectation 1, without overflow."""
        log_w = np.asarray(log_weights, dtype=np.float64)
        log_norm = logsumexp(log_w, b=space.probabilities)
        return cls(np.exp(log_w - log_norm), space)

    @classmethod
    def normalize(cls, weights: RandomVariable) -> "Density":
        mean = weights.expectation()
        if mean <= 0:
            raise ValueError(f"Cannot normalize weights with expectation {mean!r}")
        return cls(weights.values / mean, weights.space)


class GroupSum(NamedTuple):
    total: RandomVariable
    is_deterministic: bool


@dataclasses.dataclass(frozen=True)
class GroupStructure:
    """
    A partition of firms 1..n into h consecutive groups.

    Given by increasing boundaries ``(n_1, ..., n_h)`` with ``n_h = n``; group j
    holds firms ``n_{j-1}+1, ..., n_j`` (1-based, ``n_0 = 0``).
    """

    boundaries: tuple[int, ...]

    def __post_init__(self) -> None:
        try:
            boundaries = tuple(int(b) for b in self.boundaries)
        except (TypeError, ValueError) as e:
            raise BadGroupStructureError(
                f"Group boundaries must be integers, but got {self.boundaries!r}"
            ) from e
        if not boundaries:
            raise BadGroupStructureError("Group boundaries must not be empty")
        if boundaries[0] < 1:
            raise BadGroupStructureError(
                f"First group boundary must be at least 1, but got {boundaries[0]}"
            )
        if any(prev >= nxt for prev, nxt in zip(boundaries, boundaries[1:])):
            raise BadGroupStructureError(
                f"Group boundaries must be strictly increasing, but got {list(boundaries)}"
            )
        object.__setattr__(self, "boundaries", boundaries)

    @classmethod
    def single(cls, n: int) -> "GroupStructure":
        return cls((n,))

    @classmethod
    def singletons(cls, n: int) -> "GroupStructure":
        return cls(tuple(range(1, n + 1)))

    @property
    def n(self) -> int:
        return self.boundaries[-1]

    @property
    def h(self) -> int:
        return len(self.boundaries)

    @property
    def groups(self) -> tuple[np.ndarray, ...]:
        """0-based firm indices of every group."""
        starts = (0,) + self.boundaries[:-1]
        return tuple(np.arange(s, e) for s, e in zip(starts, self.boundaries))

    def members(self, j: int) -> np.ndarray:
        if not 0 <= j < self.h:
            raise BadGroupStructureError(
                f"Group index {j} out of range for {self.h} groups"
            )
        return self.groups[j]

    def group_of(self, i: int) -> int:
        return int(np.searchsorted(self.boundaries, i, side="right"))

    def check_firms(self, n: int) -> None:
        if self.n != n:
            raise BadGroupStructureError(
                f"Groups cover {self.n} firms but the system has {n}"
            )


@dataclasses.dataclass(frozen=True, eq=False)
class SystemLoss:
    """
    Losses of n firms across the K scenarios of one space, stored as an (n, K) array.

    Row i is the random loss X_i of firm i.
    """

    values: np.ndarray
    space: ScenarioSpace
    firms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = _readonly(self.values, ndim=2, what="System loss values")
        n, K = values.shape
        if n < 1:
            raise DimensionMismatchError("A system needs at least one firm")
        if K != self.space.K:
            raise DimensionMismatchError(
                f"System loss has {K} scenarios but its space has {self.space.K}"
            )
        firms = tuple(self.firms) or tuple(f"firm_{i + 1}" for i in range(n))
        if len(firms) != n:
            raise DimensionMismatchError(
                f"Got {len(firms)} firm names for {n} firms"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "firms", firms)

    @classmethod
    def from_rows(
        cls, rows: Sequence[RandomVariable], firms: Sequence[str] = ()
    ) -> "SystemLoss":
        if not rows:
            raise DimensionMismatchError("A system needs at least one firm")
        space = rows[0].space
        for row in rows[1:]:
            _check_same_space(space, row.space)
        return cls(np.stack([row.values for row in rows]), space, tuple(firms))

    @classmethod
    def deterministic(
        cls, x, space: ScenarioSpace | None = None
    ) -> "SystemLoss":
        """Embed a loss vector as a system that takes the same value in every scenario."""
        if space is None:
            space = ScenarioSpace.uniform(1)
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return cls(np.repeat(x[:, None], space.K, axis=1), space)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def K(self) -> int:
        return int(self.values.shape[1])

    @property
    def rows(self) -> tuple[RandomVariable, ...]:
        return tuple(RandomVariable(row, self.space) for row in self.values)

    def row(self, i: int) -> RandomVariable:
        return RandomVariable(self.values[i], self.space)

    def scenario(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def total(self) -> RandomVariable:
        """The scenario-wise sum over all firms."""
        return RandomVariable(self.values.sum(axis=0), self.space)

    def restrict(self, firms: Sequence[int] | np.ndarray) -> "SystemLoss":
        idx = np.asarray(firms, dtype=int)
        return SystemLoss(
            self.values[idx], self.space, tuple(self.firms[i] for i in idx)
        )

    def isolate(self, i: int) -> "SystemLoss":
        """e_i X_i: firm i keeps its loss, every other firm gets zero."""
        values = np.zeros_like(self.values)
        values[i] = self.values[i]
        return self.with_values(values)

    def with_values(self, values) -> "SystemLoss":
        return SystemLoss(values, self.space, self.firms)

    def _operand(self, other) -> np.ndarray | float:
        if isinstance(other, SystemLoss):
            _check_same_space(self.space, other.space)
            if other.n != self.n:
                raise DimensionMismatchError(
                    f"Cannot combine systems with {self.n} and {other.n} firms"
                )
            return other.values
        return float(other)

    def __add__(self, other) -> "SystemLoss":
        return self.with_values(self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> "SystemLoss":
        return self.with_values(self.values - self._operand(other))

    def __mul__(self, other) -> "SystemLoss":
        return self.with_values(self.values * self._operand(other))

    __rmul__ = __mul__

    def __neg__(self) -> "SystemLoss":
        return self.with_values(-self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SystemLoss):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"SystemLoss<n={self.n}, K={self.K}>"

    def to_dataarray(self, name: str = "loss") -> xr.DataArray:
        """Labelled (firm, scenario) view, with the scenario probabilities as a coordinate."""
        return xr.DataArray(
            np.array(self.values),
            dims=("firm", "scenario"),
            coords={
                "firm": list(self.firms),
                "scenario": np.arange(self.K),
                "probability": ("scenario", np.array(self.space.probabilities)),
            },
            name=name,
        )

    @classmethod
    def from_dataarray(cls, da: xr.DataArray) -> "SystemLoss":
        if set(da.dims) != {"firm", "scenario"}:
            raise DimensionMismatchError(
                f"Expected dimensions ('firm', 'scenario'), but got {da.dims}"
            )
        if "probability" not in da.coords:
            raise ValueError("DataArray is missing the 'probability' coordinate")
        da = da.transpose("firm", "scenario")
        space = ScenarioSpace(da["probability"].values)
        firms = tuple(str(f) for f in da["firm"].values) if "firm" in da.coords else ()
        return cls(da.values, space, firms)


def expectation(x: RandomVariable) -> float:
    """E[x] under the probabilities of x's space."""
    return x.expectation()


def pairing(x: RandomVariable, xi: RandomVariable) -> float:
    """
    The dual pairing ⟨x, ξ⟩ = E[x ξ].

    Raises
    ------
    MismatchedSpaceError
        If ``x`` and ``xi`` live on different spaces.
    """
    _check_same_space(x.space, xi.space)
    return float(x.space.probabilities @ (x.values * xi.values))


def system_pairing(X: SystemLoss, Xi: Sequence[RandomVariable]) -> float:
    """⟨X̄, Ξ⟩_n = Σ_i E[X_i Ξ_i]."""
    if len(Xi) != X.n:
        raise DimensionMismatchError(f"Got {len(Xi)} densities for {X.n} firms")
    return sum(pairing(X.row(i), Xi[i]) for i in range(X.n))


def relative_entropy(xi: RandomVariable) -> float:
    """H(Q|P) = E[ξ ln ξ], where scenarios with ξ = 0 contribute nothing."""
    return float(xi.space.probabilities @ xlogy(xi.values, xi.values))


def group_sums(y: SystemLoss, g: GroupStructure) -> list[GroupSum]:
    """
    Scenario-wise totals of every group, each flagged as deterministic or not.

    Raises
    ------
    BadGroupStructureError
        If ``g`` does not cover exactly the firms of ``y``.
    """
    g.check_firms(y.n)
    sums = []
    for members in g.groups:
        total = RandomVariable(y.values[members].sum(axis=0), y.space)
        sums.append(GroupSum(total, total.is_deterministic))
    return sums
