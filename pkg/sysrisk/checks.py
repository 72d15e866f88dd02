"""Result types shared by the randomized axiom and feasibility checkers."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Iterator
from typing import Any

import numpy as np


@dataclasses.dataclass(frozen=True)
class AxiomResult:
    """
    Outcome of one randomized check.

    ``evidence`` marks checks that can only gather grid evidence (surjectivity),
    never proof. ``counterexample`` holds the first violating inputs found.
    """

    axiom: str
    name: str
    passed: bool
    checked: int
    tolerance: float
    counterexample: dict[str, Any] | None = None
    evidence: bool = False
    skipped: int = 0
    note: str = ""

    def dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if self.counterexample is not None:
            d["counterexample"] = {
                k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.counterexample.items()
            }
        return d


@dataclasses.dataclass(frozen=True)
class AxiomReport:
    subject: str
    results: tuple[AxiomResult, ...]

    def __iter__(self) -> Iterator[AxiomResult]:
        return iter(self.results)

    def __getitem__(self, axiom: str) -> AxiomResult:
        for result in self.results:
            if result.axiom == axiom:
                return result
        raise KeyError(axiom)

    def __contains__(self, axiom: object) -> bool:
        return any(result.axiom == axiom for result in self.results)

    def passed(self, axioms: Iterable[str] | None = None) -> bool:
        """True if every listed axiom (default: all of them) passed."""
        wanted = None if axioms is None else set(axioms)
        return all(
            r.passed for r in self.results if wanted is None or r.axiom in wanted
        )

    @property
    def failures(self) -> list[AxiomResult]:
        return [r for r in self.results if not r.passed]

    def merged(self, other: "AxiomReport") -> "AxiomReport":
        return AxiomReport(self.subject, self.results + other.results)

    def __repr__(self) -> str:
        status = ", ".join(f"{r.axiom}={'ok' if r.passed else 'FAIL'}" for r in self.results)
        return f"AxiomReport<{self.subject}: {status}>"


def scaled(tol: float, *values: float) -> float:
    """Absolute tolerance ``tol · max(1, |values|)``."""
    return tol * max([1.0, *(abs(float(v)) for v in values)])


class Tally:
    """Accumulates one axiom's sample outcomes, keeping the first counterexample."""

    def __init__(self, axiom: str, name: str, tolerance: float) -> None:
        self.axiom = axiom
        self.name = name
        self.tolerance = tolerance
        self.checked = 0
        self.skipped = 0
        self.counterexample: dict[str, Any] | None = None

    def record(self, ok: bool, **inputs: Any) -> None:
        self.checked += 1
        if not ok and self.counterexample is None:
            self.counterexample = inputs

    def skip(self) -> None:
        self.skipped += 1

    def result(self, *, evidence: bool = False, note: str = "") -> AxiomResult:
        if self.skipped and not note:
            note = f"{self.skipped} samples skipped (premise not constructible)"
        return AxiomResult(
            axiom=self.axiom,
            name=self.name,
            passed=self.counterexample is None,
            checked=self.checked,
            tolerance=self.tolerance,
            counterexample=self.counterexample,
            evidence=evidence,
            skipped=self.skipped,
            note=note,
        )


def range_evidence(
    values: np.ndarray, codomain: str, *, bound: float = 10.0, tol: float = 1e-9
) -> tuple[bool, str]:
    """
    Grid evidence that a nondecreasing diagonal map covers ``codomain``.

    For ``"reals"`` the scanned values must fall below −bound and rise above
    +bound; for ``"nonnegative"`` they must stay ≥ 0, come within tol of 0 and
    rise above +bound. Monotone continuous maps then cover the interval between.
    """
    monotone = bool(np.all(np.diff(values) >= -tol * np.maximum(1.0, np.abs(values[1:]))))
    lo, hi = float(np.min(values)), float(np.max(values))
    if codomain == "reals":
        ok = monotone and lo < -bound and hi > bound
    elif codomain == "nonnegative":
        ok = monotone and lo >= -tol and lo <= tol and hi > bound
    else:
        raise ValueError(f"Unknown codomain {codomain!r}")
    return ok, f"scanned range [{lo:.6g}, {hi:.6g}], monotone={monotone}"
