"""Core value types shared across the package.

These are small frozen dataclasses with eager validation: constructing one of
them asserts its domain invariants, so downstream numerical code can assume
well-formed inputs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class AlphaParams:
    """Positive concentration vector of the four-part Dirichlet construction.

    The bivariate pair is (X, Y) = (U1 + U2, U1 + U3) for
    U ~ Dirichlet(alpha1, ..., alpha4), so every coordinate must be > 0.
    """

    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float

    def __post_init__(self):
        vals = (self.alpha1, self.alpha2, self.alpha3, self.alpha4)
        if not all(np.isfinite(vals)):
            raise ValueError(f"alpha must be finite, got {vals}")
        if min(vals) <= 0.0:
            raise ValueError(f"alpha coordinates must be strictly positive, got {vals}")

    @property
    def sum(self) -> float:
        return self.alpha1 + self.alpha2 + self.alpha3 + self.alpha4

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.alpha3, self.alpha4])

    @classmethod
    def from_array(cls, a: Sequence[float] | np.ndarray) -> "AlphaParams":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"alpha must have exactly 4 coordinates, got shape {a.shape}")
        return cls(*map(float, a))

    def to_json(self) -> str:
        return json.dumps(
            {"alpha1": self.alpha1, "alpha2": self.alpha2, "alpha3": self.alpha3, "alpha4": self.alpha4}
        )

    @classmethod
    def from_json(cls, text: str) -> "AlphaParams":
        d = json.loads(text)
        return cls(float(d["alpha1"]), float(d["alpha2"]), float(d["alpha3"]), float(d["alpha4"]))


@dataclass(frozen=True)
class MomentSummary:
    """Means, variances and correlation of a distribution on the unit square.

    Used both for theoretical moments (from :func:`bibeta.core.moments_of`)
    and for empirical moments (sample means, unbiased variances, Pearson
    correlation).
    """

    m1: float
    m2: float
    v1: float
    v2: float
    rho: float

    def __post_init__(self):
        if not (0.0 < self.m1 < 1.0 and 0.0 < self.m2 < 1.0):
            raise ValueError(f"means must lie in (0,1), got m1={self.m1}, m2={self.m2}")
        if self.v1 <= 0.0 or self.v2 <= 0.0:
            raise ValueError(f"variances must be positive, got v1={self.v1}, v2={self.v2}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1,1], got {self.rho}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.m1, self.m2, self.v1, self.v2, self.rho)

    def to_json(self) -> str:
        return json.dumps({"m1": self.m1, "m2": self.m2, "v1": self.v1, "v2": self.v2, "rho": self.rho})

    @classmethod
    def from_json(cls, text: str) -> "MomentSummary":
        d = json.loads(text)
        return cls(float(d["m1"]), float(d["m2"]), float(d["v1"]), float(d["v2"]), float(d["rho"]))


@dataclass(frozen=True)
class PairedSample:
    """n paired observations strictly inside the open unit square."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if x.size and (x.min() <= 0.0 or x.max() >= 1.0 or y.min() <= 0.0 or y.max() >= 1.0):
            raise ValueError("all coordinates must lie strictly inside (0,1)")

    @property
    def n(self) -> int:
        return int(self.x.size)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y\n")
        for xi, yi in zip(self.x, self.y):
            buf.write(f"{xi:.17g},{yi:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PairedSample":
        """Parse a two-column CSV with an "x,y" header.

        Raises ValueError naming the 1-based data row of the first offending
        entry.
        """
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty input: expected a CSV with header 'x,y'")
        header = [h.strip().lower() for h in lines[0].split(",")]
        if header[:2] != ["x", "y"]:
            raise ValueError(f"expected header 'x,y', got {lines[0]!r}")
        xs, ys = [], []
        for i, ln in enumerate(lines[1:], start=1):
            parts = ln.split(",")
            if len(parts) < 2:
                raise ValueError(f"row {i}: expected two comma-separated values, got {ln!r}")
            try:
                xi, yi = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"row {i}: could not parse {ln!r} as two floats") from None
            if not (0.0 < xi < 1.0 and 0.0 < yi < 1.0):
                raise ValueError(f"row {i}: ({xi}, {yi}) is not strictly inside the unit square")
            xs.append(xi)
            ys.append(yi)
        return cls(np.array(xs), np.array(ys))


@dataclass(frozen=True)
class RhoInterval:
    """Open interval of correlations attainable for fixed marginal means."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (-1.0 <= self.lower < self.upper <= 1.0):
            raise ValueError(f"need -1 <= lower < upper <= 1, got ({self.lower}, {self.upper})")

    def contains(self, rho: float, strict: bool = True) -> bool:
        if strict:
            return self.lower < rho < self.upper
        return self.lower <= rho <= self.upper


@dataclass(frozen=True)
class SolverOutcome:
    """Unconstrained solution of the moment equations.

    ``alpha`` is the literal solution and may have non-positive coordinates;
    ``feasible`` records whether it lies in the parameter space.  ``bar_alpha``
    is the implied concentration total (m1 - m1^2 - v1) / v1.
    """

    alpha: np.ndarray
    feasible: bool
    bar_alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))

    def as_params(self) -> AlphaParams:
        if not self.feasible:
            raise ValueError("solution is outside the parameter space")
        return AlphaParams.from_array(self.alpha)


def as_float_array(values: Iterable[float], length: int | None = None) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if length is not None and arr.size != length:
        raise ValueError(f"expected {length} values, got {arr.size}")
    return arr
