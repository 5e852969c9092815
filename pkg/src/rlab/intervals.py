"""Certified scalar enclosures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple


def _pad(x: float, ulps: int = 4) -> float:
    return ulps * math.ulp(max(abs(x), 1e-300))


@dataclass(frozen=True)
class IntervalValue:
    """A lower/upper bound pair for a computed scalar.

    ``witness`` optionally carries the parameters (e.g. arclengths on two
    curves) at which the upper bound was realized.
    """

    lo: float
    hi: float
    witness: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def exact(cls, value: float, ulps: int = 4) -> "IntervalValue":
        """Enclose a value computed with a handful of rounded operations."""
        p = _pad(value, ulps)
        return cls(value - p, value + p)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def overlaps(self, other: "IntervalValue") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def scaled(self, factor: float) -> "IntervalValue":
        a, b = self.lo * factor, self.hi * factor
        return IntervalValue(min(a, b), max(a, b), self.witness)

    def __add__(self, other):
        if isinstance(other, IntervalValue):
            return IntervalValue(self.lo + other.lo, self.hi + other.hi)
        return IntervalValue(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __float__(self):
        return self.mid

    def to_dict(self) -> dict:
        out = {"lo": float(self.lo), "hi": float(self.hi)}
        if self.witness is not None:
            out["witness"] = [float(w) for w in self.witness]
        return out


def interval_sum(values) -> IntervalValue:
    total = IntervalValue(0.0, 0.0)
    for v in values:
        total = total + v
    return total


def interval_min(values) -> IntervalValue:
    values = list(values)
    best = min(values, key=lambda v: v.hi)
    return IntervalValue(min(v.lo for v in values), best.hi, best.witness)
