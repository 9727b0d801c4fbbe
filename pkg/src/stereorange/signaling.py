"""Five-level overtake-safety signal driven by the nearest target depth."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

from .errors import PreconditionError

# 4.62 m safe longitudinal gap split into quarters (cm)
DEFAULT_BREAKPOINTS = (115.0, 231.0, 346.0, 462.0)


class SignalLevel(Enum):
    NO_TARGET = -1
    DANGER = 0
    CAUTION = 1
    NEUTRAL = 2
    NEAR_SAFE = 3
    SAFE = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, s: str) -> SignalLevel:
        for level, name in _LABELS.items():
            if name.lower() == s.strip().lower():
                return level
        raise ValueError(f"unknown signal level {s!r}")


_LABELS = {
    SignalLevel.NO_TARGET: "NoTarget",
    SignalLevel.DANGER: "Danger",
    SignalLevel.CAUTION: "Caution",
    SignalLevel.NEUTRAL: "Neutral",
    SignalLevel.NEAR_SAFE: "Near-Safe",
    SignalLevel.SAFE: "Safe",
}


@dataclass(frozen=True)
class SignalThresholds:
    breakpoints: tuple[float, float, float, float] = DEFAULT_BREAKPOINTS
    hysteresis: float = 5.0

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        object.__setattr__(self, "breakpoints", b)
        if len(b) != 4:
            raise PreconditionError("need exactly 4 breakpoints")
        if b[0] <= 0 or any(lo >= hi for lo, hi in zip(b, b[1:])):
            raise PreconditionError("breakpoints must be positive and strictly ascending")
        min_gap = min(hi - lo for lo, hi in zip(b, b[1:]))
        if not 0 <= self.hysteresis < min_gap:
            raise PreconditionError("hysteresis must be >= 0 and below the smallest breakpoint gap")


def classify(depth: float | None, t: SignalThresholds = SignalThresholds()) -> SignalLevel:
    if depth is None:
        return SignalLevel.NO_TARGET
    return SignalLevel(bisect.bisect_right(t.breakpoints, depth))


def step(prev: SignalLevel, depth: float | None, t: SignalThresholds = SignalThresholds()) -> SignalLevel:
    """Hysteretic update: a one-level change close to the crossed breakpoint is suppressed."""
    raw = classify(depth, t)
    if raw is SignalLevel.NO_TARGET or prev is SignalLevel.NO_TARGET:
        return raw
    if abs(raw.value - prev.value) == 1:
        crossed = t.breakpoints[min(raw.value, prev.value)]
        if abs(depth - crossed) < t.hysteresis:
            return prev
    return raw


def nearest_depth(depths) -> float | None:
    depths = list(depths)
    return min(depths) if depths else None
