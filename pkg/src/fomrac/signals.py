"""Reference signal generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["SignalSpec", "eval_signal"]

SIGNAL_KINDS = ("square", "constant", "zero")


@dataclass(frozen=True)
class SignalSpec:
    kind: str = "square"
    period: float = 20.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"signal kind must be one of {SIGNAL_KINDS}, got {self.kind!r}")
        if self.kind == "square" and not self.period > 0.0:
            raise ValueError(f"square wave period must be positive, got {self.period!r}")


def eval_signal(spec: SignalSpec, t: float) -> float:
    """Value of the reference at time ``t``.

    The square wave is ``+amplitude`` on the first half of each period and
    ``-amplitude`` on the second.
    """
    if spec.kind == "zero":
        return 0.0
    if spec.kind == "constant":
        return spec.amplitude
    if math.fmod(t, spec.period) < 0.5 * spec.period:
        return spec.amplitude
    return -spec.amplitude
