"""Model parameters: stability index, branch rate and the scaling function.

The scaling function I maps the selection parameter epsilon to the spatial
truncation scale; all derived constants (normalizer, process speed,
truncation level, mark probability, stable phases) hang off it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class DomainError(ValueError):
    """Parameter outside the regime where a quantity is defined."""


def sigma_alpha(alpha: float) -> float:
    """Normalizing constant ((2-a)/a)^(a/2) * Gamma(1 - a/2).

    Defined for 1 <= alpha < 2; tends to 1 as alpha -> 2 and equals
    sqrt(pi) at alpha = 1 (boundary value, used only in tests).
    """
    if not 1.0 <= alpha < 2.0:
        raise DomainError(f"sigma_alpha requires alpha in [1, 2), got {alpha}")
    return ((2.0 - alpha) / alpha) ** (alpha / 2.0) * math.gamma(1.0 - alpha / 2.0)


@dataclass(frozen=True)
class ScalingPreset:
    """The function I(eps).

    kind is one of "log" (eps*|log eps|), "power_example"
    (eps^q with q = (3a+1)/(2a(1+a))) or "power" (eps^delta with
    1/a < delta < 1).  The power kinds carry the alpha they were built
    for so the exponent is fixed at construction.
    """

    kind: str
    exponent: float = 0.0

    @classmethod
    def log_example(cls) -> "ScalingPreset":
        return cls("log")

    @classmethod
    def power_example(cls, alpha: float) -> "ScalingPreset":
        if not 1.0 < alpha < 2.0:
            raise DomainError("power_example requires alpha in (1, 2)")
        q = (3.0 * alpha + 1.0) / (2.0 * alpha * (1.0 + alpha))
        return cls("power_example", q)

    @classmethod
    def power(cls, delta: float, alpha: float) -> "ScalingPreset":
        if not 1.0 / alpha < delta < 1.0:
            raise DomainError(
                f"power preset requires 1/alpha < delta < 1, got delta={delta}"
            )
        return cls("power", delta)

    def I(self, eps: float) -> float:
        if not 0.0 < eps < 1.0:
            raise DomainError(f"scaling presets require 0 < eps < 1, got {eps}")
        if self.kind == "log":
            return eps * abs(math.log(eps))
        return eps ** self.exponent

    def label(self) -> str:
        if self.kind == "log":
            return "log"
        return f"{self.kind}:{self.exponent!r}"

    @classmethod
    def from_label(cls, label: str) -> "ScalingPreset":
        if label == "log":
            return cls("log")
        kind, _, expo = label.partition(":")
        if kind not in ("power_example", "power") or not expo:
            raise DomainError(f"unknown scaling preset label {label!r}")
        return cls(kind, float(expo))


@dataclass(frozen=True)
class ModelParams:
    """All constants of one (alpha, eps, I) configuration.

    alpha = 2 selects the Brownian code path: speed 1, no subordinator.
    The stable phases u_-/u_+ are only defined while b_eps < 1/3 and are
    exposed as properties that raise outside that regime.
    """

    alpha: float
    epsilon: float
    scaling: ScalingPreset
    I_val: float = field(init=False)
    sigma_alpha: float = field(init=False)
    speed: float = field(init=False)
    branch_rate: float = field(init=False)
    trunc_level: float = field(init=False)
    b_eps: float = field(init=False)

    def __post_init__(self):
        if not 1.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (1, 2], got {self.alpha}")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        I = self.scaling.I(self.epsilon)
        object.__setattr__(self, "I_val", I)
        if self.alpha == 2.0:
            # Continuity limit of the normalizer; pure Brownian motion with
            # generator Laplacian, so unit speed and no jump truncation.
            object.__setattr__(self, "sigma_alpha", 1.0)
            object.__setattr__(self, "speed", 1.0)
            object.__setattr__(self, "trunc_level", 0.0)
        else:
            sig = sigma_alpha(self.alpha)
            object.__setattr__(self, "sigma_alpha", sig)
            object.__setattr__(self, "speed", sig * I ** (self.alpha - 2.0))
            object.__setattr__(
                self, "trunc_level", (2.0 - self.alpha) / self.alpha * I * I
            )
        object.__setattr__(self, "branch_rate", self.epsilon ** -2.0)
        e2 = self.epsilon ** 2
        object.__setattr__(self, "b_eps", e2 / (e2 + I * I))

    @property
    def is_brownian(self) -> bool:
        return self.alpha == 2.0

    @property
    def u_minus(self) -> float:
        return self.fixed_points()[0]

    @property
    def u_plus(self) -> float:
        return self.fixed_points()[2]

    def fixed_points(self) -> tuple[float, float, float]:
        from . import voting  # local import; voting has no params dependency

        return voting.fixed_points(self.b_eps)

    def large_jump_rate(self) -> float:
        """Arrival rate of jumps above trunc_level in the full subordinator."""
        if self.is_brownian:
            return 0.0
        return self.I_val ** -2.0
