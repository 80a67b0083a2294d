"""Link functions that turn an overlap similarity into a correctness value.

A link maps a similarity L in [0, 1] to a correctness z in [0, 1]. Three
shapes are supported:

* identity: z = L
* threshold(beta): z = 1 if L >= beta else 0
* ramp(alpha, beta): 0 below alpha, 1 at or above beta, linear in between

"hinge" is shorthand for ramp(0.5, 1.0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

IDENTITY = "identity"
THRESHOLD = "threshold"
RAMP = "ramp"

_KINDS = (IDENTITY, THRESHOLD, RAMP)


@dataclass(frozen=True)
class LinkSpec:
    """A validated link function description.

    Use the module-level constructors (:func:`identity`, :func:`threshold`,
    :func:`ramp`, :func:`hinge`) rather than building instances by hand.
    """

    kind: str
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == THRESHOLD:
            if not math.isfinite(self.beta) or not 0.0 < self.beta <= 1.0:
                raise ValueError(f"threshold link requires 0 < beta <= 1, got beta={self.beta!r}")
            # A threshold is the alpha = beta limit of the ramp; keep the
            # stored parameters in that form regardless of construction path.
            object.__setattr__(self, "alpha", self.beta)
        elif self.kind == RAMP:
            if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
                raise ValueError("ramp link requires finite alpha and beta")
            if not (0.0 <= self.alpha < self.beta <= 1.0):
                raise ValueError(
                    f"ramp link requires 0 <= alpha < beta <= 1, got alpha={self.alpha!r} beta={self.beta!r}"
                )

    @property
    def is_binary(self) -> bool:
        """True when the link can only produce correctness values in {0, 1}."""
        return self.kind == THRESHOLD

    def __str__(self) -> str:
        if self.kind == IDENTITY:
            return "identity"
        if self.kind == THRESHOLD:
            return f"threshold:{self.beta:g}"
        return f"ramp:{self.alpha:g}:{self.beta:g}"


def identity() -> LinkSpec:
    return LinkSpec(IDENTITY)


def threshold(beta: float) -> LinkSpec:
    return LinkSpec(THRESHOLD, beta=float(beta))


def ramp(alpha: float, beta: float) -> LinkSpec:
    return LinkSpec(RAMP, alpha=float(alpha), beta=float(beta))


def hinge() -> LinkSpec:
    """Ramp that starts crediting at 0.5 overlap and saturates at 1."""
    return ramp(0.5, 1.0)


def apply_link(spec: LinkSpec, similarity: float) -> float:
    """Correctness value for a similarity in [0, 1]."""
    s = float(similarity)
    if not math.isfinite(s) or not 0.0 <= s <= 1.0:
        raise ValueError(f"similarity must lie in [0, 1], got {similarity!r}")
    if spec.kind == IDENTITY:
        return s
    if spec.kind == THRESHOLD:
        return 1.0 if s >= spec.beta else 0.0
    if s <= spec.alpha:
        return 0.0
    if s >= spec.beta:
        return 1.0
    return (s - spec.alpha) / (spec.beta - spec.alpha)


def parse_link(text: str) -> LinkSpec:
    """Parse the command-line syntax for links.

    Accepted forms: ``identity``, ``hinge``, ``threshold:<beta>``,
    ``ramp:<alpha>:<beta>``.
    """
    parts = text.strip().split(":")
    name = parts[0]
    try:
        if name == IDENTITY and len(parts) == 1:
            return identity()
        if name == "hinge" and len(parts) == 1:
            return hinge()
        if name == THRESHOLD and len(parts) == 2:
            return threshold(float(parts[1]))
        if name == RAMP and len(parts) == 3:
            return ramp(float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"invalid link {text!r}: {exc}") from exc
    raise ValueError(
        f"invalid link {text!r}; expected identity, hinge, threshold:<beta> or ramp:<alpha>:<beta>"
    )
