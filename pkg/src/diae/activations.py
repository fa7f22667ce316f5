"""Elementwise activations with inverses.

The alternating training scheme needs the inverse activation when it turns
the encoder update into a least-squares problem, so only invertible kinds
are supported: ``identity`` (the default used throughout the experiments)
and ``tanh``.  The tanh inverse is only defined on (-1, 1); inputs are
clamped to ``[-1 + clamp, 1 - clamp]`` before inversion so that the solve
always sees finite values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Activation", "resolve_activation"]

_KINDS = ("identity", "tanh")


@dataclass(frozen=True)
class Activation:
    kind: str = "identity"
    clamp: float = 1e-6

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}; expected one of {_KINDS}")
        if not (0.0 < self.clamp < 1.0):
            raise ValueError("clamp must lie strictly between 0 and 1")

    def apply(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(t, dtype=np.float64)
        return np.tanh(t)

    def invert(self, t: np.ndarray) -> np.ndarray:
        """Inverse activation; tanh inputs are clamped into the open domain."""
        if self.kind == "identity":
            return np.asarray(t, dtype=np.float64)
        clipped = np.clip(t, -1.0 + self.clamp, 1.0 - self.clamp)
        return np.arctanh(clipped)


def resolve_activation(spec, clamp: float = 1e-6) -> Activation:
    """Accept an :class:`Activation` or a kind name and return an Activation."""
    if isinstance(spec, Activation):
        return spec
    return Activation(kind=str(spec), clamp=clamp)
