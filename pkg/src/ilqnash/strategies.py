"""Affine feedback strategies.

The control law fixed throughout the library is the minus-gain convention

    u_i,t = u_ref_i,t - P_i,t (x_t - x_ref_t) - scale * alpha_i,t

where ``(x_ref, u_ref)`` is the reference trajectory the strategy was
computed about, ``P`` is the feedback gain, ``alpha`` the feedforward term,
and ``scale`` the line-search step scale applied to the feedforward only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GameDefinitionError


@dataclass
class AffineStrategy:
    """Per-timestep affine feedback policy of a single player.

    Attributes:
        P: feedback gains, shape ``(T, m_i, n)``.
        alpha: feedforward terms, shape ``(T, m_i)``.
    """

    P: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.P.ndim != 3 or self.alpha.ndim != 2:
            raise GameDefinitionError(
                f"strategy arrays must have shapes (T, m, n) and (T, m), got "
                f"{self.P.shape} and {self.alpha.shape}"
            )
        if self.P.shape[:2] != self.alpha.shape:
            raise GameDefinitionError(
                f"gain horizon/dimension {self.P.shape[:2]} does not match "
                f"feedforward {self.alpha.shape}"
            )
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.alpha))):
            raise GameDefinitionError("strategy entries must be finite")

    @property
    def horizon(self) -> int:
        return self.P.shape[0]

    @property
    def control_dim(self) -> int:
        return self.P.shape[1]

    def control(self, t, x, x_ref, u_ref_i, step_scale=1.0):
        """Evaluate the control law at timestep ``t``."""
        return u_ref_i - self.P[t] @ (x - x_ref) - step_scale * self.alpha[t]

    def shifted(self) -> "AffineStrategy":
        """Strategy advanced one timestep, repeating the final stage."""
        P = np.concatenate([self.P[1:], self.P[-1:]], axis=0)
        alpha = np.concatenate([self.alpha[1:], self.alpha[-1:]], axis=0)
        return AffineStrategy(P, alpha)


def zero_strategies(horizon, state_dim, control_dims):
    """All-zero strategies (pure reference playback) for each player."""
    return [
        AffineStrategy(np.zeros((horizon, m, state_dim)), np.zeros((horizon, m)))
        for m in control_dims
    ]


def stack_gains(strategies):
    """Concatenate per-player strategies along the control axis.

    Returns ``(P, alpha)`` with shapes ``(T, m, n)`` and ``(T, m)`` where
    ``m`` is the total control dimension.
    """
    P = np.concatenate([s.P for s in strategies], axis=1)
    alpha = np.concatenate([s.alpha for s in strategies], axis=1)
    return P, alpha
