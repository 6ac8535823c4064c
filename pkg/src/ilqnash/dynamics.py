"""Continuous-time multi-player dynamics models.

A dynamics model owns the joint state dimension and the per-player control
partition, and evaluates the continuous vector field ``xdot = f(x, us, t)``.
Discretization lives in :mod:`ilqnash.integration`; models only need the
continuous field (and, for the manual-derivative mode, its Jacobians).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import GameDefinitionError


class ControlPartition:
    """Maps between per-player control vectors and one stacked vector.

    Player ``i`` (0-based internally) owns the contiguous index range
    ``offsets[i] : offsets[i] + dims[i]`` of the stacked control vector.
    """

    def __init__(self, dims):
        dims = [int(m) for m in dims]
        if not dims or any(m <= 0 for m in dims):
            raise GameDefinitionError(f"control dimensions must be positive, got {dims}")
        self.dims = tuple(dims)
        offsets = np.concatenate([[0], np.cumsum(dims)])
        self.offsets = tuple(int(o) for o in offsets[:-1])
        self.total = int(offsets[-1])
        self.slices = tuple(
            slice(o, o + m) for o, m in zip(self.offsets, self.dims)
        )

    @property
    def num_players(self) -> int:
        return len(self.dims)

    def split(self, u):
        """Split a stacked control vector (or batch, last axis) per player."""
        u = np.asarray(u)
        if u.shape[-1] != self.total:
            raise GameDefinitionError(
                f"stacked control has dimension {u.shape[-1]}, expected {self.total}"
            )
        return [u[..., s] for s in self.slices]

    def stack(self, us):
        """Concatenate per-player control vectors into one stacked vector."""
        if len(us) != self.num_players:
            raise GameDefinitionError(
                f"got {len(us)} control vectors for {self.num_players} players"
            )
        us = [np.asarray(ui, dtype=float) for ui in us]
        for i, (ui, m) in enumerate(zip(us, self.dims)):
            if ui.shape[-1] != m:
                raise GameDefinitionError(
                    f"player {i + 1} control has dimension {ui.shape[-1]}, expected {m}"
                )
        return np.concatenate(us, axis=-1)

    def __eq__(self, other):
        return isinstance(other, ControlPartition) and self.dims == other.dims

    def __repr__(self):
        return f"ControlPartition(dims={list(self.dims)})"


class DynamicsModel:
    """Base class for continuous-time dynamics ``xdot = f(x, u_1..u_N, t)``.

    Subclasses implement :meth:`vector_field`; models intended for the
    manual-derivative solver mode also implement :meth:`jacobians`. The
    batch variants have generic loop fallbacks and may be overridden with
    vectorized versions for speed.

    All built-in models are time invariant; ``t`` is accepted and ignored.
    User models are free to depend on it.
    """

    def __init__(self, state_dim: int, control_dims):
        state_dim = int(state_dim)
        if state_dim <= 0:
            raise GameDefinitionError(f"state dimension must be positive, got {state_dim}")
        self._state_dim = state_dim
        self._partition = ControlPartition(control_dims)

    @property
    def state_dim(self) -> int:
        return self._state_dim

    @property
    def control_dims(self):
        return self._partition.dims

    @property
    def control_dim(self) -> int:
        """Total stacked control dimension."""
        return self._partition.total

    @property
    def num_players(self) -> int:
        return self._partition.num_players

    @property
    def partition(self) -> ControlPartition:
        return self._partition

    # -- continuous field -------------------------------------------------

    def vector_field(self, x, us, t=0.0):
        """Evaluate ``xdot`` at state ``x``, per-player controls ``us``, time ``t``.

        Args:
            x: joint state, shape ``(n,)``.
            us: list of per-player control vectors.
            t: time in seconds.

        Returns:
            State derivative, shape ``(n,)``.
        """
        raise NotImplementedError

    def jacobians(self, x, us, t=0.0):
        """Jacobians of the continuous field: ``(df/dx, [df/du_i])``.

        Only required for the manual-derivative mode. Shapes ``(n, n)`` and
        ``(n, m_i)`` per player.
        """
        raise NotImplementedError(
            f"{type(self).__name__} does not provide hand-coded Jacobians; "
            "use the automatic derivative mode"
        )

    # -- batch hooks (override for speed) ---------------------------------

    def vector_field_batch(self, xs, us, ts):
        """Vectorized field over ``K`` points: ``(K, n), (K, m) -> (K, n)``.

        ``us`` is stacked. The default implementation loops.
        """
        out = np.empty_like(xs)
        for k in range(xs.shape[0]):
            out[k] = self.vector_field(xs[k], self._partition.split(us[k]), ts[k])
        return out

    def jacobians_batch(self, xs, us, ts):
        """Batched continuous Jacobians ``(K, n, n), (K, n, m)`` (stacked u)."""
        K, n = xs.shape
        fx = np.empty((K, n, n))
        fu = np.empty((K, n, self.control_dim))
        for k in range(K):
            jx, jus = self.jacobians(xs[k], self._partition.split(us[k]), ts[k])
            fx[k] = jx
            fu[k] = np.concatenate([np.asarray(j, dtype=float) for j in jus], axis=1)
        return fx, fu

    def validate_point(self, x, us):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise GameDefinitionError(
                f"state has shape {x.shape}, expected ({self.state_dim},)"
            )
        if len(us) != self.num_players:
            raise GameDefinitionError(
                f"got {len(us)} control vectors for {self.num_players} players"
            )
        return x, [np.asarray(u, dtype=float) for u in us]


class UnicycleModel(DynamicsModel):
    """4D unicycle: state ``(p_x, p_y, theta, v)``, controls ``(omega, a)``.

    Field: ``xdot = (v cos(theta), v sin(theta), omega, a)``. Units are
    meters, radians, seconds. Headings are left unwrapped.
    """

    STATE_LABELS = ("p_x", "p_y", "theta", "v")
    CONTROL_LABELS = ("omega", "a")

    def __init__(self):
        super().__init__(state_dim=4, control_dims=[2])

    def vector_field(self, x, us, t=0.0):
        u = us[0]
        theta, v = float(x[2]), float(x[3])
        return np.array(
            [v * math.cos(theta), v * math.sin(theta), float(u[0]), float(u[1])]
        )

    def jacobians(self, x, us, t=0.0):
        theta, v = float(x[2]), float(x[3])
        c, s = math.cos(theta), math.sin(theta)
        fx = np.zeros((4, 4))
        fx[0, 2] = -v * s
        fx[0, 3] = c
        fx[1, 2] = v * c
        fx[1, 3] = s
        fu = np.zeros((4, 2))
        fu[2, 0] = 1.0
        fu[3, 1] = 1.0
        return fx, [fu]

    def vector_field_batch(self, xs, us, ts):
        theta = xs[:, 2]
        v = xs[:, 3]
        out = np.empty_like(xs)
        out[:, 0] = v * np.cos(theta)
        out[:, 1] = v * np.sin(theta)
        out[:, 2] = us[:, 0]
        out[:, 3] = us[:, 1]
        return out

    def jacobians_batch(self, xs, us, ts):
        K = xs.shape[0]
        theta = xs[:, 2]
        v = xs[:, 3]
        c, s = np.cos(theta), np.sin(theta)
        fx = np.zeros((K, 4, 4))
        fx[:, 0, 2] = -v * s
        fx[:, 0, 3] = c
        fx[:, 1, 2] = v * c
        fx[:, 1, 3] = s
        fu = np.zeros((K, 4, 2))
        fu[:, 2, 0] = 1.0
        fu[:, 3, 1] = 1.0
        return fx, fu


class LinearSystemModel(DynamicsModel):
    """Continuous-time linear dynamics ``xdot = A x + sum_i B_i u_i``."""

    def __init__(self, A, Bs):
        A = np.asarray(A, dtype=float)
        Bs = [np.atleast_2d(np.asarray(B, dtype=float)) for B in Bs]
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GameDefinitionError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        for i, B in enumerate(Bs):
            if B.shape[0] != n:
                raise GameDefinitionError(
                    f"B_{i + 1} has {B.shape[0]} rows, expected {n}"
                )
        super().__init__(state_dim=n, control_dims=[B.shape[1] for B in Bs])
        self.A = A
        self.Bs = Bs
        self._B_stacked = np.concatenate(Bs, axis=1)

    def vector_field(self, x, us, t=0.0):
        xdot = self.A @ np.asarray(x, dtype=float)
        for B, u in zip(self.Bs, us):
            xdot = xdot + B @ np.asarray(u, dtype=float)
        return xdot

    def jacobians(self, x, us, t=0.0):
        return self.A, list(self.Bs)

    def vector_field_batch(self, xs, us, ts):
        return xs @ self.A.T + us @ self._B_stacked.T

    def jacobians_batch(self, xs, us, ts):
        K = xs.shape[0]
        fx = np.broadcast_to(self.A, (K,) + self.A.shape).copy()
        fu = np.broadcast_to(self._B_stacked, (K,) + self._B_stacked.shape).copy()
        return fx, fu


class ProductSystem(DynamicsModel):
    """Joint dynamics stacking independent single-player subsystems.

    Subsystem ``i`` is owned by player ``i``; its state block occupies the
    contiguous range ``state_offsets[i] : state_offsets[i] + sub.state_dim``
    of the joint state, players ordered by index. The joint field is the
    block-wise concatenation of the subsystem fields.
    """

    def __init__(self, subsystems):
        subsystems = list(subsystems)
        if not subsystems:
            raise GameDefinitionError("a product system needs at least one subsystem")
        for i, sub in enumerate(subsystems):
            if sub.num_players != 1:
                raise GameDefinitionError(
                    f"subsystem {i + 1} has {sub.num_players} control blocks; "
                    "product subsystems must be single-player"
                )
        dims = [sub.state_dim for sub in subsystems]
        offsets = np.concatenate([[0], np.cumsum(dims)])
        super().__init__(
            state_dim=int(offsets[-1]),
            control_dims=[sub.control_dim for sub in subsystems],
        )
        self.subsystems = subsystems
        self.state_offsets = tuple(int(o) for o in offsets[:-1])
        self.state_slices = tuple(
            slice(o, o + d) for o, d in zip(self.state_offsets, dims)
        )

    def position_indices(self, i: int):
        """Joint-state indices of the planar position of player ``i`` (0-based).

        Only meaningful when subsystem ``i`` puts ``(p_x, p_y)`` first, as the
        built-in unicycle does.
        """
        o = self.state_offsets[i]
        return (o, o + 1)

    def vector_field(self, x, us, t=0.0):
        xdot = np.empty(self.state_dim)
        for sub, s, u in zip(self.subsystems, self.state_slices, us):
            xdot[s] = sub.vector_field(x[s], [u], t)
        return xdot

    def jacobians(self, x, us, t=0.0):
        fx = np.zeros((self.state_dim, self.state_dim))
        fus = []
        for i, (sub, s, u) in enumerate(zip(self.subsystems, self.state_slices, us)):
            jx, jus = sub.jacobians(x[s], [u], t)
            fx[s, s] = jx
            fu = np.zeros((self.state_dim, self.control_dims[i]))
            fu[s, :] = jus[0]
            fus.append(fu)
        return fx, fus

    def vector_field_batch(self, xs, us, ts):
        out = np.empty_like(xs)
        for sub, s, cs in zip(self.subsystems, self.state_slices, self.partition.slices):
            out[:, s] = sub.vector_field_batch(xs[:, s], us[:, cs], ts)
        return out

    def jacobians_batch(self, xs, us, ts):
        K = xs.shape[0]
        fx = np.zeros((K, self.state_dim, self.state_dim))
        fu = np.zeros((K, self.state_dim, self.control_dim))
        for sub, s, cs in zip(self.subsystems, self.state_slices, self.partition.slices):
            jx, ju = sub.jacobians_batch(xs[:, s], us[:, cs], ts)
            fx[:, s, s] = jx
            fu[:, s, cs] = ju
        return fx, fu
