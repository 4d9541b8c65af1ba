"""Multi-room building built from one room template.

Rooms are thermally independent, so every building matrix is block diagonal
and any building-level schedule splits into one subproblem per room.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"
MULTIPLIER_RANGE = (0.5, 1.5)


@dataclass(frozen=True)
class BuildingModel:
    n_s: int
    n_r: int
    room: object  # RoomModel
    participation_mask: np.ndarray  # (n_s,) bool, per floor
    disturbance_multipliers: np.ndarray  # (n_br,)
    rng_seed: int
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def n_br(self):
        return self.n_s * self.n_r

    @property
    def n(self):
        return self.room.n

    def floor_of(self, room_index):
        return room_index // self.n_r

    @cached_property
    def room_participates(self):
        return np.repeat(self.participation_mask, self.n_r)

    @cached_property
    def A_b(self):
        return np.kron(np.eye(self.n_br), self.room.A)

    @cached_property
    def B_b(self):
        return np.kron(np.eye(self.n_br), self.room.B)

    @cached_property
    def E_b(self):
        return np.kron(np.eye(self.n_br), self.room.E)

    @cached_property
    def B_r(self):
        return self.B_b * self.room_participates[None, :]

    def building_disturbance(self, profile):
        """Stacked disturbance inputs, shape (N, n_br * n), rooms in index order."""
        blocks = [self.room.disturbance_inputs(profile.scaled(m))
                  for m in self.disturbance_multipliers]
        return np.hstack(blocks)


def augment(room, n_s, n_r, rng_seed=0, participation_mask=None):
    """Replicate ``room`` into ``n_s`` floors of ``n_r`` rooms.

    Room 0 keeps the template disturbance (multiplier 1); the others draw a
    uniform multiplier in [0.5, 1.5] from a PCG64 stream seeded with
    ``rng_seed``.  ``participation_mask`` marks floors that offer reserve
    (default: all floors).
    """
    if n_s < 1 or n_r < 1:
        raise ValueError("need at least one floor and one room per floor")
    if participation_mask is None:
        mask = np.ones(n_s, dtype=bool)
    else:
        mask = np.asarray(participation_mask, dtype=bool).reshape(-1)
        if mask.shape != (n_s,):
            raise ValueError(f"participation mask needs {n_s} entries")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    mult = rng.uniform(*MULTIPLIER_RANGE, size=n_s * n_r)
    mult[0] = 1.0
    mask = mask.copy()
    mask.setflags(write=False)
    mult.setflags(write=False)
    return BuildingModel(n_s, n_r, room, mask, mult, int(rng_seed))


@dataclass(frozen=True)
class LiftedDynamics:
    """States ``x_1..x_N`` stacked as affine maps of ``x0`` and the input sequences.

    Block row ``k-1`` of each map gives ``x_k``; block column ``l`` multiplies
    the input applied at step ``l``.
    """

    N: int
    n: int
    Phi_x0: np.ndarray = field(repr=False)   # (N n, n)
    Phi_u: np.ndarray = field(repr=False)    # (N n, N nu)
    Phi_d: np.ndarray = field(repr=False)    # (N n, N nd)
    Phi_r: np.ndarray = field(repr=False)    # (N n, N nr)

    def predict(self, x0, u, d, r):
        """Trajectory ``x_1..x_N`` as an (N, n) array.

        ``u``, ``d``, ``r`` are (N, width) sequences.
        """
        z = (self.Phi_x0 @ np.asarray(x0, float)
             + self.Phi_u @ np.ravel(u)
             + self.Phi_d @ np.ravel(d)
             + self.Phi_r @ np.ravel(r))
        return z.reshape(self.N, self.n)


def _causal_stack(powers, M, N):
    n = powers[0].shape[0]
    w = M.shape[1]
    out = np.zeros((N * n, N * w))
    responses = [P @ M for P in powers[:N]]  # A^j M
    for k in range(1, N + 1):
        for l in range(k):
            out[(k - 1) * n:k * n, l * w:(l + 1) * w] = responses[k - 1 - l]
    return out


def lift_matrices(A, B, E, B_r, N):
    if N < 1:
        raise ValueError("horizon must be at least 1")
    n = A.shape[0]
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    Phi_x0 = np.vstack(powers[1:N + 1])
    return LiftedDynamics(N, n, Phi_x0, _causal_stack(powers, B, N),
                          _causal_stack(powers, E, N), _causal_stack(powers, B_r, N))


def lift(building, N):
    """Lifted building dynamics over ``N`` steps."""
    return lift_matrices(building.A_b, building.B_b, building.E_b, building.B_r, N)


@dataclass(frozen=True)
class RoomView:
    index: int
    floor: int
    room: object  # RoomModel
    multiplier: float
    participates: bool
    disturbance: object  # DisturbanceProfile, already scaled


def per_room_views(building, profile):
    """Independent single-room subproblems of ``building`` under ``profile``."""
    views = []
    for i, mult in enumerate(building.disturbance_multipliers):
        scaled = profile if mult == 1.0 else profile.scaled(mult)
        views.append(RoomView(i, building.floor_of(i), building.room, float(mult),
                              bool(building.room_participates[i]), scaled))
    return views
