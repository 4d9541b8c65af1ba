"""Cost-minimal HVAC input and reserve schedules.

For each step the program chooses a supply mass flow ``u``, a reserve
commitment ``r`` (the flow the building promises to shed when called) and a
comfort slack ``eps``.  Two state trajectories must respect the comfort band:
the non-curtailed one and the curtailed one.  States are eliminated through
the lifted dynamics, so the LP only carries ``(u, r, eps)`` per step.

Variable layout: step ``k`` owns ``z[3*nu*k : 3*nu*(k+1)] = [u_k, r_k, eps_k]``
with ``nu`` entries each (``nu`` = number of rooms in the system).

Row layout: for each step ``k = 1..N``, for trajectory (non-curtailed,
curtailed), for each bounded state: an upper row then a lower row (rows whose
bound is infinite are omitted).  Then for each step ``k = 0..N-1`` and room:
``u + r <= u_plus``, ``-u - r <= -u_minus``, ``r - u <= 0``.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .building import lift_matrices, per_room_views
from .lp import TOL_FEAS, TOL_OPT, LpError, LpProblem, Status, solve_lp

log = logging.getLogger(__name__)

MIN_PENALTY_RATIO = 100.0
MAX_MONOLITHIC_VARS = 10_000


class ScheduleError(RuntimeError):
    """A room LP did not reach an optimum."""


@dataclass(frozen=True)
class PriceProfile:
    """Energy and reserve prices (SGD/kWh) per market period of ``dt`` seconds."""

    energy: np.ndarray
    reserve: np.ndarray
    dt: float = 1800.0

    def __post_init__(self):
        e = np.asarray(self.energy, dtype=float).reshape(-1)
        r = np.asarray(self.reserve, dtype=float).reshape(-1)
        if e.shape != r.shape:
            raise ValueError("energy and reserve price vectors differ in length")
        if e.size == 0:
            raise ValueError("empty price profile")
        if not np.all(e > 0):
            raise ValueError("energy prices must be positive")
        if not np.all(r >= 0):
            raise ValueError("reserve prices must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        e.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "energy", e)
        object.__setattr__(self, "reserve", r)

    @property
    def N(self):
        return self.energy.shape[0]

    def window(self, start, stop):
        return PriceProfile(self.energy[start:stop], self.reserve[start:stop], self.dt)


class CurtailmentSign(str, Enum):
    PHYSICAL = "physical"
    AS_WRITTEN = "as_written"


@dataclass(frozen=True)
class SchedulerConfig:
    comfort_penalty: float = 1000.0      # rho, SGD per (degC * period)
    reserve_tiebreak: float | None = None  # eta, SGD/kWh; None picks it from the prices
    curtailment_sign: CurtailmentSign = CurtailmentSign.PHYSICAL
    tol_feas: float = TOL_FEAS
    tol_opt: float = TOL_OPT
    backend: str | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "curtailment_sign", CurtailmentSign(self.curtailment_sign))


def resolve_tiebreak(cfg, prices):
    """Reserve tie-break price: below 1e-6 of the cheapest positive reserve price."""
    positive = prices.reserve[prices.reserve > 0]
    if cfg.reserve_tiebreak is None:
        return 1e-7 * float(positive.min()) if positive.size else 1e-9
    eta = float(cfg.reserve_tiebreak)
    if eta <= 0:
        raise ValueError("reserve tie-break must be positive")
    if positive.size and not eta < 1e-6 * positive.min():
        raise ValueError("reserve tie-break must stay below 1e-6 x the cheapest reserve price")
    return eta


def check_penalty(cfg, prices, room):
    """Require rho >= 100 x (max energy price x kappa x mdot_max)."""
    scale = float(prices.energy.max()) * room.power_conversion * room.hvac.mdot_max
    if cfg.comfort_penalty < MIN_PENALTY_RATIO * scale:
        raise ValueError(
            f"comfort penalty {cfg.comfort_penalty} is below {MIN_PENALTY_RATIO:g} x {scale:.4g}")


@dataclass
class CondensedLp:
    """Price-independent part of the scheduling LP for one linear system.

    ``G`` and the bounds depend only on the dynamics, horizon, comfort band and
    actuator limits; ``rhs`` adds initial state and disturbances and ``costs``
    adds prices, so one instance serves every price perturbation.
    """

    N: int
    nu: int
    lifted: object = field(repr=False)
    G: np.ndarray = field(repr=False)
    lb: np.ndarray = field(repr=False)
    ub: np.ndarray = field(repr=False)
    mode: CurtailmentSign
    _row_state: np.ndarray = field(repr=False)   # index into the stacked N*n state vector
    _row_sign: np.ndarray = field(repr=False)    # +1 upper, -1 lower
    _row_bound: np.ndarray = field(repr=False)
    _act_rhs: np.ndarray = field(repr=False)

    @property
    def n_vars(self):
        return 3 * self.N * self.nu

    def u_index(self, k, j=0):
        return 3 * self.nu * k + j

    def r_index(self, k, j=0):
        return 3 * self.nu * k + self.nu + j

    def eps_index(self, k, j=0):
        return 3 * self.nu * k + 2 * self.nu + j

    def free_response(self, x0, d_inputs):
        return self.lifted.Phi_x0 @ np.asarray(x0, float) + self.lifted.Phi_d @ np.ravel(d_inputs)

    def rhs(self, x0, d_inputs):
        free = self.free_response(x0, d_inputs)
        h_state = self._row_sign * (self._row_bound - free[self._row_state])
        return np.concatenate((h_state, self._act_rhs))

    def costs(self, prices, cfg, kappa, eta):
        scale = kappa * prices.dt / 3600.0
        c = np.empty(self.n_vars)
        per_step = c.reshape(self.N, 3, self.nu)
        per_step[:, 0, :] = (prices.energy * scale)[:, None]
        per_step[:, 1, :] = ((eta - prices.reserve) * scale)[:, None]
        per_step[:, 2, :] = cfg.comfort_penalty
        return c

    def problem(self, c, h):
        return LpProblem(c, self.G, h, self.lb, self.ub)

    def trajectories(self, z, x0, d_inputs):
        """(x_nc, x_c) as (N+1, n) arrays including ``x0``."""
        L = self.lifted
        zz = z.reshape(self.N, 3, self.nu)
        u, r = zz[:, 0, :], zz[:, 1, :]
        free = self.free_response(x0, d_inputs)
        base = free + L.Phi_u @ u.ravel()
        resp_r = L.Phi_r @ r.ravel()
        if self.mode is CurtailmentSign.PHYSICAL:
            x_nc = base
            x_c = base - resp_r
        else:
            x_nc = base + resp_r
            B_r = L.Phi_r[:L.n, :self.nu]  # first block equals B_r
            shed = (r @ B_r.T).ravel()
            x_c = x_nc - shed
        x0 = np.asarray(x0, float)[None, :]
        return (np.vstack((x0, x_nc.reshape(self.N, L.n))),
                np.vstack((x0, x_c.reshape(self.N, L.n))))


def condense(A, B, E, B_r, N, comfort_lo, comfort_hi, state_input, u_minus, u_plus,
             reserve_allowed, mode=CurtailmentSign.PHYSICAL):
    """Assemble the price-independent LP data.

    Args:
        A, B, E, B_r: discrete dynamics; ``B`` and ``B_r`` have one column per room.
        N: horizon.
        comfort_lo, comfort_hi: per-state bounds (+/-inf where inactive).
        state_input: room index owning each state (picks the slack column).
        u_minus, u_plus: per-room actuator limits.
        reserve_allowed: per-room flag; reserve is fixed to zero where False.
        mode: curtailed-trajectory convention.
    """
    mode = CurtailmentSign(mode)
    n = A.shape[0]
    nu = B.shape[1]
    L = lift_matrices(A, B, E, B_r, N)
    nz = 3 * N * nu
    u_cols = np.array([3 * nu * l + j for l in range(N) for j in range(nu)])
    r_cols = u_cols + nu

    # rows of x (stacked, N*n) expressed in z for each trajectory
    lin_u = np.zeros((N * n, nz))
    lin_u[:, u_cols] = L.Phi_u
    lin_r = np.zeros((N * n, nz))
    lin_r[:, r_cols] = L.Phi_r
    if mode is CurtailmentSign.PHYSICAL:
        traj = (lin_u, lin_u - lin_r)
    else:
        nc = lin_u + lin_r
        shed = np.zeros((N * n, nz))
        for k in range(N):
            shed[k * n:(k + 1) * n, r_cols[k * nu:(k + 1) * nu]] = B_r
        traj = (nc, nc - shed)

    lo = np.asarray(comfort_lo, float)
    hi = np.asarray(comfort_hi, float)
    bounded = np.flatnonzero(np.isfinite(lo) | np.isfinite(hi))
    rows, row_state, row_sign, row_bound = [], [], [], []
    for k in range(1, N + 1):
        for T in traj:
            for s in bounded:
                idx = (k - 1) * n + s
                eps_col = 3 * nu * (k - 1) + 2 * nu + state_input[s]
                for sign, bound in ((1.0, hi[s]), (-1.0, lo[s])):
                    if not np.isfinite(bound):
                        continue
                    row = sign * T[idx]
                    row[eps_col] -= 1.0
                    rows.append(row)
                    row_state.append(idx)
                    row_sign.append(sign)
                    row_bound.append(bound)

    act_rows, act_rhs = [], []
    u_minus = np.broadcast_to(np.asarray(u_minus, float), (nu,))
    u_plus = np.broadcast_to(np.asarray(u_plus, float), (nu,))
    for k in range(N):
        for j in range(nu):
            ui, ri = 3 * nu * k + j, 3 * nu * k + nu + j
            for cu, cr, rhs in ((1.0, 1.0, u_plus[j]), (-1.0, -1.0, -u_minus[j]), (-1.0, 1.0, 0.0)):
                row = np.zeros(nz)
                row[ui], row[ri] = cu, cr
                act_rows.append(row)
                act_rhs.append(rhs)

    G = np.vstack(rows + act_rows) if rows or act_rows else np.zeros((0, nz))
    lb = np.zeros(nz)
    ub = np.full(nz, np.inf)
    allowed = np.broadcast_to(np.asarray(reserve_allowed, bool), (nu,))
    for k in range(N):
        ub[3 * nu * k + nu:3 * nu * k + 2 * nu][~allowed] = 0.0
    for a in (G, lb, ub):
        a.setflags(write=False)
    return CondensedLp(N, nu, L, G, lb, ub, mode, np.array(row_state, dtype=np.intp),
                       np.array(row_sign), np.array(row_bound), np.array(act_rhs))


def condense_room(room, N, participates=True, mode=CurtailmentSign.PHYSICAL):
    B_r = room.B if participates else np.zeros_like(room.B)
    return condense(room.A, room.B, room.E, B_r, N, room.comfort.x_minus, room.comfort.x_plus,
                    np.zeros(room.n, dtype=int), room.hvac.mdot_min, room.hvac.mdot_max,
                    participates, mode)


def default_x0(room):
    return np.full(room.n, room.comfort.midpoint())


def build_schedule_lp(view, prices, cfg, x0=None, template=None):
    """The scheduling LP of one room view under ``prices``.

    ``template`` may pass a cached ``condense_room`` result for the view's
    room, horizon, participation and mode.
    """
    room = view.room
    participates = view.participates
    if template is None:
        template = condense_room(room, prices.N, participates, cfg.curtailment_sign)
    x0 = default_x0(room) if x0 is None else x0
    d_in = room.disturbance_inputs(view.disturbance)
    if d_in.shape[0] != prices.N:
        raise ValueError("disturbance and price horizons differ")
    eta = resolve_tiebreak(cfg, prices)
    c = template.costs(prices, cfg, room.power_conversion, eta)
    return template.problem(c, template.rhs(x0, d_in))


@dataclass
class ScheduleSolution:
    u: np.ndarray          # (N, n_br) kg/s
    r: np.ndarray          # (N, n_br) kg/s
    eps: np.ndarray        # (N, n_br) degC
    x_nc: np.ndarray       # (N+1, n_br, n) degC
    x_c: np.ndarray        # (N+1, n_br, n) degC
    power: np.ndarray      # (N,) kW
    energy_cost: float
    reserve_revenue: float
    penalty_cost: float
    tiebreak_cost: float
    objective: float
    status: Status
    iterations: int
    max_constraint_violation: float
    room_objectives: np.ndarray = field(repr=False)

    @property
    def N(self):
        return self.u.shape[0]

    @property
    def n_br(self):
        return self.u.shape[1]


class RoomSolver:
    """Solves every room of a building against one cached LP template per participation class."""

    def __init__(self, building, profile, cfg, x0=None, N=None):
        self.building = building
        self.cfg = cfg
        self.room = building.room
        self.N = N if N is not None else len(profile)
        self.views = per_room_views(building, profile)
        self.x0 = default_x0(self.room) if x0 is None else np.asarray(x0, float)
        self._templates = {}
        self._rhs = []
        for v in self.views:
            t = self.template(v.participates)
            d_in = self.room.disturbance_inputs(v.disturbance)
            if d_in.shape[0] != self.N:
                raise ValueError("disturbance and price horizons differ")
            self._rhs.append(t.rhs(self.x0, d_in))

    def template(self, participates):
        key = bool(participates)
        if key not in self._templates:
            self._templates[key] = condense_room(self.room, self.N, key, self.cfg.curtailment_sign)
        return self._templates[key]

    def costs(self, prices, participates=True):
        eta = resolve_tiebreak(self.cfg, prices)
        return self.template(participates).costs(prices, self.cfg, self.room.power_conversion, eta)

    def solve_room(self, i, c):
        v = self.views[i]
        t = self.template(v.participates)
        p = t.problem(c, self._rhs[i])
        try:
            sol = solve_lp(p, self.cfg.tol_feas, self.cfg.tol_opt, backend=self.cfg.backend)
        except LpError as exc:
            raise ScheduleError(f"room {i}: {exc}") from exc
        if sol.status is not Status.OPTIMAL:
            raise ScheduleError(f"room {i}: LP {sol.status.value}")
        return sol


def _warn_reserve(building, prices):
    if prices.reserve.any() and not building.participation_mask.any():
        warnings.warn("no floor participates in reserve provision; reserves fixed to zero",
                      RuntimeWarning, stacklevel=3)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def solve_schedule(building, prices, cfg, x0=None, profile=None, solver=None):
    """Solve every room independently and merge the results.

    Either pass the disturbance ``profile`` or a prepared ``RoomSolver``.
    """
    check_penalty(cfg, prices, building.room)
    _warn_reserve(building, prices)
    if solver is None:
        if profile is None:
            raise ValueError("need a disturbance profile")
        solver = RoomSolver(building, profile, cfg, x0, prices.N)
    costs = {p: solver.costs(prices, p) for p in (True, False)}

    def one(i):
        return solver.solve_room(i, costs[solver.views[i].participates])

    sols = _map(one, range(building.n_br), cfg.workers)
    zs = [s.z for s in sols]
    trajs = []
    for i, z in enumerate(zs):
        v = solver.views[i]
        t = solver.template(v.participates)
        trajs.append(t.trajectories(z, solver.x0, solver.room.disturbance_inputs(v.disturbance)))
    return _merge(building, prices, cfg, zs, trajs, sols,
                  [float(costs[solver.views[i].participates] @ z) for i, z in enumerate(zs)])


def _merge(building, prices, cfg, zs, trajs, sols, room_obj):
    N = prices.N
    Z = np.stack([z.reshape(N, 3) for z in zs], axis=1)  # (N, n_br, 3)
    u, r, eps = Z[..., 0], Z[..., 1], Z[..., 2]
    kappa = building.room.power_conversion
    scale = kappa * prices.dt / 3600.0
    eta = resolve_tiebreak(cfg, prices)
    energy_cost = float(np.sum(prices.energy[:, None] * u) * scale)
    revenue = float(np.sum(prices.reserve[:, None] * r) * scale)
    penalty = float(cfg.comfort_penalty * eps.sum())
    tiebreak = float(eta * scale * r.sum())
    return ScheduleSolution(
        u=u, r=r, eps=eps,
        x_nc=np.stack([t[0] for t in trajs], axis=1),
        x_c=np.stack([t[1] for t in trajs], axis=1),
        power=kappa * u.sum(axis=1),
        energy_cost=energy_cost,
        reserve_revenue=revenue,
        penalty_cost=penalty,
        tiebreak_cost=tiebreak,
        objective=float(np.sum(room_obj)),
        status=Status.OPTIMAL,
        iterations=int(sum(s.iterations for s in sols)),
        max_constraint_violation=float(max(s.max_constraint_violation for s in sols)),
        room_objectives=np.asarray(room_obj),
    )


def condense_building(building, N, mode=CurtailmentSign.PHYSICAL):
    """Monolithic LP over the block-diagonal building matrices (testing path)."""
    room = building.room
    n = room.n
    nv = 3 * N * building.n_br
    if nv > MAX_MONOLITHIC_VARS:
        raise ValueError(f"monolithic LP would have {nv} variables (cap {MAX_MONOLITHIC_VARS})")
    lo = np.tile(room.comfort.x_minus, building.n_br)
    hi = np.tile(room.comfort.x_plus, building.n_br)
    state_input = np.repeat(np.arange(building.n_br), n)
    return condense(building.A_b, building.B_b, building.E_b, building.B_r, N, lo, hi,
                    state_input, room.hvac.mdot_min, room.hvac.mdot_max,
                    building.room_participates, mode)


def solve_schedule_monolithic(building, prices, cfg, profile, x0=None):
    """Solve the whole building as one LP; returns (LpSolution, CondensedLp)."""
    check_penalty(cfg, prices, building.room)
    t = condense_building(building, prices.N, cfg.curtailment_sign)
    x0 = default_x0(building.room) if x0 is None else np.asarray(x0, float)
    x0_b = np.tile(x0, building.n_br)
    d_b = building.building_disturbance(profile)
    eta = resolve_tiebreak(cfg, prices)
    c = t.costs(prices, cfg, building.room.power_conversion, eta)
    sol = solve_lp(t.problem(c, t.rhs(x0_b, d_b)), cfg.tol_feas, cfg.tol_opt, backend=cfg.backend)
    return sol, t


def with_prices(prices, energy=None, reserve=None):
    return replace(prices,
                   energy=prices.energy if energy is None else energy,
                   reserve=prices.reserve if reserve is None else reserve)
