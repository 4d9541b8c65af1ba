"""Single-room RC thermal model.

Five nodes: four walls (N, E, S, W) and the room air.  Each wall exchanges heat
with the ambient through ``r_out`` and with the room air through ``r_in`` and
absorbs solar gains; the room air receives the wall heat, internal gains and
the HVAC supply air heat ``mdot * cp * (T_in_heat - T_room)``.

The HVAC term is bilinear in (mdot, T_room).  ``linearize`` takes the
first-order Taylor expansion at an operating point and ``discretize`` applies
an exact zero-order hold.  The affine remainder of the Taylor expansion
(``mdot_op * cp * T_room_op`` watts into the room node) is carried as a
constant nodal heat injection, so the discrete model keeps the pure
``x+ = A x + B u + E d`` form.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

N_WALLS = 4
N_STATES = N_WALLS + 1
ROOM = N_WALLS  # index of the room-air state
WALL_NAMES = ("n", "e", "s", "w")


class ModelError(ValueError):
    """Invalid physical parameters or inconsistent dimensions."""


@dataclass(frozen=True)
class HvacParams:
    cp: float = 1005.0            # J/(kg K)
    T_in_heat: float = 40.0       # supply air temperature, degC
    delta_p: float = 500.0        # fan pressure rise, Pa
    air_density: float = 1.2      # kg/m^3
    mdot_max: float = 0.2         # kg/s
    mdot_min: float = 0.0         # kg/s

    def __post_init__(self):
        if not self.cp > 0 or not self.air_density > 0:
            raise ModelError("cp and air_density must be positive")
        if self.delta_p < 0:
            raise ModelError("delta_p must be non-negative")
        if not 0 <= self.mdot_min <= self.mdot_max:
            raise ModelError("need 0 <= mdot_min <= mdot_max")


def _vec4(name, v):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (N_WALLS,):
        raise ModelError(f"{name} needs {N_WALLS} values, got {a.size}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RoomThermalParams:
    wall_capacitance: np.ndarray   # J/K, per wall
    room_capacitance: float        # J/K
    r_out: np.ndarray              # K/W, wall to ambient
    r_in: np.ndarray               # K/W, wall to room air
    solar_gain_coeff: np.ndarray   # m^2 equivalent absorbing area, per wall

    def __post_init__(self):
        for name in ("wall_capacitance", "r_out", "r_in", "solar_gain_coeff"):
            object.__setattr__(self, name, _vec4(name, getattr(self, name)))
        if np.any(self.wall_capacitance <= 0) or not self.room_capacitance > 0:
            raise ModelError("capacitances must be positive")
        if np.any(self.r_out <= 0) or np.any(self.r_in <= 0):
            raise ModelError("resistances must be positive")
        if np.any(self.solar_gain_coeff < 0):
            raise ModelError("solar gain coefficients must be non-negative")

    @property
    def capacitances(self):
        return np.append(self.wall_capacitance, self.room_capacitance)


@dataclass(frozen=True)
class Comfort:
    """Per-state temperature band; use +/-inf for unconstrained states."""

    x_minus: np.ndarray
    x_plus: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.x_minus, dtype=float).reshape(-1)
        hi = np.asarray(self.x_plus, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ModelError("comfort bounds must have equal length")
        active = np.isfinite(lo) & np.isfinite(hi)
        if np.any(lo[active] > hi[active]):
            raise ModelError("x_minus must not exceed x_plus")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "x_minus", lo)
        object.__setattr__(self, "x_plus", hi)

    @classmethod
    def room_band(cls, lower, upper):
        lo = np.full(N_STATES, -np.inf)
        hi = np.full(N_STATES, np.inf)
        lo[ROOM], hi[ROOM] = lower, upper
        return cls(lo, hi)

    @property
    def bounded_states(self):
        """State indices with at least one finite bound."""
        return np.flatnonzero(np.isfinite(self.x_minus) | np.isfinite(self.x_plus))

    def midpoint(self):
        return 0.5 * (self.x_minus[ROOM] + self.x_plus[ROOM])


@dataclass(frozen=True)
class DisturbanceProfile:
    """Per-step ambient temperature (degC), solar irradiance per wall (W/m^2)
    and internal gains (W)."""

    ambient_temp: np.ndarray
    solar: np.ndarray
    internal_gains: np.ndarray

    def __post_init__(self):
        amb = np.asarray(self.ambient_temp, dtype=float).reshape(-1)
        sol = np.asarray(self.solar, dtype=float).reshape(-1, N_WALLS)
        gains = np.asarray(self.internal_gains, dtype=float).reshape(-1)
        if not amb.shape[0] == sol.shape[0] == gains.shape[0]:
            raise ModelError("disturbance series must have identical length")
        if np.any(sol < 0):
            raise ModelError("solar irradiance must be non-negative")
        for a in (amb, sol, gains):
            a.setflags(write=False)
        object.__setattr__(self, "ambient_temp", amb)
        object.__setattr__(self, "solar", sol)
        object.__setattr__(self, "internal_gains", gains)

    def __len__(self):
        return self.ambient_temp.shape[0]

    def sample(self, k):
        """Row ``k`` as ``[ambient, solar_n, solar_e, solar_s, solar_w, internal]``."""
        return np.concatenate(([self.ambient_temp[k]], self.solar[k], [self.internal_gains[k]]))

    def scaled(self, factor):
        """Scale the heat-gain series (solar, internal); ambient is shared."""
        return DisturbanceProfile(self.ambient_temp, self.solar * factor,
                                  self.internal_gains * factor)

    def window(self, start, stop):
        return DisturbanceProfile(self.ambient_temp[start:stop], self.solar[start:stop],
                                  self.internal_gains[start:stop])

    @classmethod
    def zeros(cls, N):
        return cls(np.zeros(N), np.zeros((N, N_WALLS)), np.zeros(N))


def hvac_power(mdot, T_room, hvac):
    """Heating and fan power (W) drawn at mass flow ``mdot`` (kg/s)."""
    if np.any(np.asarray(mdot) < 0):
        raise ModelError("mass flow must be non-negative")
    p_heat = mdot * hvac.cp * (hvac.T_in_heat - T_room)
    p_fan = mdot * hvac.delta_p / hvac.air_density
    return p_heat, p_fan


def nodal_heat(d, thermal):
    """Map a raw disturbance sample to the heat injected at each node (W).

    Walls get ``T_amb / r_out + solar_coeff * irradiance``; the room node gets
    the internal gains.
    """
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != N_WALLS + 2:
        raise ModelError(f"disturbance sample needs {N_WALLS + 2} entries")
    amb = d[..., :1]
    solar = d[..., 1:1 + N_WALLS]
    walls = amb / thermal.r_out + thermal.solar_gain_coeff * solar
    return np.concatenate((walls, d[..., -1:]), axis=-1)


def nonlinear_derivative(x, mdot, d, thermal, hvac):
    """Time derivative (degC/s) of the five node temperatures."""
    x = np.asarray(x, dtype=float)
    if x.shape != (N_STATES,):
        raise ModelError(f"state must have length {N_STATES}")
    tw = x[:N_WALLS]
    tr = x[ROOM]
    q = nodal_heat(d, thermal)
    g_in = 1.0 / thermal.r_in
    g_out = 1.0 / thermal.r_out
    dw = (-g_out * tw + g_in * (tr - tw) + q[:N_WALLS]) / thermal.wall_capacitance
    dr = (np.sum(g_in * (tw - tr)) + mdot * hvac.cp * (hvac.T_in_heat - tr) + q[ROOM]) \
        / thermal.room_capacitance
    return np.append(dw, dr)


def linearize(thermal, hvac, T_room_op, mdot_op):
    """Jacobians of ``nonlinear_derivative`` at (T_room_op, mdot_op).

    Returns ``(A_c, B_c, E_c)`` where ``E_c`` acts on nodal heat injections
    (see ``nodal_heat``).  Use ``linearization_offset`` for the constant term.
    """
    if not hvac.mdot_min <= mdot_op <= hvac.mdot_max:
        raise ModelError("mdot_op outside actuator range")
    C = thermal.capacitances
    g_in = 1.0 / thermal.r_in
    g_out = 1.0 / thermal.r_out
    A = np.zeros((N_STATES, N_STATES))
    for i in range(N_WALLS):
        A[i, i] = -(g_out[i] + g_in[i]) / C[i]
        A[i, ROOM] = g_in[i] / C[i]
        A[ROOM, i] = g_in[i] / C[ROOM]
    A[ROOM, ROOM] = -(np.sum(g_in) + mdot_op * hvac.cp) / C[ROOM]
    B = np.zeros((N_STATES, 1))
    B[ROOM, 0] = hvac.cp * (hvac.T_in_heat - T_room_op) / C[ROOM]
    E = np.diag(1.0 / C)
    return A, B, E


def linearization_offset(hvac, T_room_op, mdot_op):
    """Nodal heat (W) that closes the Taylor expansion at the operating point."""
    w = np.zeros(N_STATES)
    w[ROOM] = mdot_op * hvac.cp * T_room_op
    return w


def discretize(A_c, B_c, E_c, dt):
    """Exact zero-order-hold discretization via one augmented matrix exponential."""
    if not dt > 0:
        raise ModelError("dt must be positive")
    A_c, B_c, E_c = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A_c, B_c, E_c))
    n, nu, nd = A_c.shape[0], B_c.shape[1], E_c.shape[1]
    M = np.zeros((n + nu + nd, n + nu + nd))
    M[:n, :n] = A_c
    M[:n, n:n + nu] = B_c
    M[:n, n + nu:] = E_c
    if not np.all(np.isfinite(M)):
        raise ModelError("non-finite entries in continuous-time matrices")
    Md = expm(M * dt)
    if not np.all(np.isfinite(Md)):
        raise ModelError("matrix exponential overflowed")
    return Md[:n, :n], Md[:n, n:n + nu], Md[:n, n + nu:]


@dataclass(frozen=True)
class RoomModel:
    hvac: HvacParams
    thermal: RoomThermalParams
    comfort: Comfort
    dt: float
    T_room_op: float
    mdot_op: float
    A_c: np.ndarray = field(repr=False)
    B_c: np.ndarray = field(repr=False)
    E_c: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)

    @property
    def n(self):
        return N_STATES

    @property
    def linearization_point(self):
        return self.T_room_op, self.mdot_op

    @property
    def power_conversion(self):
        """Electrical kW per kg/s of supply air, with heat power linearized at T_room_op."""
        h = self.hvac
        return (h.cp * (h.T_in_heat - self.T_room_op) / 1000.0
                + h.delta_p / (h.air_density * 1000.0))

    def disturbance_inputs(self, profile):
        """Disturbance vectors fed to ``E``, one row per step (W per node).

        Includes the linearization offset.
        """
        samples = np.column_stack((profile.ambient_temp, profile.solar, profile.internal_gains))
        return nodal_heat(samples, self.thermal) + linearization_offset(
            self.hvac, self.T_room_op, self.mdot_op)

    def step(self, x, mdot, d_input):
        return self.A @ x + self.B[:, 0] * mdot + self.E @ d_input


def build_room_model(hvac, thermal, comfort, dt=1800.0, T_room_op=None, mdot_op=None):
    """Linearize and discretize a room.

    ``T_room_op`` defaults to the middle of the room comfort band and ``mdot_op``
    to half the maximum flow, raised to ``mdot_min`` when that is larger.
    """
    if len(comfort.x_minus) != N_STATES:
        raise ModelError(f"comfort bounds need {N_STATES} entries")
    if T_room_op is None:
        T_room_op = comfort.midpoint()
    if mdot_op is None:
        mdot_op = min(max(hvac.mdot_max / 2.0, hvac.mdot_min), hvac.mdot_max)
    A_c, B_c, E_c = linearize(thermal, hvac, T_room_op, mdot_op)
    A, B, E = discretize(A_c, B_c, E_c, dt)
    mats = [A_c, B_c, E_c, A, B, E]
    for M in mats:
        M.setflags(write=False)
    return RoomModel(hvac, thermal, comfort, float(dt), float(T_room_op), float(mdot_op), *mats)


@dataclass(frozen=True)
class RuleBasedTrace:
    temperatures: np.ndarray   # (N+1, n) degC
    mdot: np.ndarray           # (N,) kg/s
    power: np.ndarray          # (N,) W, heating + fan


def simulate_rule_based(model, profile, T_max_setpoint, rated_mdot, x0=None):
    """Thermostat run: rated flow while the room is below the set-point, else minimum flow.

    The discrete linear model propagates the state; power is evaluated with the
    nonlinear expressions at the start-of-step room temperature.
    """
    hvac = model.hvac
    rated = float(np.clip(rated_mdot, hvac.mdot_min, hvac.mdot_max))
    N = len(profile)
    x = np.full(N_STATES, model.comfort.midpoint()) if x0 is None else np.asarray(x0, float)
    if x.shape != (N_STATES,):
        raise ModelError(f"x0 must have length {N_STATES}")
    d_in = model.disturbance_inputs(profile)
    temps = np.empty((N + 1, N_STATES))
    temps[0] = x
    flows = np.empty(N)
    power = np.empty(N)
    for k in range(N):
        tr = x[ROOM]
        m = rated if tr < T_max_setpoint else hvac.mdot_min
        p_heat, p_fan = hvac_power(m, tr, hvac)
        flows[k] = m
        power[k] = p_heat + p_fan
        x = model.step(x, m, d_in[k])
        temps[k + 1] = x
    return RuleBasedTrace(temps, flows, power)


def default_thermal_params():
    return RoomThermalParams(
        wall_capacitance=[5.0e5] * 4,
        room_capacitance=5.0e6,  # air plus furnishings
        r_out=[0.04] * 4,
        r_in=[0.005] * 4,
        solar_gain_coeff=[0.2, 0.6, 0.8, 0.6],
    )
