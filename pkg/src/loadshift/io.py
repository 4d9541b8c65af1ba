"""Configuration files, CSV ingestion and report emission.

Every CSV written here starts with one ``#`` metadata line carrying the
config hash and seed; numbers are emitted at 6 significant digits.
"""

import configparser
import csv
import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import Case, PerturbationMode, SweepSpec
from .scheduler import CurtailmentSign, PriceProfile, SchedulerConfig
from .thermal import (N_STATES, N_WALLS, ROOM, Comfort, DisturbanceProfile, HvacParams,
                      ModelError, RoomThermalParams, build_room_model)

log = logging.getLogger(__name__)

PRICE_HEADER = ("period", "energy_sgd_per_kwh", "reserve_sgd_per_kwh")
DISTURBANCE_HEADER = ("step", "ambient_c", "solar_n", "solar_e", "solar_s", "solar_w",
                      "internal_w")
DATA_DIR = Path(__file__).parent / "data"


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def fmt(v):
    return f"{float(v):.6g}"


def config_hash(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def metadata_line(cfg_hash, seed):
    return f"# loadshift config_hash={cfg_hash} seed={seed}\n"


def write_csv(path, header, rows, cfg_hash, seed):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(metadata_line(cfg_hash, seed))
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _read_rows(path):
    """Header and data rows of a CSV, skipping ``#`` comment lines."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with open(path, newline="") as f:
        lines = [ln for ln in f if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    return header, [[c.strip() for c in r] for r in rows[1:]]


def _floats(path, row_no, cells):
    try:
        return [float(c) for c in cells]
    except ValueError:
        raise InputError(f"{path}: row {row_no}: non-numeric value in {cells}") from None


def ingest_prices(path, dt=1800.0):
    """Read a price CSV; a missing reserve column means zero reserve prices."""
    header, rows = _read_rows(path)
    if header[:2] != list(PRICE_HEADER[:2]):
        raise InputError(f"{path}: header must start with {','.join(PRICE_HEADER[:2])}")
    has_reserve = len(header) > 2
    if has_reserve and header != list(PRICE_HEADER):
        raise InputError(f"{path}: unexpected header {header}")
    if not has_reserve:
        warnings.warn(f"{path}: no reserve column; reserve prices set to zero",
                      UserWarning, stacklevel=2)
    width = len(header)
    energy, reserve = [], []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {i}: expected {width} fields, got {len(row)}")
        vals = _floats(path, i, row)
        if not np.isfinite(vals).all():
            raise InputError(f"{path}: row {i}: non-finite value")
        if vals[1] <= 0:
            raise InputError(f"{path}: row {i}: energy price must be positive")
        if has_reserve and vals[2] < 0:
            raise InputError(f"{path}: row {i}: reserve price must be non-negative")
        energy.append(vals[1])
        reserve.append(vals[2] if has_reserve else 0.0)
    if not energy:
        raise InputError(f"{path}: no price rows")
    return PriceProfile(np.array(energy), np.array(reserve), dt)


def ingest_disturbance(path):
    header, rows = _read_rows(path)
    if header != list(DISTURBANCE_HEADER):
        raise InputError(f"{path}: header must be {','.join(DISTURBANCE_HEADER)}")
    data = []
    for i, row in enumerate(rows):
        if len(row) != len(DISTURBANCE_HEADER):
            raise InputError(f"{path}: row {i}: expected {len(DISTURBANCE_HEADER)} fields")
        vals = _floats(path, i, row)
        if not np.isfinite(vals).all():
            raise InputError(f"{path}: row {i}: non-finite value")
        if min(vals[2:6]) < 0:
            raise InputError(f"{path}: row {i}: negative solar irradiance")
        data.append(vals)
    if not data:
        raise InputError(f"{path}: no disturbance rows")
    a = np.array(data)
    return DisturbanceProfile(a[:, 1], a[:, 2:6], a[:, 6])


def emit_prices(prices, path, cfg_hash="-", seed="-"):
    rows = ((k, float(e), float(r)) for k, (e, r) in enumerate(zip(prices.energy, prices.reserve)))
    return write_csv(path, PRICE_HEADER, rows, cfg_hash, seed)


def emit_disturbance(profile, path, cfg_hash="-", seed="-"):
    rows = ((k, float(profile.ambient_temp[k]), *map(float, profile.solar[k]),
             float(profile.internal_gains[k])) for k in range(len(profile)))
    return write_csv(path, DISTURBANCE_HEADER, rows, cfg_hash, seed)


# -- room and run configuration ------------------------------------------------

def _get_list(sec, key, n=None, default=None):
    if key not in sec:
        if default is None:
            raise InputError(f"[{sec.name}] missing key {key}")
        return default
    try:
        vals = [float(v) for v in sec[key].replace(",", " ").split()]
    except ValueError:
        raise InputError(f"[{sec.name}] {key}: expected numbers, got {sec[key]!r}") from None
    if n is not None:
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            raise InputError(f"[{sec.name}] {key}: expected {n} values")
    return vals


def _get_float(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise InputError(f"[{sec.name}] missing key {key}")
        return default
    try:
        return sec.getfloat(key)
    except ValueError:
        raise InputError(f"[{sec.name}] {key}: expected a number, got {sec[key]!r}") from None


def _parser(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    return cp


def _section(cp, name, path):
    if not cp.has_section(name):
        raise InputError(f"{path}: missing section [{name}]")
    return cp[name]


def load_room(path):
    """Room model from an INI file with [hvac], [thermal], [comfort], [discretization]."""
    cp = _parser(path)
    h = _section(cp, "hvac", path)
    t = _section(cp, "thermal", path)
    c = _section(cp, "comfort", path)
    d = _section(cp, "discretization", path)
    try:
        hvac = HvacParams(
            cp=_get_float(h, "cp_j_per_kgk", 1005.0),
            T_in_heat=_get_float(h, "t_in_heat_c", 40.0),
            delta_p=_get_float(h, "delta_p_pa", 500.0),
            air_density=_get_float(h, "air_density_kg_per_m3", 1.2),
            mdot_max=_get_float(h, "mdot_max_kgps"),
            mdot_min=_get_float(h, "mdot_min_kgps", 0.0),
        )
        thermal = RoomThermalParams(
            wall_capacitance=_get_list(t, "wall_capacitance_j_per_k", N_WALLS),
            room_capacitance=_get_float(t, "room_capacitance_j_per_k"),
            r_out=_get_list(t, "r_out_k_per_w", N_WALLS),
            r_in=_get_list(t, "r_in_k_per_w", N_WALLS),
            solar_gain_coeff=_get_list(t, "solar_gain_coeff_m2", N_WALLS),
        )
        lo = np.full(N_STATES, -np.inf)
        hi = np.full(N_STATES, np.inf)
        lo[ROOM] = _get_float(c, "room_lower_c")
        hi[ROOM] = _get_float(c, "room_upper_c")
        if "wall_lower_c" in c:
            lo[:N_WALLS] = _get_float(c, "wall_lower_c")
        if "wall_upper_c" in c:
            hi[:N_WALLS] = _get_float(c, "wall_upper_c")
        comfort = Comfort(lo, hi)
        t_op = _get_float(d, "t_room_op_c", np.nan)
        m_op = _get_float(d, "mdot_op_kgps", np.nan)
        return build_room_model(hvac, thermal, comfort, _get_float(d, "dt_s", 1800.0),
                                None if np.isnan(t_op) else t_op,
                                None if np.isnan(m_op) else m_op)
    except ModelError as exc:
        raise InputError(f"{path}: {exc}") from None


@dataclass
class RunConfig:
    model_path: Path
    prices_path: Path
    disturbance_path: Path
    output_dir: Path
    floors: int = 1
    rooms_per_floor: int = 1
    seed: int = 0
    participation: tuple | None = None      # per floor; None means every floor
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    rp_scenario: float = 25.0
    day_length: int = 48
    source_hash: str = "-"

    def model(self):
        return load_room(self.model_path)

    def prices(self):
        return ingest_prices(self.prices_path, self.model().dt)

    def disturbance(self):
        return ingest_disturbance(self.disturbance_path)


def _parse_steps(text):
    text = text.strip().lower()
    if text in ("", "all"):
        return None
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise InputError(f"[sweep] steps: expected 'all' or integers, got {text!r}") from None


def load_run_config(path):
    """Run configuration; relative paths resolve against the config file's folder."""
    path = Path(path)
    cp = _parser(path)
    base = path.parent
    run = _section(cp, "run", path)

    def resolve(key, default=None):
        if key not in run:
            if default is None:
                raise InputError(f"[run] missing key {key}")
            return Path(default)
        p = Path(run[key])
        return p if p.is_absolute() else base / p

    b = cp["building"] if cp.has_section("building") else {}
    s = cp["scheduler"] if cp.has_section("scheduler") else None
    w = cp["sweep"] if cp.has_section("sweep") else None
    try:
        floors = int(b.get("floors", 1))
        rooms = int(b.get("rooms_per_floor", 1))
        seed = int(b.get("seed", 0))
        part = b.get("participation", "all").strip().lower()
        participation = None if part == "all" else tuple(
            bool(int(v)) for v in part.replace(",", " ").split())
        if participation is not None and len(participation) != floors:
            raise InputError(f"[building] participation needs {floors} entries")
        sched = SchedulerConfig()
        if s is not None:
            eta = s.get("eta_sgd_per_kwh", "auto").strip().lower()
            sched = SchedulerConfig(
                comfort_penalty=_get_float(s, "rho_sgd_per_degc_period", 1000.0),
                reserve_tiebreak=None if eta == "auto" else float(eta),
                curtailment_sign=CurtailmentSign(s.get("curtailment_sign", "physical").strip()),
                tol_feas=_get_float(s, "tol_feas", 1e-8),
                tol_opt=_get_float(s, "tol_opt", 1e-9),
            )
        spec = SweepSpec()
        rp_scenario, day_length = 25.0, 48
        if w is not None:
            scen = _get_list(w, "scenarios_pct", default=list(spec.scenarios))
            cases = [c.strip() for c in w.get("cases", "Case1,Case2,Case3").split(",") if c.strip()]
            spec = SweepSpec(tuple(scen), tuple(Case(c) for c in cases),
                             PerturbationMode(w.get("mode", "single_step").strip()),
                             _parse_steps(w.get("steps", "all")))
            rp_scenario = _get_float(w, "rp_scenario_pct", 25.0)
            day_length = int(w.get("day_length", 48))
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    cfg = RunConfig(
        model_path=resolve("model"),
        prices_path=resolve("prices"),
        disturbance_path=resolve("disturbance"),
        output_dir=resolve("output_dir", base / "out"),
        floors=floors, rooms_per_floor=rooms, seed=seed, participation=participation,
        scheduler=sched, sweep=spec, rp_scenario=rp_scenario, day_length=day_length,
    )
    for p in (cfg.model_path, cfg.prices_path, cfg.disturbance_path):
        if not p.is_file():
            raise InputError(f"{path}: referenced file {p} does not exist")
    cfg.source_hash = config_hash(path.read_bytes(), cfg.model_path.read_bytes(),
                                  cfg.prices_path.read_bytes(), cfg.disturbance_path.read_bytes())
    return cfg


# -- synthetic data -------------------------------------------------------------

def gen_synthetic(days, seed, rp_range=(0.2, 1.4), steps_per_day=48):
    """Seeded price and disturbance series for ``days`` days.

    Energy prices follow a smooth double-peak daily shape with noise; reserve
    prices are energy prices times a per-step ratio drawn across ``rp_range``
    with both endpoints attained.  The disturbance is a cool-climate day with
    a single midday solar bump and office-hour internal gains.

    Returns:
        (PriceProfile, DisturbanceProfile)
    """
    if days < 1:
        raise InputError("days must be at least 1")
    rp_range = tuple(float(v) for v in rp_range)
    if len(rp_range) != 2:
        raise InputError("rp_range needs exactly two values")
    lo, hi = sorted(rp_range)
    if lo < 0:
        raise InputError("rp_range must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    N = days * steps_per_day
    hours = (np.arange(N) % steps_per_day) * 24.0 / steps_per_day
    shape = (0.03 * np.exp(-0.5 * ((hours - 9.5) / 1.8) ** 2)
             + 0.04 * np.exp(-0.5 * ((hours - 19.0) / 2.0) ** 2))
    energy = 0.095 + shape + rng.normal(0.0, 0.003, N)
    energy = np.round(np.maximum(energy, 0.02), 5)
    if hi == lo:
        rp = np.full(N, lo)
    else:
        rp = rng.uniform(lo, hi, N)
        for d in range(days):
            # pin both endpoints in every day
            idx = rng.choice(steps_per_day, 2, replace=False) + d * steps_per_day
            rp[idx[0]], rp[idx[1]] = lo, hi
    reserve = np.array([float(fmt(v)) for v in energy * rp])

    day = np.repeat(np.arange(days), steps_per_day)
    amb = 6.0 + 4.0 * np.sin((hours - 9.0) / 24.0 * 2 * np.pi) + rng.normal(0.0, 1.5, days)[day]
    sun = np.clip(np.sin((hours - 6.0) / 12.0 * np.pi), 0.0, None)
    sun *= 450.0 * rng.uniform(0.6, 1.0, days)[day]
    solar = np.column_stack((0.3 * sun,
                             sun * np.clip(1.2 - hours / 12.0, 0.2, 1.0),
                             sun,
                             sun * np.clip(hours / 12.0 - 0.2, 0.2, 1.0)))
    office = (hours >= 8.0) & (hours < 18.0)
    gains = np.where(office, 400.0, 120.0)
    to6 = np.vectorize(lambda v: float(fmt(v)))
    prices = PriceProfile(energy, reserve)
    profile = DisturbanceProfile(to6(amb), to6(solar), to6(gains))
    return prices, profile


def write_synthetic(days, seed, rp_range, out_dir):
    """Emit ``prices.csv`` and ``disturbance.csv``; returns their paths."""
    prices, profile = gen_synthetic(days, seed, rp_range)
    h = config_hash("gen-synthetic", days, seed, tuple(rp_range))
    out_dir = Path(out_dir)
    return (emit_prices(prices, out_dir / "prices.csv", h, seed),
            emit_disturbance(profile, out_dir / "disturbance.csv", h, seed))


# -- reports -------------------------------------------------------------------

def write_schedule(sol, kappa, path, cfg_hash, seed):
    rows = []
    for k in range(sol.N):
        for i in range(sol.n_br):
            rows.append((k, i, float(sol.u[k, i]), float(sol.r[k, i]),
                         float(sol.eps[k, i]), float(kappa * sol.u[k, i])))
    return write_csv(path, ("step", "room", "u_kgps", "r_kgps", "eps_c", "power_kw"),
                     rows, cfg_hash, seed)


def write_summary(sol, path, cfg_hash, seed, extra=None):
    data = {
        "config_hash": cfg_hash,
        "seed": seed,
        "status": sol.status.value,
        "objective_sgd": float(fmt(sol.objective)),
        "energy_cost_sgd": float(fmt(sol.energy_cost)),
        "reserve_revenue_sgd": float(fmt(sol.reserve_revenue)),
        "penalty_cost_sgd": float(fmt(sol.penalty_cost)),
        "max_comfort_violation_c": float(fmt(sol.eps.max())),
        "max_constraint_violation": float(fmt(sol.max_constraint_violation)),
        "iterations": sol.iterations,
    }
    data.update(extra or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_lsp(report, path, cfg_hash, seed):
    rows = []
    for case, L in report.lsp.items():
        for s_i, p in enumerate(report.scenarios):
            for k_i, k in enumerate(report.steps):
                rows.append((Case(case).value, float(p), int(k), float(L[s_i, k_i])))
    return write_csv(path, ("case", "scenario_pct", "step", "lsp_kw"), rows, cfg_hash, seed)


def write_demand_curves(curves, path, cfg_hash, seed):
    """One fit row per (case, step) followed by its point rows."""
    rows = []
    for c in curves:
        rows.append(("fit", c.case.value, c.step, float(c.a1), float(c.a0), float(c.rmse),
                     int(c.degenerate), "", ""))
        for x, y in c.points:
            rows.append(("point", c.case.value, c.step, "", "", "", "", float(x), float(y)))
    return write_csv(path, ("row", "case", "step", "a1", "a0", "rmse", "degenerate",
                            "power_kw", "price_sgd_per_kwh"), rows, cfg_hash, seed)


def write_rp_fit(study, path, cfg_hash, seed):
    rows = [("point", i, float(rp), float(dl), int(reg), "", "")
            for i, (rp, dl, reg) in enumerate(zip(study.rp, study.delta_lsp, study.region))]
    if study.fit is not None:
        rows.append(("fit", "", "", "", 1, float(study.fit.slope), float(study.fit.intercept)))
    return write_csv(path, ("row", "step", "rp", "delta_lsp_kw", "region", "slope", "intercept"),
                     rows, cfg_hash, seed)
