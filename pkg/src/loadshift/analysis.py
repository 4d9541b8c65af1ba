"""Load-shifting potential (LSP) sweeps, demand curves and relative-price study.

The LSP of market period ``k`` under a ``p`` percent perturbation is the drop
in total building power at ``k`` when the step-``k`` energy price moves from
``(1 - p/100)`` to ``(1 + p/100)`` of its case value:

    LSP_k(p) = P_k(price * (1 - p)) - P_k(price * (1 + p))      [kW]
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .scheduler import (PriceProfile, RoomSolver, ScheduleError, _map, _warn_reserve,
                        check_penalty)

log = logging.getLogger(__name__)

DEFAULT_SCENARIOS = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
TOL_SAT = 0.01
REGION1 = (0.5, 1.0)


class Case(str, Enum):
    CASE1 = "Case1"  # flat mean energy price, no reserve
    CASE2 = "Case2"  # time-varying energy price, no reserve
    CASE3 = "Case3"  # time-varying energy and reserve prices


class PerturbationMode(str, Enum):
    SINGLE_STEP = "single_step"
    WHOLE_PROFILE = "whole_profile"


class AnalysisError(ValueError):
    """Invalid sweep request or an analysis that cannot be carried out."""


@dataclass(frozen=True)
class SweepSpec:
    scenarios: tuple = DEFAULT_SCENARIOS   # perturbation magnitudes, percent; each used as +/-
    cases: tuple = (Case.CASE1, Case.CASE2, Case.CASE3)
    perturbation_mode: PerturbationMode = PerturbationMode.SINGLE_STEP
    steps: tuple | None = None             # None: every market period

    def __post_init__(self):
        scen = tuple(float(abs(p)) for p in self.scenarios)
        if not scen:
            raise AnalysisError("scenario list is empty")
        if any(p == 0 for p in scen):
            raise AnalysisError("perturbation percentiles must be nonzero")
        if len(set(scen)) != len(scen):
            raise AnalysisError("perturbation percentiles must be distinct")
        if any(p >= 100 for p in scen):
            raise AnalysisError("perturbations must stay below 100%")
        cases = tuple(Case(c) for c in self.cases)
        if not cases:
            raise AnalysisError("case list is empty")
        object.__setattr__(self, "scenarios", tuple(sorted(scen)))
        object.__setattr__(self, "cases", cases)
        object.__setattr__(self, "perturbation_mode", PerturbationMode(self.perturbation_mode))
        if self.steps is not None:
            object.__setattr__(self, "steps", tuple(int(k) for k in self.steps))

    def step_list(self, N):
        steps = range(N) if self.steps is None else self.steps
        out = np.array(sorted(set(steps)), dtype=int)
        if out.size == 0 or out.min() < 0 or out.max() >= N:
            raise AnalysisError(f"steps must lie in [0, {N})")
        return out


def make_case_prices(base, case):
    case = Case(case)
    if case is Case.CASE1:
        flat = np.full(base.N, float(np.mean(base.energy)))
        return PriceProfile(flat, np.zeros(base.N), base.dt)
    if case is Case.CASE2:
        return PriceProfile(base.energy, np.zeros(base.N), base.dt)
    return base


def perturb(prices, step, percent, mode=PerturbationMode.SINGLE_STEP):
    """Scale energy price(s) by ``1 + percent/100``; reserve prices untouched."""
    if not percent > -100:
        raise AnalysisError("percent must exceed -100")
    if not 0 <= step < prices.N:
        raise AnalysisError(f"step {step} outside horizon {prices.N}")
    factor = 1.0 + percent / 100.0
    energy = np.array(prices.energy)
    if PerturbationMode(mode) is PerturbationMode.SINGLE_STEP:
        energy[step] *= factor
    else:
        energy *= factor
    return PriceProfile(energy, prices.reserve, prices.dt)


@dataclass
class SweepResult:
    """Total building power under every perturbation of a sweep.

    ``step_power[case]`` has shape (n_scenarios, 2, n_steps): power (kW) at
    each perturbed step; along axis 1, 0 is the price cut and 1 the price
    rise.  ``base_power[case]`` is the unperturbed (N,) power profile.
    """

    spec: SweepSpec
    steps: np.ndarray
    case_prices: dict
    base_power: dict
    step_power: dict
    lp_count: int = 0
    kappa: float = 0.0

    def lsp(self, case):
        P = self.step_power[Case(case)]
        return P[:, 0, :] - P[:, 1, :]


def _solve(solver, i, c, case, scenario, step):
    try:
        return solver.solve_room(i, c)
    except ScheduleError as exc:
        raise ScheduleError(f"{case.value}, scenario {scenario}%, step {step}: {exc}") from exc


def _room_sweep(solver, i, spec, steps, case_prices):
    """All LPs of one room; returns per-case (base u, step u) and LP count."""
    view = solver.views[i]
    t = solver.template(view.participates)
    scale = solver.room.power_conversion * next(iter(case_prices.values())).dt / 3600.0
    out = {}
    count = 0
    for case, prices in case_prices.items():
        c0 = solver.costs(prices, view.participates)
        base = _solve(solver, i, c0, case, 0, "all")
        count += 1
        u_base = base.z.reshape(solver.N, 3)[:, 0].copy()
        u_step = np.empty((len(spec.scenarios), 2, len(steps)))
        if spec.perturbation_mode is PerturbationMode.SINGLE_STEP:
            for s_i, p in enumerate(spec.scenarios):
                for sign_i, sgn in enumerate((-1.0, 1.0)):
                    for k_i, k in enumerate(steps):
                        c = c0.copy()
                        c[t.u_index(k)] = prices.energy[k] * (1.0 + sgn * p / 100.0) * scale
                        sol = _solve(solver, i, c, case, sgn * p, k)
                        count += 1
                        u_step[s_i, sign_i, k_i] = sol.z[t.u_index(k)]
        else:
            u_cols = np.array([t.u_index(k) for k in range(solver.N)])
            for s_i, p in enumerate(spec.scenarios):
                for sign_i, sgn in enumerate((-1.0, 1.0)):
                    c = c0.copy()
                    c[u_cols] *= 1.0 + sgn * p / 100.0
                    sol = _solve(solver, i, c, case, sgn * p, "all")
                    count += 1
                    u_step[s_i, sign_i, :] = sol.z[u_cols][steps]
        out[case] = (u_base, u_step)
    return out, count


def run_sweep(building, base_prices, spec, cfg, x0=None, profile=None, solver=None):
    """Solve every (case, scenario, sign, step) perturbation for every room."""
    steps = spec.step_list(base_prices.N)
    case_prices = {case: make_case_prices(base_prices, case) for case in spec.cases}
    for prices in case_prices.values():
        check_penalty(cfg, prices, building.room)
    if Case.CASE3 in case_prices:
        _warn_reserve(building, case_prices[Case.CASE3])
    if solver is None:
        if profile is None:
            raise AnalysisError("need a disturbance profile")
        solver = RoomSolver(building, profile, cfg, x0, base_prices.N)
    results = _map(lambda i: _room_sweep(solver, i, spec, steps, case_prices),
                   range(building.n_br), cfg.workers)
    kappa = building.room.power_conversion
    base_power, step_power = {}, {}
    for case in case_prices:
        # merge in room order so totals do not depend on scheduling
        ub = np.zeros(base_prices.N)
        us = np.zeros((len(spec.scenarios), 2, len(steps)))
        for res, _ in results:
            ub += res[case][0]
            us += res[case][1]
        base_power[case] = kappa * ub
        step_power[case] = kappa * us
    return SweepResult(spec, steps, case_prices, base_power, step_power,
                       lp_count=sum(c for _, c in results), kappa=kappa)


@dataclass
class LSPReport:
    scenarios: tuple
    steps: np.ndarray
    lsp: dict                                   # case -> (n_scenarios, n_steps) kW
    saturation_scenario: dict = field(default_factory=dict)  # case -> 1-based scenario number
    delta_lsp: np.ndarray | None = None         # (n_steps,) kW, Case2 - Case3
    rp: np.ndarray | None = None
    region: np.ndarray | None = None
    region1_fit: tuple | None = None            # (slope, intercept)


def compute_lsp(building, base_prices, spec, cfg, x0=None, profile=None, sweep=None):
    """LSP for every case, scenario and step, plus the saturation scenario of each case."""
    if sweep is None:
        sweep = run_sweep(building, base_prices, spec, cfg, x0, profile)
    lsp = {case: sweep.lsp(case) for case in spec.cases}
    sat = {case: detect_saturation(v) for case, v in lsp.items()}
    return LSPReport(spec.scenarios, sweep.steps, lsp, sat)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    rmse: float
    degenerate: bool = False


def fit_line(x, y):
    """Ordinary least squares ``y = slope * x + intercept``.

    A constant ``x`` gives slope 0 and the mean of ``y``, flagged degenerate.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size != y.size or x.size == 0:
        raise AnalysisError("need matching, non-empty x and y")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 1e-24 * max(1.0, float(np.sum(x * x))):
        return LineFit(0.0, float(ym), float(np.sqrt(np.mean((y - ym) ** 2))), True)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    return LineFit(slope, intercept, float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class DemandCurve:
    case: Case
    step: int
    a1: float          # SGD/kWh per kW
    a0: float          # SGD/kWh
    rmse: float
    points: np.ndarray  # (n, 2): consumption kW, price SGD/kWh
    degenerate: bool = False


def demand_curves(sweep, case):
    """Linear price-vs-consumption fits at every swept step of ``case``."""
    case = Case(case)
    prices = sweep.case_prices[case]
    P = sweep.step_power[case]
    curves = []
    for k_i, k in enumerate(sweep.steps):
        xs = [sweep.base_power[case][k]]
        ys = [prices.energy[k]]
        for s_i, p in enumerate(sweep.spec.scenarios):
            for sign_i, sgn in enumerate((-1.0, 1.0)):
                xs.append(P[s_i, sign_i, k_i])
                ys.append(prices.energy[k] * (1.0 + sgn * p / 100.0))
        pts = np.column_stack((xs, ys))
        order = np.lexsort((pts[:, 0], pts[:, 1]))
        pts = pts[order]
        fit = fit_line(pts[:, 0], pts[:, 1])
        curves.append(DemandCurve(case, int(k), fit.slope, fit.intercept, fit.rmse, pts,
                                  fit.degenerate))
    return curves


def fit_demand_curve(building, base_prices, case, step, spec, cfg, x0=None, profile=None):
    """Demand curve of one case at one market period."""
    if len(spec.scenarios) < 1:
        raise AnalysisError("need at least one scenario (three price levels)")
    one = SweepSpec(spec.scenarios, (case,), spec.perturbation_mode, (step,))
    sweep = run_sweep(building, base_prices, one, cfg, x0, profile)
    return demand_curves(sweep, case)[0]


def detect_saturation(lsp, tol_sat=TOL_SAT):
    """1-based number of the scenario after which mean LSP stops growing.

    ``lsp`` is (n_scenarios, n_steps) with scenarios in ascending order.  The
    result is the smallest ``s`` such that every later scenario raises the
    step-mean LSP by less than ``tol_sat`` relative to its predecessor; the
    last scenario when growth never ceases.
    """
    M = np.mean(np.atleast_2d(np.asarray(lsp, float)), axis=1)
    S = M.shape[0]
    small = np.ones(S, dtype=bool)  # small[t]: growth into scenario t is below tolerance
    for t in range(1, S):
        inc = M[t] - M[t - 1]
        ref = abs(M[t - 1])
        if inc <= 0:
            small[t] = True
        elif ref == 0:
            small[t] = inc <= 1e-12
        else:
            small[t] = inc / ref < tol_sat
    for s in range(S):
        if np.all(small[s + 1:]):
            return s + 1
    return S


def classify_region(rp):
    rp = np.asarray(rp, float)
    return np.where((rp >= REGION1[0]) & (rp <= REGION1[1]), 1, 2)


@dataclass
class RpStudy:
    rp: np.ndarray
    delta_lsp: np.ndarray
    region: np.ndarray
    lsp_case2: np.ndarray
    lsp_case3: np.ndarray
    scenario: float
    fit: LineFit | None
    days: int


def _rp_study(rp, l2, l3, scenario, days):
    delta = l2 - l3
    region = classify_region(rp)
    mask = region == 1
    fit = None
    if np.count_nonzero(mask) >= 2:
        fit = fit_line(rp[mask], delta[mask])
    else:
        log.warning("fewer than two region-1 points; region fit omitted")
    return RpStudy(rp, delta, region, l2, l3, float(scenario), fit, days)


def rp_from_sweep(sweep, scenario):
    """Relative-price study on the steps of an existing Case2/Case3 sweep."""
    for case in (Case.CASE2, Case.CASE3):
        if case not in sweep.step_power:
            raise AnalysisError(f"sweep lacks {case.value}")
    try:
        s_i = sweep.spec.scenarios.index(float(abs(scenario)))
    except ValueError:
        raise AnalysisError(f"scenario {scenario} was not swept") from None
    prices = sweep.case_prices[Case.CASE3]
    rp = prices.reserve[sweep.steps] / prices.energy[sweep.steps]
    return _rp_study(rp, sweep.lsp(Case.CASE2)[s_i], sweep.lsp(Case.CASE3)[s_i], scenario, 1)


def rp_analysis(building, prices_long, scenario, cfg, profile_long, x0=None,
                day_length=48, steps=None):
    """Change in LSP due to reserve provision against the reserve/energy price ratio.

    Each day of ``prices_long`` is solved independently from ``x0``; region 1
    points (0.5 <= rp <= 1) get an OLS line ``delta_lsp = slope * rp + intercept``.
    """
    N = prices_long.N
    if len(profile_long) != N:
        raise AnalysisError("price and disturbance series differ in length")
    if N % day_length:
        raise AnalysisError(f"series length {N} is not a whole number of {day_length}-step days")
    days = N // day_length
    spec = SweepSpec((scenario,), (Case.CASE2, Case.CASE3), PerturbationMode.SINGLE_STEP, steps)
    rp_all, d2, d3 = [], [], []
    for day in range(days):
        lo, hi = day * day_length, (day + 1) * day_length
        prices = prices_long.window(lo, hi)
        sweep = run_sweep(building, prices, spec, cfg, x0, profile_long.window(lo, hi))
        l2 = sweep.lsp(Case.CASE2)[0]
        l3 = sweep.lsp(Case.CASE3)[0]
        rp_all.append(prices.reserve[sweep.steps] / prices.energy[sweep.steps])
        d2.append(l2)
        d3.append(l3)
    return _rp_study(np.concatenate(rp_all), np.concatenate(d2), np.concatenate(d3),
                     scenario, days)
