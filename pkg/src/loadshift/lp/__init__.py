"""Dense linear programming: ``min c'z  s.t.  G z <= h,  lb <= z <= ub``.

The simplex kernel comes in two builds with the same algorithm: a compiled
Cython extension (``_simplex_ext``) and a numpy fallback (``_simplex_py``).
The compiled one is used when it imports; set ``LOADSHIFT_PURE_PYTHON=1`` to
force the fallback.
"""

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _simplex_py

try:
    if os.environ.get("LOADSHIFT_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _simplex_ext
except ImportError:
    _simplex_ext = None

BACKENDS = ("compiled", "python") if _simplex_ext is not None else ("python",)
DEFAULT_BACKEND = BACKENDS[0]

TOL_FEAS = 1e-8
TOL_OPT = 1e-9


class LpError(Exception):
    """Malformed problem data or a solver breakdown."""


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpProblem:
    """Inequality-form LP with variable bounds.

    ``lb`` may hold ``-inf`` and ``ub`` may hold ``+inf``; every other entry
    must be finite.
    """

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        for name in ("c", "G", "h", "lb", "ub"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        validate(self)

    @property
    def n_vars(self):
        return self.c.shape[0]

    @property
    def n_rows(self):
        return self.h.shape[0]


@dataclass
class LpSolution:
    status: Status
    z: np.ndarray
    objective: float
    iterations: int
    max_constraint_violation: float
    # phase-1 infeasibility sum, or unbounded entering-variable index
    certificate: float = 0.0
    backend: str = field(default=DEFAULT_BACKEND, repr=False)


def validate(p):
    n = p.c.shape[0]
    if p.c.ndim != 1:
        raise LpError("c must be a vector")
    if p.G.ndim != 2 or p.G.shape[1] != n:
        raise LpError(f"G must be (m, {n}), got {p.G.shape}")
    if p.h.shape != (p.G.shape[0],):
        raise LpError(f"h must have length {p.G.shape[0]}, got {p.h.shape}")
    if p.lb.shape != (n,) or p.ub.shape != (n,):
        raise LpError("bounds must match the number of variables")
    if not (np.all(np.isfinite(p.c)) and np.all(np.isfinite(p.G)) and np.all(np.isfinite(p.h))):
        raise LpError("non-finite entries in c, G or h")
    if np.any(np.isnan(p.lb)) or np.any(np.isnan(p.ub)):
        raise LpError("NaN bound")
    if np.any(p.lb == np.inf) or np.any(p.ub == -np.inf):
        raise LpError("lb cannot be +inf and ub cannot be -inf")
    if np.any(p.lb > p.ub):
        raise LpError("lb > ub")


def constraint_violation(p, z):
    """Largest violation of ``G z <= h`` and of the bounds at ``z``."""
    worst = 0.0
    if p.h.size:
        worst = max(worst, float(np.max(p.G @ z - p.h)))
    worst = max(worst, float(np.max(p.lb - z, initial=0.0)), float(np.max(z - p.ub, initial=0.0)))
    return max(worst, 0.0)


def solve_lp(p, tol_feas=TOL_FEAS, tol_opt=TOL_OPT, backend=None, max_iter=None):
    """Solve ``p`` with the two-phase bounded revised simplex.

    Args:
        p: the problem.
        tol_feas: primal feasibility tolerance.
        tol_opt: reduced-cost optimality tolerance.
        backend: ``"compiled"`` or ``"python"``; defaults to the fastest available.
        max_iter: iteration cap (default scales with problem size).

    Raises:
        LpError: if the kernel hits its iteration cap.
    """
    backend = backend or DEFAULT_BACKEND
    if backend == "compiled":
        if _simplex_ext is None:
            raise LpError("compiled simplex kernel is not available")
        kernel = _simplex_ext.solve_bounded
    elif backend == "python":
        kernel = _simplex_py.solve_bounded
    else:
        raise ValueError(f"unknown backend {backend!r}")

    code, z, iterations, info = kernel(p.c, p.G, p.h, p.lb, p.ub, tol_feas, tol_opt,
                                       -1 if max_iter is None else max_iter)
    z = np.asarray(z)
    if code == _simplex_py.ITERATION_LIMIT:
        raise LpError(f"simplex stopped after {iterations} iterations without converging")
    status = {
        _simplex_py.OPTIMAL: Status.OPTIMAL,
        _simplex_py.INFEASIBLE: Status.INFEASIBLE,
        _simplex_py.UNBOUNDED: Status.UNBOUNDED,
    }[code]
    objective = float(p.c @ z) if status is Status.OPTIMAL else (
        np.inf if status is Status.INFEASIBLE else -np.inf)
    return LpSolution(
        status=status,
        z=z,
        objective=objective,
        iterations=int(iterations),
        max_constraint_violation=constraint_violation(p, z),
        certificate=float(info),
        backend=backend,
    )


def _fmt(v):
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def dump_lp(p, path):
    """Write ``p`` in the plain fixed-order text layout described in README.

    Line 1 ``LP <n_vars> <n_rows>``; then ``OBJ`` followed by n costs; then one
    ``ROW`` line per constraint with n coefficients and the right-hand side
    last; then ``BOUNDS`` lines ``<j> <lb> <ub>``.  Values use ``repr`` so the
    file round-trips exactly.
    """
    with open(path, "w") as f:
        f.write(f"LP {p.n_vars} {p.n_rows}\n")
        f.write("OBJ " + " ".join(_fmt(v) for v in p.c) + "\n")
        for row, rhs in zip(p.G, p.h):
            f.write("ROW " + " ".join(_fmt(v) for v in row) + " " + _fmt(rhs) + "\n")
        for j, (lo, hi) in enumerate(zip(p.lb, p.ub)):
            f.write(f"BOUNDS {j} {_fmt(lo)} {_fmt(hi)}\n")


def load_lp(path):
    with open(path) as f:
        lines = [ln.split() for ln in f if ln.strip()]
    if not lines or lines[0][0] != "LP":
        raise LpError(f"{path}: missing LP header")
    n, m = int(lines[0][1]), int(lines[0][2])
    c = np.array([float(v) for v in lines[1][1:]])
    rows = [ln for ln in lines if ln[0] == "ROW"]
    bounds = [ln for ln in lines if ln[0] == "BOUNDS"]
    if len(rows) != m or len(bounds) != n or c.shape[0] != n:
        raise LpError(f"{path}: inconsistent sizes")
    G = np.array([[float(v) for v in ln[1:-1]] for ln in rows]).reshape(m, n)
    h = np.array([float(ln[-1]) for ln in rows])
    lb = np.empty(n)
    ub = np.empty(n)
    for ln in bounds:
        j = int(ln[1])
        lb[j], ub[j] = float(ln[2]), float(ln[3])
    return LpProblem(c, G, h, lb, ub)


__all__ = [
    "BACKENDS",
    "DEFAULT_BACKEND",
    "LpError",
    "LpProblem",
    "LpSolution",
    "Status",
    "constraint_violation",
    "dump_lp",
    "load_lp",
    "solve_lp",
]
