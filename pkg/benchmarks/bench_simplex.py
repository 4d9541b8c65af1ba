"""Compare the compiled and numpy simplex kernels.

Two workloads: random dense LPs of growing size, and the 48-step scheduling
LP of one room from the shipped fixture (the problem the sweep solves about
400k times at full scale).

    python benchmarks/bench_simplex.py --repeats 5
"""

import argparse
import statistics
import sys
import time

import numpy as np

from loadshift import io
from loadshift.building import augment, per_room_views
from loadshift.lp import BACKENDS, LpProblem, Status, solve_lp
from loadshift.scheduler import SchedulerConfig, build_schedule_lp


def random_problems(n, m, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        lb = rng.uniform(-2, 0, n)
        p = LpProblem(rng.normal(size=n), rng.normal(size=(m, n)),
                      rng.normal(size=m) + rng.uniform(0.5, 2, m), lb, lb + rng.uniform(1, 3, n))
        if solve_lp(p).status is Status.OPTIMAL:
            out.append(p)
    return out


def room_problem():
    cfg = io.load_run_config(io.DATA_DIR / "example_run.ini")
    room = cfg.model()
    prices = io.ingest_prices(cfg.prices_path, room.dt)
    prof = io.ingest_disturbance(cfg.disturbance_path)
    view = per_room_views(augment(room, 1, 1), prof)[0]
    return build_schedule_lp(view, prices, SchedulerConfig())


def time_backend(problems, backend, repeats):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        objs = [solve_lp(p, backend=backend).objective for p in problems]
        samples.append((time.perf_counter() - t0) / len(problems))
    return statistics.median(samples), np.array(objs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--count", type=int, default=20, help="random LPs per size")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if "compiled" not in BACKENDS:
        print("compiled kernel not available; only the numpy kernel is installed")
        return 1

    workloads = [(f"random {n}x{m}", random_problems(n, m, args.count, args.seed))
                 for n, m in ((6, 8), (20, 30), (60, 90))]
    room = room_problem()
    workloads.append((f"room LP {room.G.shape[1]}x{room.G.shape[0]}", [room]))

    print(f"{'workload':<22}{'compiled ms':>14}{'numpy ms':>12}{'speedup':>10}{'max |dobj|':>13}")
    for name, problems in workloads:
        tc, oc = time_backend(problems, "compiled", args.repeats)
        tp, op = time_backend(problems, "python", args.repeats)
        print(f"{name:<22}{tc * 1e3:>14.3f}{tp * 1e3:>12.3f}{tp / tc:>10.1f}"
              f"{np.abs(oc - op).max():>13.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
