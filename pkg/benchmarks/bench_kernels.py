"""Compiled vs pure-Python kernel timings.

Each mode runs in its own interpreter because the numba switch is read at
import time::

    python benchmarks/bench_kernels.py            # both modes, table on stdout
    python benchmarks/bench_kernels.py --json out.json

The first compiled call (JIT or cache load) is excluded from the timings.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _timeit(fn, repeat: int) -> float:
    fn()  # warm-up / compilation
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def worker(repeat: int) -> dict:
    import numpy as np

    from contactrecon import _accel
    from contactrecon import _kernels as K
    from contactrecon.costs import assemble_problem
    from contactrecon.eval import generate_synthetic
    from contactrecon.io import state_from_solution
    from contactrecon.model import build_human_model, random_configuration

    human = build_human_model()
    rng = np.random.default_rng(0)
    q = random_configuration(human, rng)
    v, a = rng.normal(size=human.nv), rng.normal(size=human.nv)
    g = np.array([0.0, -9.81, 0.0])
    fext = np.zeros((human.njoints, 6))

    meas, truth = generate_synthetic("lift-object", seed=0)
    problem = assemble_problem(human, meas)
    st = state_from_solution(problem, truth)
    L = problem.layout
    by_kind = {}
    for b in problem.blocks:
        if b.frame == 2:
            by_kind.setdefault(b.kind, b)

    out = {"numba": _accel.USE_NUMBA, "seconds": {}}
    s = out["seconds"]
    s["forward_kinematics"] = _timeit(lambda: K.forward_kinematics(human.tree, q), 20 * repeat)
    s["rnea"] = _timeit(lambda: K.rnea(human.tree, q, v, a, g, fext), 10 * repeat)
    s["crba"] = _timeit(lambda: K.crba(human.tree, q), 2 * repeat)
    for kind, b in sorted(by_kind.items()):
        s[f"linearize:{kind}"] = _timeit(lambda b=b: b.linearize(st.X, st.G, L), max(1, repeat // 5))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--json", default=None, help="write the raw timings here")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(worker(args.repeat)))
        return 0

    results = {}
    for mode, flag in (("numba", "0"), ("python", "1")):
        env = dict(os.environ, CONTACTRECON_DISABLE_NUMBA=flag)
        p = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                           env=env, capture_output=True, text=True, check=True)
        results[mode] = json.loads(p.stdout.strip().splitlines()[-1])
    if not results["numba"]["numba"]:
        print("warning: numba unavailable, both columns are pure Python", file=sys.stderr)
    fast, slow = results["numba"]["seconds"], results["python"]["seconds"]
    print(f"{'kernel':32s} {'numba ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for k in fast:
        print(f"{k:32s} {fast[k] * 1e3:10.3f} {slow[k] * 1e3:10.3f} {slow[k] / fast[k]:8.1f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(results, f, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
