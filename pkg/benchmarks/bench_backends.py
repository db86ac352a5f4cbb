"""Time the compiled Matérn kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_backends.py [--n 400] [--d 8] [--repeat 5]

Reports the best-of-``repeat`` wall time of each kernel routine and of one
MAP objective-plus-gradient evaluation on a synthetic dataset, for both
backends. The objective is timed in subprocesses so that each one selects
its backend at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

OBJECTIVE = """
import timeit, numpy as np
from mfgp.designs import DesignSpec, REFERENCE_MF_LEVELS, nested_design, unit_box
from mfgp.gp import Dataset
from mfgp.inference import LambdaPrior, ParameterLayout, map_objective
from mfgp.synthbench import simulate_design
from mfgp._core import BACKEND
counts = ({n0}, {n1}, {n2}, {n3})
design = nested_design(DesignSpec("nested", REFERENCE_MF_LEVELS, counts, unit_box({d}), 0))
ds = Dataset(design.X, design.T, simulate_design(design, 0))
prior = LambdaPrior.from_outputs(ds.Z, ds.levels)
layout = ParameterLayout.for_dataset(ds, "two-scale", prior)
theta = 0.5 * (layout.lower + layout.upper)
f = lambda: map_objective(theta, ds, layout, prior, return_grad=True)
print(BACKEND, min(timeit.repeat(f, number=1, repeat={repeat})))
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    from mfgp._core import _matern_py
    try:
        from mfgp._core import _matern_ext
    except ImportError:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    X = rng.random((args.n, args.d))
    inv_rho = 1.0 / rng.uniform(0.2, 1.0, args.d)
    print(f"kernel blocks, n = {args.n}, d = {args.d}, best of {args.repeat} (ms)")
    print(f"{'routine':<22}{'nu':>5}{'cython':>10}{'numpy':>10}{'speedup':>9}")
    for name in ("matern_cross", "matern_sym_grad"):
        for code, nu in enumerate(("1/2", "3/2", "5/2")):
            if name == "matern_cross":
                args_ = (X, X, inv_rho, 1.0, code)
            else:
                args_ = (X, inv_rho, 1.0, code)
            t_c = best(lambda: getattr(_matern_ext, name)(*args_), args.repeat)
            t_p = best(lambda: getattr(_matern_py, name)(*args_), args.repeat)
            print(f"{name:<22}{nu:>5}{1e3 * t_c:>10.2f}{1e3 * t_p:>10.2f}{t_p / t_c:>8.1f}x")

    n0 = args.n * 27 // 40
    counts = dict(n0=n0, n1=n0 // 3, n2=n0 // 9, n3=max(1, n0 // 27))
    code = OBJECTIVE.format(d=args.d, repeat=args.repeat, **counts)
    print(f"\nTwoScale objective + gradient, n = {sum(counts.values())} (ms)")
    for forced in ("", "1"):
        env = dict(os.environ)
        env.pop("MFGP_PURE_PYTHON", None)
        if forced:
            env["MFGP_PURE_PYTHON"] = forced
        out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"{out[0]:<10}{1e3 * float(out[1]):>10.1f}")


if __name__ == "__main__":
    main()
