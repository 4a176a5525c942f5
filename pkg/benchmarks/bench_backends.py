#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Backend selection happens at import time via QCBPLAB_BACKEND, so this script
re-executes itself once per backend and prints a combined table:

    python3 benchmarks/bench_backends.py
"""

import json
import os
import subprocess
import sys
import time


def _bench_once() -> dict:
    import numpy as np

    from qcbplab import _kernels as kern
    from qcbplab import qcbp
    from fractions import Fraction as Q

    results = {"backend": kern.backend_name()}

    # warm-up triggers the JIT compile so it is not billed to the measurement
    coeffs = np.array([[3, -2, 5]], dtype=object)
    shift = np.array([40], dtype=object)
    kern.grid_scan(coeffs, shift, 2500, 8, exact_fallback=False)

    # worst-case acceptance-scale grid: N=3, K=256 (~1.35e8 points)
    inst = qcbp.Instance.single_row([Q(1, 2), Q(1, 2), Q(1, 2)], 1, Q(0))
    t0 = time.perf_counter()
    report = qcbp.brute_force_min(inst, 7)
    results["grid_scan_s"] = time.perf_counter() - t0
    results["grid_value"] = str(report.value)

    # primal-dual iteration batch on a realified 2x4 operator
    K = np.array([[1.0, 1.0009765625, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0009765625]])
    y = np.array([1.0, 0.0])
    x, z, xbar = np.zeros(4), np.zeros(2), np.zeros(4)
    kern.pd_iterate(K, y, 0.5, 0.7, 0.7, x, z, xbar, 10, 2)  # warm-up
    t0 = time.perf_counter()
    x, z, xbar = kern.pd_iterate(K, y, 0.5, 0.7, 0.7, x, z, xbar, 200_000, 2)
    results["pd_200k_iters_s"] = time.perf_counter() - t0
    results["pd_x0"] = float(x[0])
    return results


def main() -> int:
    if os.environ.get("_QCBPLAB_BENCH_CHILD"):
        print(json.dumps(_bench_once()))
        return 0

    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, QCBPLAB_BACKEND=backend, _QCBPLAB_BENCH_CHILD="1")
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__)],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            print(f"{backend} run failed:\n{proc.stderr}", file=sys.stderr)
            continue
        rows.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    if not rows:
        return 1
    print(f"{'kernel':<28}" + "".join(f"{r['backend']:>12}" for r in rows))
    for key, label in (
        ("grid_scan_s", "grid scan N=3 K=256 (s)"),
        ("pd_200k_iters_s", "primal-dual 200k iters (s)"),
    ):
        print(f"{label:<28}" + "".join(f"{r[key]:>12.3f}" for r in rows))
    if len(rows) == 2:
        for key in ("grid_value",):
            assert rows[0][key] == rows[1][key], "backends disagree on exact values"
        print("exact outputs identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
