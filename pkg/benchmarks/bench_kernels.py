"""Benchmark the numba kernel against the pure-numpy fallback.

Measures batched protocol-fidelity evaluation across Hilbert-space sizes,
the workload that dominates policy-gradient runs.  Run:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from hamswitch.engines import UnitaryFidelityEngine
from hamswitch.models import build_switching_ansatz, build_target, standard_parameter_presets


def bench(n_bath: int, depth: int = 20, batch: int = 32, repeats: int = 20):
    spec = standard_parameter_presets("iso_equal", n_bath=n_bath)
    ansatz = build_switching_ansatz(spec, "two_ham_x")
    target = build_target("Z")
    rng = np.random.default_rng(0)
    durations = rng.random((batch, 2 * depth))
    timings = {}
    values = {}
    for backend in ("numba", "numpy"):
        engine = UnitaryFidelityEngine(ansatz, target, backend=backend)
        engine.fidelities(durations)  # warm-up / jit compile
        t0 = time.perf_counter()
        for _ in range(repeats):
            out = engine.fidelities(durations)
        timings[backend] = (time.perf_counter() - t0) / (repeats * batch)
        values[backend] = out
    agreement = float(np.max(np.abs(values["numba"] - values["numpy"])))
    return timings, agreement


def main():
    print(f"{'dim':>5} {'numba us/eval':>14} {'numpy us/eval':>14} {'speedup':>8} {'agree':>10}")
    for n_bath in (1, 2, 3, 4, 5):
        timings, agreement = bench(n_bath)
        dim = 2 ** (1 + n_bath)
        ratio = timings["numpy"] / timings["numba"]
        print(
            f"{dim:>5} {timings['numba'] * 1e6:>14.1f} {timings['numpy'] * 1e6:>14.1f} "
            f"{ratio:>7.2f}x {agreement:>10.2e}"
        )


if __name__ == "__main__":
    main()
