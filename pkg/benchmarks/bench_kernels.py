"""Trajectory-kernel benchmark: compiled extension vs numpy fallback.

    python3 benchmarks/bench_kernels.py [--shots 2000] [--length 16] [--depth 2]

Builds a random-gate MERA circuit, samples the same shots with both
backends, checks the outcomes are identical and reports shots per second.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from holomera import kernels
from holomera.circuit import compile_network
from holomera.network import assemble, network_slots
from holomera.simulator import NoiseModel, lower, sample_shots
from holomera.tensor import haar_unitary


def random_circuit(kind: str, depth: int, length: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    slots = network_slots(kind, depth, length)
    net = assemble(kind, depth, length, [haar_unitary(4, rng) for _ in slots])
    return compile_network(net, "X", decompose=False)


def timeit(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--length", type=int, default=16)
    ap.add_argument("--depth", type=int, default=2)
    ap.add_argument("--kind", default="MERA")
    ap.add_argument("--p1", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    circ = random_circuit(args.kind, args.depth, args.length)
    noise = NoiseModel.from_ratio(args.p1)
    print(f"{args.kind} d={args.depth} L={args.length}: {circ.n_qubits} qubits, {len(circ.ops)} ops, "
          f"{args.shots} shots, p1={args.p1:g}")
    backends = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])
    if not kernels.HAVE_EXTENSION:
        print("compiled extension not available; timing the fallback only")
    low = lower(circ, noise)
    table = (low.kind, low.q0, low.q1, low.mats, low.prob, low.draw, low.slot, low.n_qubits, len(low.sites))
    results, times = {}, {}
    for b in backends:
        mod = kernels.get_backend(b)
        results[b] = sample_shots(circ, noise, args.shots, seed=1, backend=b).values
        times[b] = timeit(lambda: mod.run_trajectories(*table, args.shots, 1), args.repeat)
        e2e = timeit(lambda: sample_shots(circ, noise, args.shots, seed=1, backend=b), args.repeat)
        print(f"  {b:7s} kernel {times[b] * 1e3:9.1f} ms ({args.shots / times[b]:10.0f} shots/s)"
              f"   end-to-end {e2e * 1e3:9.1f} ms")
    if len(backends) == 2:
        same = np.array_equal(results["python"], results["cython"])
        print(f"  kernel speedup {times['python'] / times['cython']:.2f}x, identical outcomes: {same}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
