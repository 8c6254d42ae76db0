#!/usr/bin/env python3
"""Benchmark the frame-decode kernels: compiled extension vs pure Python.

Generates a synthetic capture in memory, decodes every frame with each
available kernel, verifies the outputs agree, and reports frames/second.

Usage:
    python benchmarks/bench_decode.py [--connections N] [--repeats R]
"""

import argparse
import random
import time

from tlslayers import synth
from tlslayers.decode import available_kernels


def build_frames(n_connections: int):
    rng = random.Random(1)
    conns = []
    for i in range(n_connections):
        base = i * 20_000_000
        t = [base, base + 300_000]
        for _ in range(4):
            t.append(t[-1] + rng.randint(200_000, 4_000_000))
        conns.append(
            synth.ConnectionSpec(
                boundary_times=tuple(t),
                group=("x25519", "mlkem1024")[i % 2],
                response_body_bytes=16384,
                segmentation_seed=i,
            )
        )
    frames, _, _ = synth.generate(synth.ScenarioSpec(connections=tuple(conns)))
    return [(f.link_type, f.data) for f in frames]


def run(kernel, frames, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for link_type, data in frames:
            kernel(link_type, data)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--connections", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    kernels = available_kernels()
    print(f"kernels available: {', '.join(sorted(kernels))}")
    frames = build_frames(args.connections)
    print(f"workload: {len(frames)} frames from {args.connections} connections\n")

    outputs = {}
    timings = {}
    for name in sorted(kernels):
        kernel = kernels[name]
        outputs[name] = [kernel(lt, d) for lt, d in frames]
        timings[name] = run(kernel, frames, args.repeats)

    names = sorted(outputs)
    for other in names[1:]:
        if outputs[other] != outputs[names[0]]:
            print("ERROR: kernels disagree")
            return 1

    for name in names:
        rate = len(frames) / timings[name]
        print(f"{name:10s} {timings[name] * 1e3:8.1f} ms   {rate / 1e6:6.2f} M frames/s")
    if "compiled" in timings and "pure" in timings:
        print(f"\nspeedup (compiled vs pure): {timings['pure'] / timings['compiled']:.1f}x")
    elif "compiled" not in timings:
        print("\ncompiled kernel not built; install with Cython available to compare")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
