#!/usr/bin/env python3
"""Benchmark the compiled inference kernels against the pure-numpy fallback.

Runs the fused MLP forward pass on shapes matching real inference traffic
(edge blocks of a 13-roller bearing graph at several widths), then a
full-model rollout chunk, and prints a table of per-call timings with the
compiled/python speedup. Also asserts the two backends agree numerically.

Usage: python3 scripts/bench_kernels.py [--repeats 200] [--widths 32 128]
"""
from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from bearnet import _kernels_fallback
from bearnet.kernels import backend_name

try:
    from bearnet import _kernels
except ImportError:
    _kernels = None


def time_call(fn, repeats: int) -> float:
    """Median wall time of fn() over ``repeats`` calls, in seconds."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def make_mlp(rng, n_in: int, width: int, n_out: int):
    widths = [n_in, width, width, n_out]
    weights = [
        rng.normal(0.0, 1.0 / np.sqrt(a), (a, b)).astype(np.float64)
        for a, b in zip(widths[:-1], widths[1:])
    ]
    biases = [rng.normal(0.0, 0.01, b) for b in widths[1:]]
    return weights, biases


def bench_fused_mlp(repeats: int, widths: list[int]) -> None:
    rng = np.random.default_rng(0)
    z = 13
    rows = {
        "edge block (2Z rows)": 2 * z,
        "node block (Z+3 rows)": z + 3,
        "batched edges (8x2Z)": 16 * z,
    }
    print(f"{'case':34s} {'width':>6s} {'python':>12s} {'compiled':>12s} {'speedup':>8s}")
    for width in widths:
        for label, n in rows.items():
            weights, biases = make_mlp(rng, 2, width, 2)
            x = rng.normal(0.0, 1.0, (n, 2))
            ref = _kernels_fallback.fused_mlp(
                x, weights, biases, _kernels_fallback.ACT_SILU
            )
            t_py = time_call(
                lambda: _kernels_fallback.fused_mlp(
                    x, weights, biases, _kernels_fallback.ACT_SILU
                ),
                repeats,
            )
            if _kernels is not None:
                got = _kernels.fused_mlp(x, weights, biases, _kernels.ACT_SILU)
                err = np.abs(got - ref).max()
                if err > 1e-12:
                    print(f"BACKEND MISMATCH: {label} width {width}: {err:.3e}")
                    sys.exit(1)
                t_c = time_call(
                    lambda: _kernels.fused_mlp(x, weights, biases, _kernels.ACT_SILU),
                    repeats,
                )
                print(
                    f"{label:34s} {width:6d} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us "
                    f"{t_py / t_c:7.2f}x"
                )
            else:
                print(f"{label:34s} {width:6d} {t_py * 1e6:10.1f}us {'—':>12s} {'—':>8s}")


def bench_model_chunk(repeats: int) -> None:
    """One forward_step of the full model (13 rollers, M=5) per backend."""
    import importlib
    import os

    from bearnet.graph import fit_normalization
    from bearnet.model import ModelConfig, ModelInputs, batch_states, init_model
    from bearnet.sim import (
        GroundMount,
        LoadSchedule,
        OperatingCondition,
        default_geometry,
        simulate,
    )

    geometry = default_geometry(13)
    condition = OperatingCondition(
        rpm=600.0,
        load=LoadSchedule((0.0, 13e3)),
        mounts=GroundMount(zeta=0.05),
        n_sub=32,
    )
    record = simulate(geometry, condition, n_steps=8, warmup=100, phase=-np.pi / 2)
    stats = fit_normalization([record])
    config = ModelConfig(width=128, m_passes=5, dt_sub=condition.dt)
    params = init_model(config, np.random.default_rng(0))
    batch = batch_states([record.state_at(0)])
    inputs = ModelInputs(
        omega=np.array([condition.omega]),
        f_ext=np.array([[0.0, 13e3]]),
    )
    radii = (geometry.r_ir, geometry.r_or)

    import bearnet.mlp as mlp_mod

    results = {}
    for choice in ("python", "compiled"):
        if choice == "compiled" and _kernels is None:
            continue
        os.environ["BEARNET_KERNELS"] = choice
        import bearnet.kernels as kernels_mod

        importlib.reload(kernels_mod)
        importlib.reload(mlp_mod)
        from bearnet.model import forward_step  # rebinds onto reloaded mlp

        out = forward_step(batch, params, inputs, config, stats, radii)
        results[choice] = np.asarray(out.final["f_k1"]).copy()
        results[f"{choice}_t"] = time_call(
            lambda: forward_step(batch, params, inputs, config, stats, radii),
            max(repeats // 10, 5),
        )
    os.environ.pop("BEARNET_KERNELS", None)
    importlib.reload(kernels_mod)
    importlib.reload(mlp_mod)

    t_py = results["python_t"]
    line = f"{'full model chunk (Z=13, M=5)':34s} {128:6d} {t_py * 1e3:10.2f}ms"
    if "compiled" in results:
        err = np.abs(results["compiled"] - results["python"]).max()
        if err > 1e-12:
            print(f"BACKEND MISMATCH on model chunk: {err:.3e}")
            sys.exit(1)
        t_c = results["compiled_t"]
        line += f" {t_c * 1e3:10.2f}ms {t_py / t_c:7.2f}x"
    print(line)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--widths", type=int, nargs="+", default=[32, 128])
    args = parser.parse_args()

    print(f"active backend at import: {backend_name()}")
    if _kernels is None:
        print("compiled extension not built; timing the fallback only\n")
    bench_fused_mlp(args.repeats, args.widths)
    bench_model_chunk(args.repeats)
    return 0


if __name__ == "__main__":
    sys.exit(main())
