"""Compare the compiled and numpy convolution kernels.

    python3 benchmarks/bench_kernels.py [--batch 64] [--repeat 50]

Also times one full training epoch and one batched input-gradient call with
each backend swapped in.
"""

import argparse
import timeit

import numpy as np

from rfsurrogate.nn import kernels
from rfsurrogate.nn.model import ArchSpec, TrainConfig, init_model, train_arrays


def bench_kernels(mod, batch, repeat, rng):
    arch = ArchSpec()
    x = rng.standard_normal((batch, 2, arch.k))
    w = rng.standard_normal((arch.conv_filters, arch.conv_kernel))
    b = rng.standard_normal(arch.conv_filters)
    dz = rng.standard_normal((batch, arch.conv_filters, 2, arch.conv_width))
    out = {}
    for name, fn in (
        ("conv_forward", lambda: mod.conv_forward(x, w, b)),
        ("conv_grad_input", lambda: mod.conv_grad_input(dz, w, arch.k)),
        ("conv_grad_params", lambda: mod.conv_grad_params(x, dz, arch.conv_kernel)),
    ):
        out[name] = min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat
    return out


def bench_model(mod, rng):
    saved = kernels._impl
    kernels._impl = mod
    try:
        x = rng.standard_normal((2000, 2, 16))
        y = rng.integers(0, 2, 2000)
        t_epoch = min(timeit.repeat(lambda: train_arrays(x, y, ArchSpec(), TrainConfig(epochs=1)), number=1, repeat=3))
        m = init_model(ArchSpec(), rng)
        xb = rng.standard_normal((250, 2, 16))
        t_grad = min(timeit.repeat(lambda: m.input_gradient(xb, 1), number=20, repeat=3)) / 20
    finally:
        kernels._impl = saved
    return {"train_epoch_2000": t_epoch, "input_gradient_250": t_grad}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    mods = {"python": kernels.backend_module("python")}
    try:
        mods["cython"] = kernels.backend_module("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")
    results = {}
    for name, mod in mods.items():
        rng = np.random.default_rng(0)
        results[name] = {**bench_kernels(mod, args.batch, args.repeat, rng), **bench_model(mod, rng)}
    keys = list(results["python"])
    print(f"{'kernel':<22}" + "".join(f"{n:>14}" for n in results) + ("     speedup" if len(results) > 1 else ""))
    for k in keys:
        row = f"{k:<22}" + "".join(f"{results[n][k] * 1e3:>12.3f}ms" for n in results)
        if len(results) > 1:
            row += f"{results['python'][k] / results['cython'][k]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
