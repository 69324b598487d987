"""Benchmark the numba kernels against the pure-numpy fallback.

Times the hot convolution kernels in isolation and one full input-gradient
sweep of a mid-size family member. Usage:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from capsel import backends
from capsel.family import FamilyConfig, build_family
from capsel.network import init_network, input_gradient


def time_call(fn, repeats):
    fn()  # warm-up (and numba compile)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng, quick):
    k, cin, cout, hw = (4, 16, 32, 32) if quick else (8, 32, 64, 64)
    xp = rng.standard_normal((k, cin, hw + 2, hw + 2))
    w = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    gy = rng.standard_normal((k, cout, hw, hw))
    wt = rng.standard_normal((cin, cout, 2, 2))
    xt = rng.standard_normal((k, cin, hw, hw))
    gt = rng.standard_normal((k, cout, 2 * hw, 2 * hw))
    return {
        "conv2d_fwd": lambda mod: mod.conv2d_fwd(xp, w, b, 1, 1, hw, hw),
        "conv2d_input_vjp": lambda mod: mod.conv2d_input_vjp(gy, w, 1, 1, hw + 2, hw + 2),
        "tconv2d_fwd": lambda mod: mod.tconv2d_fwd(xt, wt, b),
        "tconv2d_input_vjp": lambda mod: mod.tconv2d_input_vjp(gt, wt),
    }


def gradient_case(quick):
    size = (32, 32) if quick else (64, 64)
    fc = FamilyConfig(input_size=size, base_channels=16, max_channels=128,
                      stages=3, in_channels=1, out_classes=2)
    cfg = build_family(fc)[0]
    net = init_network(cfg, fc, 0)
    x = np.random.default_rng(1).standard_normal((4, 1, *size))
    return net, x, cfg


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller shapes, fewer repeats")
    parser.add_argument("--repeats", type=int, default=None)
    args = parser.parse_args()
    repeats = args.repeats or (3 if args.quick else 5)

    names = backends.available()
    if "numba" not in names:
        print("numba not installed: timing the numpy fallback only")
    mods = {name: backends.load(name) for name in names}
    rng = np.random.default_rng(0)

    rows = []
    for label, call in kernel_cases(rng, args.quick).items():
        timings = {name: time_call(lambda m=mod: call(m), repeats)
                   for name, mod in mods.items()}
        rows.append((label, timings))

    net, x, cfg = gradient_case(args.quick)
    timings = {}
    for name in names:
        backends.set_active(name)
        timings[name] = time_call(lambda: input_gradient(net, x), repeats)
    backends.set_active(None)
    rows.append((f"input_gradient (cap {cfg.cap})", timings))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel'.ljust(width)}  " + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, timings in rows:
        line = label.ljust(width) + "  "
        line += "".join(f"{timings[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f"{timings['numpy'] / timings['numba']:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
