"""Compare the compiled kernel backend against the numpy fallback.

Times the operations that dominate training: single and batched MLP
forward passes, the batched backward pass, Adam updates, and the GAE
recursion.  Both backends are imported directly, so the CALM_KERNELS
environment variable is irrelevant here.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--batch B]
"""

import argparse
import time

import numpy as np

from calm.kernels import _core_py

try:
    from calm.kernels import _core
except ImportError:
    _core = None


def _make_net(sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, fan_in**-0.5, (fan_out, fan_in)))
        biases.append(rng.normal(0.0, 0.1, fan_out))
    return weights, biases


def _time(fn, repeats):
    fn()  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(batch):
    rng = np.random.default_rng(0)
    sizes = (3, 64, 64, 2)
    weights, biases = _make_net(sizes, rng)
    x = rng.normal(size=sizes[0])
    xs = rng.normal(size=(batch, sizes[0]))
    upstream = rng.normal(size=(batch, sizes[-1]))
    rewards = rng.normal(size=512)
    values = rng.normal(size=512)

    def forward(mod):
        return lambda: mod.mlp_forward(weights, biases, x)

    def forward_batch(mod):
        return lambda: mod.mlp_forward_batch(weights, biases, xs)

    def backward_batch(mod):
        _, acts = mod.mlp_forward_batch_cached(weights, biases, xs)
        return lambda: mod.mlp_backward_batch(weights, acts, upstream)

    def adam(mod):
        param = rng.normal(size=(64, 64))
        grad = rng.normal(size=(64, 64))
        m = np.zeros_like(param)
        v = np.zeros_like(param)
        return lambda: mod.adam_apply(param, grad, m, v, 1e-3, 0.9, 0.999,
                                      1e-8, 0.9, 0.999, 0.0)

    def gae(mod):
        return lambda: mod.gae_advantages(rewards, values, 0.0, 0.99, 0.9)

    return [
        (f"mlp_forward {sizes}", forward),
        (f"mlp_forward_batch {sizes} x{batch}", forward_batch),
        (f"mlp_backward_batch {sizes} x{batch}", backward_batch),
        ("adam_apply 64x64", adam),
        ("gae_advantages T=512", gae),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200,
                        help="timing repetitions per case (best is kept)")
    parser.add_argument("--batch", type=int, default=256,
                        help="batch size for the batched cases")
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not available; showing numpy timings only")
    header = f"{'case':<38}{'numpy':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, make in _cases(args.batch):
        t_py = _time(make(_core_py), args.repeats)
        if _core is not None:
            t_c = _time(make(_core), args.repeats)
            print(f"{label:<38}{t_py * 1e6:>10.1f}us{t_c * 1e6:>10.1f}us"
                  f"{t_py / t_c:>9.2f}x")
        else:
            print(f"{label:<38}{t_py * 1e6:>10.1f}us{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
