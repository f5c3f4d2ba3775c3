"""Time the compiled Dyson recurrence against the numpy fallback.

Run with ``python benchmarks/bench_dyson.py``. Each case builds a random
Hermitian V and diagonal H0, runs both backends on identical inputs, checks
they agree, and prints the best-of-``repeat`` wall time.
"""

import argparse
import time

import numpy as np

from schwinger import _kernels

CASES = [(8, 4, 1024), (16, 4, 4096), (32, 4, 2048), (64, 3, 1024), (128, 3, 512)]


def _problem(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / (2 * np.sqrt(dim)), rng.normal(size=dim)


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--mode", choices=["strict", "weighted", "unweighted"], default="weighted")
    args = ap.parse_args(argv)
    mode = {"strict": _kernels.MODE_STRICT, "weighted": _kernels.MODE_WEIGHTED,
            "unweighted": _kernels.MODE_UNWEIGHTED}[args.mode]
    backends = _kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'dim':>5} {'K':>3} {'M':>6} " + " ".join(f"{b:>10}" for b in backends) + "    speedup")
    for dim, K, M in CASES:
        v, d = _problem(dim, dim * 1000 + M)
        times, outs = {}, {}
        for name in backends:
            kernel = _kernels.get_backend(name)
            times[name], outs[name] = _best(lambda: kernel(v, d, 1.0 / M, M, K, mode), args.repeat)
        if len(outs) == 2:
            diff = np.abs(outs["compiled"] - outs["python"]).max()
            assert diff <= 1e-10, f"backends disagree by {diff:.2e}"
            speedup = f"{times['python'] / times['compiled']:9.2f}x"
        else:
            speedup = ""
        cols = " ".join(f"{times[b]:9.4f}s" for b in backends)
        print(f"{dim:>5} {K:>3} {M:>6} {cols}  {speedup}")


if __name__ == "__main__":
    main()
