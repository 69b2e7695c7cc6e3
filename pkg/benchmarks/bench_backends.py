#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the hot per-iteration kernels (model log-weights, the marginal
log-densities used by the criteria, and the log incomplete gamma) and, with
--chain, a small end-to-end fit under each backend via subprocesses.

Usage: python benchmarks/bench_backends.py [--chain]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from smnmix import _kernels_py

try:
    from smnmix import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    n = 5_000
    yt2 = rng.standard_normal(n) ** 2
    big = rng.standard_normal(200_000) ** 2 * 3.0

    cases = [
        ("model_log_weights (n=5000)",
         lambda mod: mod.model_log_weights(yt2, 1.1, 3.2, 1.4), 200),
        ("slash_logpdf_sq (200k)",
         lambda mod: mod.slash_logpdf_sq(big, 0.9, 1.4), 20),
        ("student_t_logpdf_sq (200k)",
         lambda mod: mod.student_t_logpdf_sq(big, 0.9, 3.2), 20),
        ("log_gammainc_lower (200k, a=1.9)",
         lambda mod: mod.log_gammainc_lower(1.9, big), 20),
        ("log_gammainc_lower (200k, a=150.5)",
         lambda mod: mod.log_gammainc_lower(150.5, big), 20),
    ]

    print(f"{'kernel':40s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, call, repeats in cases:
        t_py = _time(lambda: call(_kernels_py), repeats)
        if _kernels is None:
            print(f"{name:40s} {t_py * 1e3:10.3f}ms {'-':>12s} {'-':>9s}")
            continue
        t_c = _time(lambda: call(_kernels), repeats)
        print(f"{name:40s} {t_py * 1e3:10.3f}ms {t_c * 1e3:10.3f}ms "
              f"{t_py / t_c:8.1f}x")


CHAIN_SNIPPET = """
import time
import numpy as np
from smnmix import MixtureConfig, SamplerConfig, ModelKind, run_chain, gen_study1
import smnmix
data, _ = gen_study1(ModelKind.STUDENT_T, 3.0, 1000, seed=3)
cfg = SamplerConfig(seed=1, iterations=4000, burn_in=1000, warmup_iters=1000)
t0 = time.time()
out = run_chain(data, MixtureConfig(), cfg)
print(f"backend={smnmix.BACKEND}: {time.time() - t0:.2f}s, "
      f"rho={np.round(out.rho_hat, 3)}")
"""


def bench_chain():
    sys.stdout.flush()
    for backend in ("python", "compiled"):
        env = dict(os.environ, SMNMIX_BACKEND=backend)
        subprocess.run([sys.executable, "-c", CHAIN_SNIPPET], env=env,
                       check=True)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--chain", action="store_true",
                    help="also time a small end-to-end fit per backend")
    args = ap.parse_args()
    bench_kernels()
    if args.chain:
        bench_chain()
