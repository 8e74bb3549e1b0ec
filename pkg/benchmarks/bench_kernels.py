"""Benchmark the compiled kernels against the NumPy reference backend.

The two hot paths are the per-row posterior/likelihood reduction (called once
per EM iteration and once per lfdr evaluation) and the pairwise dominance
audit.  Run:

    python3 benchmarks/bench_kernels.py [--repeats N]

Both backends compute identical values (see tests/test_kernels.py); this
script reports wall-clock times and the speedup ratio.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from compnull._kernels import _ref

try:
    from compnull._kernels import _fast
except ImportError:
    _fast = None


def model_shaped_inputs(j: int, k: int, seed: int = 0):
    """Inputs shaped like a fitted model: 3^K components, mostly-null mass."""
    rng = np.random.default_rng(seed)
    n_comp = 3 ** k
    z = np.ascontiguousarray(rng.normal(scale=2.0, size=(j, k)))
    means = np.ascontiguousarray(rng.normal(scale=3.0, size=(n_comp, k)))
    means[0] = 0.0
    w = rng.random(n_comp) + 0.01
    w[0] = 50.0
    log_w = np.ascontiguousarray(np.log(w / w.sum()))
    null_mask = np.ones(n_comp, dtype=np.uint8)
    null_mask[-2:] = 0
    return z, means, log_w, null_mask


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_posterior(backend, z, means, log_w, null_mask, rho, with_resp, repeats):
    return best_of(
        lambda: backend.posterior_stats(z, means, log_w, null_mask, rho, with_resp),
        repeats,
    )


def bench_audit(backend, z, lfdrs, repeats):
    return best_of(lambda: backend.audit_pairs(z, lfdrs, 1e-12, 100), repeats)


def fmt_row(label: str, t_ref: float, t_fast: float | None) -> str:
    if t_fast is None:
        return f"{label:<44} {t_ref * 1e3:>10.2f} {'-':>10} {'-':>8}"
    return (f"{label:<44} {t_ref * 1e3:>10.2f} {t_fast * 1e3:>10.2f} "
            f"{t_ref / t_fast:>7.1f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case; best is reported")
    args = parser.parse_args()

    if _fast is None:
        print("note: compiled backend unavailable; timing reference only")

    print(f"{'case':<44} {'numpy ms':>10} {'compiled':>10} {'speedup':>8}")

    for k, j in ((2, 20_000), (2, 100_000), (3, 20_000), (3, 100_000)):
        z, means, log_w, null_mask, rho = *model_shaped_inputs(j, k), float("nan")
        for with_resp in (False, True):
            label = f"posterior_stats J={j} K={k} resp={with_resp}"
            t_ref = bench_posterior(_ref, z, means, log_w, null_mask, rho,
                                    with_resp, args.repeats)
            t_fast = None if _fast is None else bench_posterior(
                _fast, z, means, log_w, null_mask, rho, with_resp, args.repeats)
            print(fmt_row(label, t_ref, t_fast))

    # correlated covariance path (K = 2 only)
    z, means, log_w, null_mask = model_shaped_inputs(100_000, 2, seed=1)
    t_ref = bench_posterior(_ref, z, means, log_w, null_mask, 0.3, False,
                            args.repeats)
    t_fast = None if _fast is None else bench_posterior(
        _fast, z, means, log_w, null_mask, 0.3, False, args.repeats)
    print(fmt_row("posterior_stats J=100000 K=2 rho=0.3", t_ref, t_fast))

    for j in (2_000, 10_000):
        rng = np.random.default_rng(2)
        z = np.ascontiguousarray(rng.normal(size=(j, 2)))
        lfdrs = np.ascontiguousarray(rng.random(j))
        label = f"audit_pairs J={j} (all-pairs scan)"
        t_ref = bench_audit(_ref, z, lfdrs, 1)
        t_fast = None if _fast is None else bench_audit(_fast, z, lfdrs, 1)
        print(fmt_row(label, t_ref, t_fast))


if __name__ == "__main__":
    main()
