"""Size and power experiment for the explosive-episode detector.

For each sample length, simulates fresh unit-root walks to measure the
empirical flag rate at the chosen level (size), then plants a late
explosive window covering the last tenth of the sample at several
autoregressive roots and measures the in-window and out-of-window flag
rates (power and leakage).

Usage:
    python3 scripts/size_power.py [--lengths 100,200,300] [--rhos 1.02,1.04,1.06]
                                  [--n-paths 200] [--n-rep 400] [--seed 0]

Expect a couple of minutes at the defaults; shrink --n-paths for a
quick look.
"""

import argparse
import sys
import time

import numpy as np

from landmetrics.bubbles import (
    AdfSpec,
    bsadf_series,
    datestamp,
    default_min_window,
    mc_critical_values,
)
from landmetrics.synthkit import gen_explosive, gen_random_walk


def flag_stats(series, truth, table, r0, spec, level):
    res = datestamp(bsadf_series(series, r0=r0, spec=spec), table,
                    level=level, dates=series.dates)
    flags = np.asarray(res.flags)
    if truth is None:
        return flags.mean(), None
    labels = truth[r0:]
    inside = flags[labels].mean() if labels.any() else float("nan")
    outside = flags[~labels].mean() if (~labels).any() else float("nan")
    return inside, outside


def run(lengths, rhos, n_paths, n_rep, seed, level) -> None:
    spec = AdfSpec(n_lags=1)
    alphas = (0.90, 0.95, 0.99)
    print(f"{'T':>5} {'rho':>6} {'size/in %':>10} {'out %':>7}   paths={n_paths}")
    for t_len in lengths:
        r0 = default_min_window(t_len)
        start = time.perf_counter()
        table = mc_critical_values(t_len, min_window=r0, spec=spec,
                                   alphas=alphas, n_rep=n_rep, seed=seed)
        null_rates = []
        for i in range(n_paths):
            walk = gen_random_walk(t_len, seed=seed + 1000 + i)
            rate, _ = flag_stats(walk, None, table, r0, spec, level)
            null_rates.append(rate)
        print(f"{t_len:>5} {'1.00':>6} {100 * np.mean(null_rates):>10.2f} "
              f"{'':>7}   (null walks)")
        window = (int(0.9 * t_len), t_len)
        for rho in rhos:
            inside, outside = [], []
            for i in range(n_paths):
                series, truth = gen_explosive(
                    t_len, [window], rho=rho, sigma=1.0,
                    seed=seed + 5000 + i, start_level=50.0)
                rate_in, rate_out = flag_stats(series, truth, table, r0,
                                               spec, level)
                inside.append(rate_in)
                outside.append(rate_out)
            print(f"{t_len:>5} {rho:>6.2f} {100 * np.nanmean(inside):>10.1f} "
                  f"{100 * np.nanmean(outside):>7.2f}")
        print(f"{'':>5} ({time.perf_counter() - start:.1f}s, "
              f"window [{window[0]}, {window[1]}))")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lengths", default="100,200,300")
    parser.add_argument("--rhos", default="1.02,1.04,1.06")
    parser.add_argument("--n-paths", type=int, default=200)
    parser.add_argument("--n-rep", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--level", type=float, default=0.95)
    args = parser.parse_args(argv)
    lengths = [int(v) for v in args.lengths.split(",") if v.strip()]
    rhos = [float(v) for v in args.rhos.split(",") if v.strip()]
    run(lengths, rhos, args.n_paths, args.n_rep, args.seed, args.level)
    return 0


if __name__ == "__main__":
    sys.exit(main())
