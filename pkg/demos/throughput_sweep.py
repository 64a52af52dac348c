"""Mean per-user throughput against the number of APs.

Compares grouping with bandwidth allocation against conventional cell-free
operation. The default trial count is tiny; the intervals only mean
something with a few hundred trials (``python3 demos/throughput_sweep.py 300``).

The default rate model uses unit precoding coefficients, which leaves every
rate at a few hundred bit/s with the default powers; ``per_ap`` power
scaling is shown next to it for scale.
"""
import sys
from pathlib import Path

from cfgrouper import SimConfig, throughput_sweep_experiment
from cfgrouper import io
from cfgrouper.experiments import default_jobs

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
out = Path("demo_out")
out.mkdir(exist_ok=True)
for norm in ("none", "per_ap"):
    cfg = SimConfig(num_groups=4, max_memberships=6, num_trials=trials, rng_seed=0,
                    power_norm=norm)
    sweep = throughput_sweep_experiment(cfg, [50, 100, 150, 200], [10, 20],
                                        jobs=default_jobs())
    print(f"\npower_norm={norm}")
    print(f"{'scheme':13s} {'K':>3s} {'M':>4s} {'mean bit/s':>14s} {'ci95':>12s}")
    for p in sweep.throughput:
        print(f"{p.scheme:13s} {p.K:3d} {p.M:4d} {p.mean_bits_s:14.4g} {p.ci95_bits_s:12.4g}")
    io.write_throughput(out / f"throughput_{norm}.csv", sweep)
