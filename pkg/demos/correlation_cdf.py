"""CDF of normalized large-scale correlation: grouped pairs vs all pairs.

Small by default so it runs in seconds; pass a trial count for smoother
curves, e.g. ``python3 demos/correlation_cdf.py 200``. Writes cdf.csv and a
gnuplot script to demo_out/.
"""
import sys
from pathlib import Path

import numpy as np

from cfgrouper import SimConfig, correlation_cdf_experiment
from cfgrouper import io

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = SimConfig(num_users=20, num_groups=4, max_memberships=1, pilot_budget=5,
                num_trials=trials, rng_seed=0)
sweep = correlation_cdf_experiment(cfg, [100, 200], jobs=1)

for (scheme, M), v in sorted(sweep.cdf_values.items()):
    q = np.quantile(v, [0.1, 0.5, 0.9])
    print(f"{scheme:13s} M={M:3d}  pairs={v.size:5d}  p10/p50/p90 = {q.round(4)}")

out = Path("demo_out")
out.mkdir(exist_ok=True)
io.write_cdf(out / "cdf.csv", sweep)
io.write_cdf_plot(out / "cdf.gp", sweep)
print("wrote", out / "cdf.csv")
