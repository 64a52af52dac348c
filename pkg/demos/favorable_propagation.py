"""How well does the large-scale correlation predict favorable propagation?

For a few user pairs we compare the Monte Carlo tail of the normalized
channel inner product with the one-sided Chebyshev (Cantelli) bound.
Thresholds are given in units of the inner product's standard deviation,
sqrt(sum_m beta_mk beta_mj) / M, so the bound reads 1 / (1 + s^2) for
every pair.

    python3 demos/favorable_propagation.py
"""
import numpy as np

from cfgrouper import SimConfig, normalized_pair_correlation, pair_correlation
from cfgrouper.channel import chebyshev_bound, empirical_fp_ccdf
from cfgrouper.experiments import draw_network

cfg = SimConfig(num_aps=100, num_users=6, rng_seed=7)
_, beta = draw_network(cfg, 0)
rng = np.random.default_rng(1)
M = beta.shape[0]
s = np.array([0.0, 0.5, 1.0, 2.0, 4.0])

for k, j in [(0, 1), (0, 2), (3, 4)]:
    sd = np.sqrt(pair_correlation(beta, k, j)) / M
    theta = s * sd
    emp = empirical_fp_ccdf(beta, k, j, theta, 20_000, rng)
    bnd = chebyshev_bound(beta, k, j, theta)
    print(f"pair ({k},{j})  normalized correlation {normalized_pair_correlation(beta, k, j):.4f}"
          f"  sd {sd:.3e}")
    for si, e, b in zip(s, emp, bnd):
        print(f"   s={si:3.1f}  empirical={e:.4f}  bound={b:.4f}")
