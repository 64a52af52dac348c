"""Rates per group and the bandwidth split.

Builds the group rate table for a fixed grouping, solves the LP without and
with per-user minimum rates, and shows what happens when the minima cannot
be met.

    python3 demos/bandwidth_allocation.py
"""
import numpy as np

from cfgrouper import (Infeasible, SimConfig, conventional_cf_rates, mmse_variance, rate_table,
                       solve_bandwidth_lp)
from cfgrouper.experiments import draw_network

np.set_printoptions(precision=3, linewidth=100)

cfg = SimConfig(num_aps=100, num_users=6, num_groups=3, pilot_budget=2, power_norm="per_ap",
                rng_seed=11)
_, beta = draw_network(cfg, 0)
nu = mmse_variance(beta, cfg.rho_p)
groups = [np.array([0, 1]), np.array([2, 3]), np.array([4, 5])]

table = rate_table(beta, nu, groups, cfg)
print("group rates (Mbit/s):\n", table.group_rates / 1e6)
print("group sums (Mbit/s):", table.group_sums() / 1e6)

# no minima: everything goes to the best group
res = solve_bandwidth_lp(table)
print("\nno minima   gamma =", res.gamma, " total", res.objective / 1e6, "Mbit/s")

# a floor for everybody forces a split
floor = 0.2 * table.group_rates.max(axis=0).min()
res = solve_bandwidth_lp(table, floor)
print(f"floor {floor / 1e6:.2f}  gamma =", res.gamma, " total", res.objective / 1e6, "Mbit/s")
print("per-user rates (Mbit/s):", res.per_user_rate / 1e6)

try:
    solve_bandwidth_lp(table, table.group_rates.max(axis=0))
except Infeasible as exc:
    print("\nasking every user for its full-band rate:", exc)

conv = conventional_cf_rates(beta, nu, cfg)
print("\nconventional CF, all users at once (Mbit/s):", conv / 1e6)
