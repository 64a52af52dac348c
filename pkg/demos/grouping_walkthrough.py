"""Walk through the grouping pipeline on one small network.

Draws a network, builds the correlation graph, solves the relaxation,
rounds it, and compares the result with the greedy baseline and with the
exhaustive optimum (feasible here because K is small).

    python3 demos/grouping_walkthrough.py
"""
import numpy as np

from cfgrouper import (SimConfig, brute_force_optimum, build_weight_graph, gaussian_round,
                       greedy_grouping, objective_binary, solve_sdr, stage_rng)
from cfgrouper.experiments import draw_network

np.set_printoptions(precision=3, suppress=True, linewidth=100)

cfg = SimConfig(num_aps=100, num_users=8, num_groups=3, max_memberships=1, pilot_budget=3,
                rng_seed=2024)
C, alpha, tau = cfg.num_groups, cfg.max_memberships, cfg.pilot_budget

# %% network and correlation graph
topo, beta = draw_network(cfg, trial_id=0)
print("beta shape (M, K):", beta.shape)
W = build_weight_graph(beta)
Wn = W / W.max()
print("normalized weights:\n", Wn)

# %% relaxation (the objective is maximized: it counts weight between groups)
sol = solve_sdr(Wn, C, alpha, tau)
print(f"\nrelaxation value {sol.objective_value:.4f}  (upper bound on the achievable objective)")
for c in range(C):
    eig = np.linalg.eigvalsh(sol.lifted(c))[::-1]
    print(f"group {c}: leading eigenvalues of the lifted matrix", eig[:3])

# %% rounding, baseline and optimum
g = gaussian_round(sol, Wn, C, alpha, tau, cfg.num_rounding_samples,
                   stage_rng(cfg.rng_seed, 0, "rounding"))
gg = greedy_grouping(Wn, C, alpha, tau)
gb, best = brute_force_optimum(Wn, C, alpha, tau)

for name, grp in (("rounded", g), ("greedy", gg), ("optimum", gb)):
    print(f"{name:8s} objective {objective_binary(grp.x, Wn):.4f}  groups",
          [m.tolist() for m in grp.groups()])
print(f"\nrounded / optimum ratio: {objective_binary(g.x, Wn) / best:.3f}")
