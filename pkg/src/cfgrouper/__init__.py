"""User grouping and bandwidth allocation for cell-free massive MIMO.

The submodules follow the processing chain: :mod:`topology` draws the
network and large-scale fading, :mod:`channel` covers small-scale fading,
MMSE estimation and favorable-propagation metrics, :mod:`grouping` builds
the correlation graph and solves the grouping problem, :mod:`allocation`
computes rates and splits the bandwidth, and :mod:`experiments` runs the
Monte Carlo studies.
"""

from .allocation import (AllocationResult, Infeasible, RateTable, conventional_cf_rates,
                         group_rate, rate_table, solve_bandwidth_lp)
from .channel import (chebyshev_bound, draw_channel, empirical_fp_ccdf, fp_report,
                      mmse_estimate, mmse_variance, normalized_pair_correlation,
                      pair_correlation)
from .config import ConfigError, SimConfig, stage_rng
from .experiments import (SweepResult, TrialResult, correlation_cdf_experiment, run_trial,
                          throughput_sweep_experiment)
from .grouping import (Grouping, InstanceTooLarge, SdrSolution, brute_force_optimum,
                       build_weight_graph, from_spin, gaussian_round, greedy_grouping,
                       objective_binary, repair_feasibility, solve_sdr, spin_objective, to_spin)
from .sdp import SolverNotConverged
from .topology import Topology, build_beta_matrix, generate_topology, path_loss_db

__version__ = "0.1.0"
