"""
Misspecified tolls on a small road network
==========================================

Fifteen commuters share one origin and destination on a 10-edge network with
quartic link costs. Tolls are designed for the nominal coefficients and then
deployed with coefficients perturbed by up to a relative delta. For each delta
we record the worst and average PoA over random draws and how often a new
equilibrium shows up.

Pass a trial count on the command line to trade accuracy for speed.
"""

import sys

from robusttoll import TollMechanismSpec, certify_epsilon, load_game
from robusttoll.experiments import PerturbationProtocol, run_monte_carlo

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200

game = load_game("sioux_falls_simplified")
spec = TollMechanismSpec("optimal_local")

cert = certify_epsilon(game, spec)
print("certified relative radius: %.4f" % cert.delta_relative)

summary = run_monte_carlo(game, spec, PerturbationProtocol(trials=trials, seed=7))
print("noiseless PoA %.4f with %d equilibrium profile(s)"
      % (summary.noiseless_poa, len(summary.noiseless_ne)))
print("delta  max_poa  avg_poa  frac_new_ne")
for row in summary:
    flag = "  (inside certified radius)" if row.delta < cert.delta_relative else ""
    print("%-6.2f %-8.4f %-8.4f %.3f%s" % (row.delta, row.max_poa, row.avg_poa, row.frac_new_ne, flag))
