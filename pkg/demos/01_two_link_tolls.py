"""
Tolls on a two-link network
===========================

Two agents each pick one of two links. The first link has a fixed cost of 1,
the second costs k/2 when k agents use it. Without tolls both agents may pile
onto the second link; a marginal-cost toll removes that equilibrium. We then
ask how far the toll coefficients may drift before new equilibria appear.
"""

import numpy as np

from robusttoll import (
    BasisSet,
    Game,
    TollMechanismSpec,
    build_deployed_tolls,
    certify_epsilon,
    enumerate_nash,
    poa,
)

basis = BasisSet.affine(2)  # rows: const, poly:1
gamma = np.array([[1.0, 0.0],
                  [0.0, 0.5]])
game = Game([[{0}, {1}], [{0}, {1}]], gamma, basis)

# untolled equilibria and their price of anarchy
ne = enumerate_nash(game)
print("equilibria without tolls:", sorted(ne.as_set()))
print("PoA without tolls: %.4f" % poa(game).poa)

# marginal-cost tolls charge each user the extra cost it imposes on others
spec = TollMechanismSpec("marginal_cost")
tolls = build_deployed_tolls(game, spec)
print("toll table:\n", tolls.table())
print("equilibria with tolls:", sorted(enumerate_nash(game, tolls).as_set()))
print("PoA with tolls: %.4f" % poa(game, tolls).poa)

# the certificate bounds how much error in gamma the tolls tolerate
cert = certify_epsilon(game, spec)
print("certified radius: epsilon=%.3f, relative delta=%.3f" % (cert.epsilon, cert.delta_relative))
print("witness:", cert.witness)

# inside the radius the tolled equilibria stay the same; outside, not necessarily
rng = np.random.default_rng(0)
for scale in (0.9, 2.0):
    new = 0
    for _ in range(500):
        gt = np.clip(gamma + rng.uniform(-scale, scale, gamma.shape) * cert.epsilon, 0, None)
        perturbed = build_deployed_tolls(game, spec, gamma_tilde=gt)
        new += not enumerate_nash(game, perturbed).issubset(enumerate_nash(game, tolls))
    print("errors up to %.1f x epsilon: %d of 500 draws create new equilibria" % (scale, new))
