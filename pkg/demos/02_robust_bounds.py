"""
Robust price-of-anarchy bounds for affine costs
===============================================

For every game with affine resource costs and at most n agents, the robust
LP bounds the PoA that a toll rule can guarantee when its coefficients are
off by up to a relative error delta. This script compares three toll rules
and then rescales the optimal local toll by lambda.
"""

import numpy as np

from robusttoll import BasisSet, TollMechanismSpec, design, solve_robust_poa
from robusttoll.experiments import sweep_lambda, sweep_robust_poa

n = 8
basis = BasisSet.affine(n)

# a worst case for untolled affine games approaches 5/2 as n grows
for m in (2, 3, 20):
    b = BasisSet.affine(m)
    r = solve_robust_poa(b.values, np.zeros_like(b.values), m, 0.0)
    print("no tolls, n=%2d: PoA bound %.4f" % (m, r.poa))

deltas = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def table(rows, key, label):
    keys = sorted({r[key] for r in rows}, key=str)
    print("\n%-18s" % label + "".join("%9.2f" % d for d in deltas))
    for k in keys:
        vals = [r["poa"] for r in rows if r[key] == k]
        print("%-18s" % k + "".join("%9.3f" % v for v in vals))


# toll rules that may subsidise; with non-negative local tolls the
# constant rule no longer overtakes the local one at large delta
for neg in (True, False):
    rows = sweep_robust_poa(n=n, deltas=deltas, allow_negative=neg)
    table(rows, "mechanism", "subsidies " + ("on" if neg else "off"))

# every lambda > 0 has the same nominal bound but a different robust one
local = design(basis, TollMechanismSpec("optimal_local"))
print("\noptimal local toll, n=%d: nominal PoA %.4f" % (n, local.nominal_poa))
rows = sweep_lambda((0.5, 0.75, 1.0, 1.5, 2.0, 4.0), deltas, n=n)
table(rows, "lambda", "lambda")
