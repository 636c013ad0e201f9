"""Exact line and spin expectations on the 12-edge box.

At infinite beta every edge configuration is closed, hence a gradient, and
the Wilson line along a path equals the spin two-point function between
its endpoints.  Both sides are summed exactly here, then the same line is
shown at a few finite beta values where the two drift apart.
"""
from hlgt.acceptance import corner_path
from hlgt.cellcomplex import Box, boundary_chain
from hlgt.gibbs import INFINITY, LineObservable, Params, exact_expectation
from hlgt.spinmodel import exact_spin_expectation, two_point

box = Box.from_extent(1, 1, 1)
gamma = corner_path()
ends = [(c.base, v) for c, v in boundary_chain(gamma)]

print(f"{'kappa':>6} {'beta':>6} {'<L_gamma>':>12} {'H_kappa':>12}")
for kappa in (0.2, 0.6, 1.2):
    h = exact_spin_expectation(two_point(box, 2, ends), box, 2, kappa)
    for beta in (0.3, 1.0, INFINITY):
        line = exact_expectation(LineObservable(gamma, box, 2), Params(2, None, beta, kappa, box), box)
        print(f"{kappa:6.2f} {beta:6.2f} {line:12.8f} {h:12.8f}")
