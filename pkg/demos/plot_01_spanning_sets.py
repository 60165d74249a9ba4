"""
Cycles, boundaries and the cell lift
====================================

A single square split along its diagonal is the smallest polytope whose
simplicial refinement has interior structure.  We build it by hand, look at
the cycle the spanning-set construction selects, and then push a random
cochain through the lift and back.
"""

####
# Build the mesh from explicit coordinates and member simplices.

import numpy as np

from formdeck.lift import LiftContext, cochain_poincare, weighted_poincare_constant
from formdeck.generators import square_mesh
from formdeck.mesh import build_mesh
from formdeck.topology import betti_numbers, construct_spanning_set, polytopal_complex

mesh = build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]],
                  [[[(i,)] for i in range(4)],
                   [[(0, 1)], [(1, 2)], [(2, 3)], [(0, 3)]],
                   [[(0, 1, 2), (0, 2, 3)]]])
print(mesh.num_cells(0), mesh.num_cells(1), mesh.num_cells(2), "cells by dimension")

####
# The square has one interior edge, the diagonal.  Its 1-cycles that are not
# already boundary cycles form a one-dimensional space.  The selected cycle
# puts weight one on the diagonal and magnitude one half on each boundary
# edge.

spanning = construct_spanning_set(mesh, mesh.cells[2][0], 1)
cycle = spanning.cycles[0]
print("accepted simplices:", spanning.simplices)
print("cycle coefficients:", np.round(cycle.coeffs, 3))
print("duality matrix:", spanning.duality_matrix())

####
# Lifting a polytopal cochain to the simplicial refinement commutes with the
# coboundary, and integrating back over the members recovers the input.

ctx = LiftContext(mesh)
rng = np.random.default_rng(0)
lam = rng.standard_normal(mesh.num_cells(1))
print("cochain map defect:", ctx.cochain_map_defect(1, lam))
print("left inverse defect:", ctx.left_inverse_defect(1, lam))

####
# On a refined square, the weighted Poincare constant of the cochain complex
# stays bounded as the mesh shrinks.

for level in (1, 2, 3):
    ctx = LiftContext(square_mesh(level))
    print(level, round(weighted_poincare_constant(ctx, 1), 4))

####
# Any coboundary has a preimage, and the measured weighted ratio is below the
# worst case for that level.

ctx = LiftContext(square_mesh(2))
xi = ctx.cell_coboundary(0) @ rng.standard_normal(ctx.mesh.num_cells(0))
res = cochain_poincare(ctx, xi, 0)
print("residual", res.residual, "ratio", round(res.weighted_ratio, 4))
print("betti numbers", betti_numbers(polytopal_complex(ctx.mesh)))
