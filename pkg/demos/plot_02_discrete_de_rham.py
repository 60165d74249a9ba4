"""
The discrete de Rham complex on polygons
========================================

Interpolate a smooth form, differentiate discretely, and compare with the
interpolate of the exact derivative.  Then build a lifting for a random
discrete form and check it against the spectral bound.
"""

####
# A seeded random polygonal mesh: agglomerated triangles with curved-looking
# cell boundaries.

import numpy as np

from formdeck.ddr import DDRComplex
from formdeck.generators import polygon_mesh
from formdeck.geometry import ambient_geometry
from formdeck.poincare import construct_lifting, spectral_constant
from formdeck.polyform import exterior_derivative, random_polyform

mesh = polygon_mesh(2, seed=3)
X = DDRComplex(mesh, 1)
print("space dimensions:", X.dims)

####
# The interpolator commutes with d for polynomial forms of the complex degree.

rng = np.random.default_rng(1)
geom = ambient_geometry(2)
eta = random_polyform(rng, 2, 0, 1)
lhs = X.global_d(X.interpolate(eta, 0, geom)).values
rhs = X.interpolate(exterior_derivative(eta), 1, geom).values
print("commutation defect:", np.abs(lhs - rhs).max())

####
# d applied twice vanishes exactly on arbitrary discrete forms, not only on
# interpolates.

w = X.random(0, rng)
print("|d d w| =", np.abs(X.global_d(X.global_d(w)).values).max())

####
# The spectral constant is the reciprocal of the smallest nonzero singular
# value of d in the discrete norms.  A lifting of d omega never beats it by
# more than roundoff.

spectral = spectral_constant(X, 1)
omega = X.random(1, rng)
lift = construct_lifting(X, omega)
print("spectral constant:", round(spectral.constant, 4), "harmonic dim:", spectral.harmonic_dim)
print("lifting ratio:", round(lift.ratio, 4), "residual:", lift.residual)
