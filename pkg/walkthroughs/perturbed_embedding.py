"""
The embedding of a perturbed metric
===================================

Add a small conformal bump to the hyperbolic metric and compare the
perturbed embedding with the exact one.
"""
import numpy as np

from hypfill import EmbeddingField, MetricField, default_bump, differential, make_grid
from hypfill import hyperboloid as hb
from hypfill.verification import normal_part

grid = make_grid(2, 720)
exact = EmbeddingField(MetricField(2, 3.0), grid)
pert = EmbeddingField(MetricField(2, 3.0, default_bump(0.05)), grid)

# the Busemann functions change by a small amount near the bump
z = np.array([0.2, 0.1])
d = pert.at_chart(z).phi - exact.at_chart(z).phi
print("max change of Phi:", np.abs(d).max())

# every gradient still has unit length
p = pert.at_chart(z)
print("gradient norms in [%.8f, %.8f]" % tuple(np.linalg.norm(p.grad, axis=1)[[0, -1]]))

# on the image of Phi the matrix A is still the identity
print("on the image:  |A - I| =", np.abs(differential(pert, p.phi).A - np.eye(2)).max())

# off the image it is not, and the defect is first order in the bump
x = hb.disc_to_hyperboloid(z)
delta = normal_part(pert, x, np.cos(3 * grid.angles))
phi = p.phi + 0.3 * delta / np.abs(delta).max()
for e, field in ((0.0, exact), (0.05, pert)):
    A = differential(field, phi).A
    print(f"eps={e}: |A - I| = {np.abs(A - np.eye(2)).max():.2e}, det A - 1 = {np.linalg.det(A) - 1:.2e}")
