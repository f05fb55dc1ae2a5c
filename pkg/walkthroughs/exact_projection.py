"""
Projecting boundary functions back to hyperbolic space
======================================================

Embed the hyperbolic plane into functions on the circle, perturb an image
point, and watch the projection recover it.
"""
import numpy as np

from hypfill import EmbeddingField, MetricField, make_grid, project
from hypfill import hyperboloid as hb

# the exact embedding: Busemann functions sampled on 720 circle nodes
emb = EmbeddingField(MetricField(2, 3.0), make_grid(2, 720))

# a point of the disc chart and its image
z = np.array([0.3, -0.2])
x = hb.disc_to_hyperboloid(z)
phi = emb.phi_embed(x)

# P(Phi(x)) = x up to the Newton tolerance
res = project(emb, phi)
print("recovered", res.z, "in", res.iterations, "Newton steps")

# adding a constant does not move the projection
print("shifted  ", project(emb, phi + 0.7).z)

# a genuine perturbation moves it, but only a little
bump = 0.05 * np.cos(emb.grid.angles - 1.0)
print("perturbed", project(emb, phi + bump).z)
