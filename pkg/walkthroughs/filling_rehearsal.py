"""
A discrete filling rehearsal
============================

Fill a hyperbolic disc with itself and with a slightly larger metric, and
compare volumes along the chain of inequalities.
"""
from hypfill import EmbeddingField, MetricField, make_grid
from hypfill.filling import DominationError, bump_factor, filling_report, make_disc_mesh

emb = EmbeddingField(MetricField(2, 3.0), make_grid(2, 720))
g = make_disc_mesh(0.6, 2000)

# same metric: all volumes agree up to discretisation
rep = filling_report(emb, g, g)
for k, v in rep["chain"].items():
    print(f"{k:20s} {v:.5f}")

# a larger competitor fills with strictly more volume
big = make_disc_mesh(0.6, 2000, factor=bump_factor(0.1))
print("enlarged", filling_report(emb, g, big)["chain"]["vol_M_prime"])

# a smaller one fails the boundary domination test
try:
    filling_report(emb, g, make_disc_mesh(0.6, 2000, factor=bump_factor(-0.3)))
except DominationError as exc:
    print("rejected:", exc)
