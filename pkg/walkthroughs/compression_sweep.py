"""
Compressing the projection
==========================

The compressed projection pulls far-away images towards the origin and
bounds the Jacobian by ``1 - c h^2``.
"""
import numpy as np

from hypfill import EmbeddingField, MetricField, make_grid
from hypfill.compression import compression
from hypfill.verification import SweepConfig, sample_phi

emb = EmbeddingField(MetricField(2, 3.0), make_grid(2, 720))
cfg = SweepConfig()
rng = cfg.rng("walkthrough")

rows = []
for _ in range(20):
    phi = sample_phi(cfg, "ball", rng, emb)
    c = compression(emb, phi, sigma=0.1)
    rows.append((c.h, c.J))
rows = np.array(rows)

# the ratio (1 - J) / h^2 stays away from zero
ratio = (1 - rows[:, 1]) / rows[:, 0] ** 2
print("h range    ", rows[:, 0].min(), rows[:, 0].max())
print("min ratio  ", ratio.min())
