"""
What colluding users see
========================

Malicious users know their own pairwise terms, so they can subtract them.
What remains of the honest values is X + eta + (honest-honest terms), whose
covariance is sigma_eta^2 I + sigma_Delta^2 L with L the Laplacian of the
honest subgraph.
"""

import numpy as np

from gopa.graph import generate_k_out, induce
from gopa.protocol import laplacian, simulate_runs

g = generate_k_out(40, 4, 2)
bad = [1, 5, 9, 13, 17]
honest = [u for u in range(g.n) if u not in bad]
se, sd = 1.0, 3.0

res = simulate_runs(g, np.full(g.n, 0.5), se, sd, 20_000, seed=0, malicious=bad, keep_view=True)
emp = np.cov(res.x_hat_H, rowvar=False)
L = laplacian(induce(g, honest).graph)
model = se ** 2 * np.eye(len(honest)) + sd ** 2 * L

print("empirical covariance (top-left corner):")
print(np.round(emp[:4, :4], 2))
print("model:")
print(np.round(model[:4, :4], 2))
print("relative Frobenius distance:", round(np.linalg.norm(emp - model) / np.linalg.norm(model), 4))

# neighbours are negatively correlated, non-neighbours independent
i, j = np.argwhere(np.triu(L, 1) < 0)[0]
print(f"\nhonest {honest[i]} and {honest[j]} share an edge: cov = {emp[i, j]:.2f} (model {-sd ** 2:.0f})")
