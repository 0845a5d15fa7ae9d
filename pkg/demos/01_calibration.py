"""
Calibrating the two noise scales
================================

How much independent noise (sigma_eta) and pairwise noise (sigma_Delta)
does a population of 10^4 users need for eps = 0.1?
"""

import numpy as np

from gopa import calibration as cal

n, eps = 10_000, 0.1

# the independent noise only depends on the number of honest users
for rho in (1.0, 0.5):
    print(f"--- rho = {rho}")
    for topo in ("complete", "k_out", "worst_case"):
        plan = cal.corollary1_plan(cal.PrivacyTarget.standard(n, rho, topo, eps))
        k = f" (k={plan.k})" if plan.k else ""
        print(f"{topo:<11} sigma_eta={plan.sigma_eta:.4f}  sigma_Delta={plan.sigma_delta:9.3f}{k}")

# sparser graphs need more pairwise noise: the norm of the t-vector grows
# with the depth of the spanning tree the proof routes through
delta = 10 / n ** 2
k = cal.minimal_k(n, 1.0, delta)
print("\nsmallest k meeting the k-out conditions:", k)
print("coefficient at that k:", round(cal.kout_coefficient(n, k, 1.0), 6))

# the Monte-Carlo route embeds a tree in each sampled graph and keeps the
# worst one; much smaller k suffices in practice
res = cal.simulate_admissible(300, 1.0, 6, 50, rng_seed=0)
print(f"\nn=300, k=6: {res.connected_runs}/{res.runs} graphs connected, "
      f"admissible sigma_Delta = {res.sigma_delta:.2f}")

# utility: the variance of the average matches a trusted curator when all
# users are honest, and doubles at rho = 0.5
for rho in (1.0, 0.5):
    plan = cal.corollary1_plan(cal.PrivacyTarget.standard(n, rho, "complete", eps))
    u = cal.utility_noise_floor(plan)
    print(f"rho={rho}: Var(avg) = {u['variance']:.3e}, curator {u['curator']:.3e}, "
          f"ratio {u['ratio']:.2f}, std {np.sqrt(u['variance']):.4f}")
