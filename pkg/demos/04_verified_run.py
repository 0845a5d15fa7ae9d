"""
A verified run with one cheater
===============================

Every step is committed on a signed board and proven in zero knowledge.
An auditor who only reads the board names the user who lied.
"""

import numpy as np

from gopa.bulletin import Board, verify_run
from gopa.graph import generate_k_out
from gopa.pipeline import Fault, run_verified

n = 10
g = generate_k_out(n, 2, 4)
values = list(np.random.default_rng(1).random(n))

honest = run_verified(g, values, 0.5, 2.0, seed=1, backend="schnorr61")
v = verify_run(honest.board)
print(f"honest run: {len(honest.board)} board entries, verdict ok={v.ok}, "
      f"estimate {float(v.estimate.value):.5f}")

# user 4 adds one unit to the value it publishes
bad = run_verified(g, values, 0.5, 2.0, seed=1, backend="schnorr61", faults=[Fault("bad_sum", 4)])
v = verify_run(Board.from_bytes(bad.board.to_bytes()))
print("with a bad sum: ok =", v.ok)
for u, why in v.cheaters.items():
    print(f"  cheater {u}: {', '.join(why)}")

# a user who skews its noise is caught by the Gaussian derivation proof
skew = run_verified(g, values, 0.5, 2.0, seed=1, backend="schnorr61", faults=[Fault("bad_distribution", 2)])
print("with skewed noise: flagged", sorted(verify_run(skew.board).flagged))
