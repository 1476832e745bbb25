#!/usr/bin/env python3
"""Error-free splitting: linear convergence to the true optimum.

Generates a well-conditioned federated least-squares instance (100 devices,
200 samples each, 6 parameters), runs the splitting iteration with a perfect
channel at the analytical step size, and compares the per-round distance to
the optimum against the contraction bound rho^t * sqrt(delta0) with
rho = 1 - 2/(sqrt(kappa) + 1).

The iteration reaches the global optimum itself (gap below 1e-10 within a
few dozen rounds), not merely a consensus fixed point.
"""

import math

import numpy as np

from airfed import (
    ERROR_FREE,
    FedSplitState,
    GenConfig,
    ProxOperator,
    contraction_factor,
    default_step,
    fedsplit_round,
    fixed_points,
    gen_problem,
    run_algorithm,
)

cfg = GenConfig(n_devices=100, samples_per_device=200, dim=6,
                data_noise_var=0.25)
rng = np.random.default_rng(7)
prob = gen_problem(cfg, rng)
s = default_step(prob)
fp = fixed_points(prob, s)
delta0 = float(np.mean(np.sum(fp ** 2, axis=1)))
rho = contraction_factor(prob.kappa)

print(f"instance: kappa = {prob.kappa:.3f}, step = {s:.5f}, "
      f"delta0 = {delta0:.4f}, contraction factor = {rho:.4f}")
print(f"{'round':>5} {'distance':>12} {'bound':>12} {'ratio':>8}")

state = FedSplitState(local_models=np.zeros((prob.n_devices, prob.dim)),
                      server_estimate=np.zeros(prob.dim), step=s)
prox_op = ProxOperator(prob, s)
for t in range(12):
    state, _ = fedsplit_round(prob, state, ERROR_FREE, rng, prox_op=prox_op)
    dist = float(np.linalg.norm(state.server_estimate - prob.theta_star))
    bound = rho ** t * math.sqrt(delta0)
    print(f"{t + 1:>5} {dist:>12.4e} {bound:>12.4e} {dist / bound:>8.4f}")

trace = run_algorithm(prob, "fedsplit", ERROR_FREE, 400,
                      np.random.default_rng(7))
print(f"\nafter 400 rounds the optimality gap is {trace.final_gap:.3e} "
      "(global optimality, not a biased fixed point)")
