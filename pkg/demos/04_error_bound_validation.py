#!/usr/bin/env python3
"""The finite error bound against a simulated noisy run.

Fixes one instance, runs 20 noisy trials in the fixed-participation (top-b)
regime, and overlays the analytical optimality-gap bound evaluated with the
measured model-norm bound G.  Both algebraic variants of the bound are
printed; the proved form (prefactor L/2) is the one the empirical mean must
stay below, and it does at every round.
"""

import numpy as np

from airfed import (
    BoundInputs,
    ChannelParams,
    GenConfig,
    gen_problem,
    run_algorithm,
    theorem2_bound,
)

TRIALS, ROUNDS = 20, 400

gen = GenConfig(n_devices=100, samples_per_device=200, dim=6,
                data_noise_var=0.25)
chan = ChannelParams(noise_var=1.0, threshold=0.5, max_power=10.0,
                     selection="top_b", top_b=50)
prob = gen_problem(gen, np.random.default_rng(2024))

traces = [run_algorithm(prob, "fedsplit", chan, ROUNDS,
                        np.random.default_rng(5 ^ i)) for i in range(TRIALS)]
mean_gap = np.stack([t.gaps for t in traces]).mean(axis=0)
g_measured = max(t.g_measured for t in traces)

inp = BoundInputs(delta0=traces[0].delta0, kappa=prob.kappa,
                  lip_sum=prob.lip_sum, g_bound=g_measured, b=chan.top_b,
                  dim=prob.dim, noise_var=chan.noise_var,
                  threshold=chan.threshold, max_power=chan.max_power)

print(f"instance: kappa = {prob.kappa:.3f}, L = {prob.lip_sum:.1f}, "
      f"measured G = {g_measured:.3f}, delta0 = {traces[0].delta0:.3f}")
print(f"{'round':>6} {'mean gap':>12} {'bound (proved)':>15} {'bound (stated)':>15}")
for t in (1, 2, 3, 5, 10, 50, 100, 400):
    proved = theorem2_bound(inp, t, "as_proved")
    stated = theorem2_bound(inp, t, "as_stated")
    print(f"{t:>6} {mean_gap[t - 1]:>12.4e} {proved:>15.4e} {stated:>15.4e}")

bound = np.array([theorem2_bound(inp, t, "as_proved")
                  for t in range(1, ROUNDS + 1)])
violations = int(np.sum(mean_gap > bound))
print(f"\nrounds where the mean gap exceeds the proved-form bound: "
      f"{violations} of {ROUNDS}")
print(f"smallest bound/gap slack: {np.min(bound / mean_gap):.2f}x")
print("note: the stated-form bound (prefactor delta0/(2L)) sits below the "
      "empirical floor here, which is why the proved form is the default "
      "for validation")
