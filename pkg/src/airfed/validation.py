"""Built-in validation suites.

Each suite re-derives a family of invariants with an independent route
(inner iterative solvers, Monte Carlo moments, analytical bounds) and
reports one line per check: measured value, tolerance, pass/fail.  The CLI
maps these to ``airfed validate <suite>`` and reflects the overall outcome
in its exit status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import FedSplitState, ProxOperator, fedsplit_round, run_algorithm
from .channel import ERROR_FREE, ChannelParams, precode, transmit_round
from .errors import ConfigError
from .harness import problem_seed, trial_seed
from .linalg import complex_gaussian
from .problems import (DeviceProblem, GenConfig, fixed_points, gen_problem,
                       gradient, prox)
from .theory import BoundInputs, contraction_factor, theorem2_bound

SUITES = ("prox", "channel", "estimator", "bounds", "all")


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: str
    passed: bool


@dataclass
class ValidationReport:
    suite: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, tolerance: str, passed: bool) -> None:
        self.checks.append(Check(name, float(value), tolerance, bool(passed)))

    def render(self) -> str:
        lines = [f"validation suite: {self.suite}"]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: measured={c.value:.6g} ({c.tolerance})")
        verdict = "all checks passed" if self.passed else "FAILURES PRESENT"
        lines.append(f"result: {verdict}")
        return "\n".join(lines)

    def extend(self, other: "ValidationReport") -> None:
        self.checks.extend(other.checks)


def _well_gen(n_devices: int = 100) -> GenConfig:
    return GenConfig(n_devices=n_devices, samples_per_device=200, dim=6,
                     data_noise_var=0.25)


def prox_by_gradient_descent(dev: DeviceProblem, s: float, z: np.ndarray,
                             tol: float = 1e-12, max_iter: int = 50000) -> np.ndarray:
    """Independent prox oracle: plain gradient descent on the prox objective.

    Minimizes ``f(x) + ||x - z||^2 / (2s)`` with the optimal fixed step for
    its curvature, down to a gradient norm of ``tol * (1 + ||z||)``.
    """
    ell = dev.ell + 1.0 / s
    lip = dev.lip + 1.0 / s
    step = 2.0 / (ell + lip)
    z = np.asarray(z, dtype=float)
    stop = tol * (1.0 + float(np.linalg.norm(z)))
    x = z.copy()
    for _ in range(max_iter):
        g = gradient(dev, x) + (x - z) / s
        if float(np.linalg.norm(g)) <= stop:
            break
        x = x - step * g
    return x


def suite_prox(seed: int, n_instances: int = 100) -> ValidationReport:
    """Closed-form prox vs an iterative inner minimizer, plus its invariants."""
    report = ValidationReport("prox")
    rng = np.random.default_rng(seed)
    worst_diff = 0.0
    worst_resid = 0.0
    worst_ratio = 0.0
    for _ in range(n_instances):
        m, d = 30, 6
        x_mat = rng.standard_normal((m, d))
        theta0 = rng.standard_normal(d)
        y = x_mat @ theta0 + 0.5 * rng.standard_normal(m)
        dev = DeviceProblem.from_data(x_mat, y)
        s = float(10.0 ** rng.uniform(-3.0, 0.0))
        z1 = 3.0 * rng.standard_normal(d)
        z2 = 3.0 * rng.standard_normal(d)

        p1 = prox(dev, s, z1)
        p2 = prox(dev, s, z2)
        p_iter = prox_by_gradient_descent(dev, s, z1)
        worst_diff = max(worst_diff, float(np.linalg.norm(p1 - p_iter)))

        resid = np.linalg.norm(gradient(dev, p1) + (p1 - z1) / s)
        worst_resid = max(worst_resid,
                          float(resid) / (1.0 + float(np.linalg.norm(z1))))

        dz = float(np.linalg.norm(z1 - z2))
        if dz > 0:
            worst_ratio = max(worst_ratio,
                              float(np.linalg.norm(p1 - p2)) / dz)

    report.add("closed_form_vs_inner_gd", worst_diff, "<= 1e-8",
               worst_diff <= 1e-8)
    report.add("optimality_residual_normalized", worst_resid,
               "<= 1e-9 * (1 + ||z||)", worst_resid <= 1e-9)
    report.add("nonexpansiveness_ratio", worst_ratio, "<= 1 + 1e-12",
               worst_ratio <= 1.0 + 1e-12)
    return report


def suite_channel(seed: int, n_rounds: int = 50,
                  mc_samples: int = 1_000_000) -> ValidationReport:
    """Transceiver exactness and fading statistics."""
    report = ValidationReport("channel")
    rng = np.random.default_rng(seed)
    n, d, p0, gamma = 40, 6, 10.0, 0.5
    params = ChannelParams(noise_var=0.0, threshold=gamma, max_power=p0)

    worst_avg_err = 0.0
    worst_power = 0.0
    worst_inversion = 0.0
    threshold_exact = True
    for t in range(n_rounds):
        models = (0.5 + 2.0 * rng.random()) * rng.standard_normal((n, d))
        chan_round, recovered = transmit_round(models, params, rng, round_index=t)
        flags = chan_round.selected
        mags = np.abs(chan_round.coeffs)
        threshold_exact &= bool(np.array_equal(flags, mags >= gamma))
        if recovered is None:
            continue
        sel_avg = models[flags].mean(axis=0)
        scale = 1.0 + float(np.linalg.norm(sel_avg))
        worst_avg_err = max(worst_avg_err, float(
            np.linalg.norm(recovered.estimate - sel_avg)) / scale)
        alpha = chan_round.alpha
        sel = np.nonzero(flags)[0]
        powers = alpha * np.sum(models[sel] ** 2, axis=1) / mags[sel] ** 2
        worst_power = max(worst_power, float(powers.max()))
        # channel-inversion identity h * x = sqrt(alpha) * model, componentwise
        for i in sel[:5]:
            x = precode(models[i], chan_round.coeffs[i], alpha, True)
            err = np.max(np.abs(chan_round.coeffs[i] * x
                                - math.sqrt(alpha) * models[i]))
            worst_inversion = max(worst_inversion, float(err))

    report.add("noiseless_end_to_end_error", worst_avg_err,
               "<= 1e-10 (normalized)", worst_avg_err <= 1e-10)
    report.add("max_transmit_power", worst_power, f"<= {p0} + 1e-12",
               worst_power <= p0 + 1e-12)
    report.add("inversion_identity_error", worst_inversion, "<= 1e-12",
               worst_inversion <= 1e-12)
    report.add("threshold_selection_exact", 1.0 if threshold_exact else 0.0,
               "== 1", threshold_exact)

    fades = complex_gaussian(1.0, rng, mc_samples)
    mean_power = float(np.mean(np.abs(fades) ** 2))
    report.add("fading_mean_power", mean_power, "in [0.995, 1.005]",
               0.995 <= mean_power <= 1.005)
    sel_prob = float(np.mean(np.abs(fades) >= gamma))
    target = math.exp(-gamma * gamma)
    report.add("selection_probability_error", abs(sel_prob - target),
               "<= 0.002 vs exp(-gamma^2)", abs(sel_prob - target) <= 0.002)
    return report


def suite_estimator(seed: int, n_rounds: int = 100_000) -> ValidationReport:
    """Monte Carlo checks of the recovery estimator's moments."""
    report = ValidationReport("estimator")
    rng = np.random.default_rng(seed)
    n, d, b = 30, 6, 8
    gamma, p0, noise_var = 0.5, 10.0, 1.0
    models = rng.standard_normal((n, d)) + rng.standard_normal((1, d))
    theta_bar = models.mean(axis=0)

    # (a) unbiasedness under with-replacement sampling, through the full
    # transceiver path.
    params = ChannelParams(noise_var=noise_var, threshold=gamma, max_power=p0,
                           selection="with_replacement", top_b=b)
    estimates = np.empty((n_rounds, d))
    for t in range(n_rounds):
        _, recovered = transmit_round(models, params, rng, round_index=t)
        estimates[t] = recovered.estimate
    mean_est = estimates.mean(axis=0)
    stderr = estimates.std(axis=0, ddof=1) / math.sqrt(n_rounds)
    worst_sigmas = float(np.max(np.abs(mean_est - theta_bar) / stderr))
    report.add("estimator_bias_sigmas", worst_sigmas, "<= 3 standard errors",
               worst_sigmas <= 3.0)

    # (b) expected squared norm of the equivalent noise at fixed alpha and B.
    alpha_fixed, b_fixed = 0.7, 12
    w = complex_gaussian(noise_var, rng, n_rounds * d).reshape(n_rounds, d)
    w_eq = w / (math.sqrt(alpha_fixed) * b_fixed)
    measured = float(np.mean(np.sum(np.abs(w_eq) ** 2, axis=1)))
    expected = d * noise_var / (alpha_fixed * b_fixed ** 2)
    rel = abs(measured / expected - 1.0)
    report.add("equivalent_noise_norm_rel_error", rel, "<= 1%", rel <= 0.01)

    # (c) subset-sampling variance identity under with-replacement draws.
    idx = rng.integers(0, n, size=(n_rounds, b))
    subset_means = models[idx].mean(axis=1)
    measured_var = float(np.mean(np.sum((subset_means - theta_bar) ** 2, axis=1)))
    identity = (np.sum(models ** 2) / (b * n)
                - float(theta_bar @ theta_bar) / b)
    rel_var = abs(measured_var / identity - 1.0)
    report.add("sampling_variance_identity_rel_error", rel_var, "<= 2%",
               rel_var <= 0.02)
    return report


def suite_bounds(seed: int, n_instances: int = 20, trials: int = 20,
                 rounds_noisy: int = 400) -> ValidationReport:
    """Trajectory bound and finite error bound against simulated runs."""
    report = ValidationReport("bounds")

    # Trajectory bound on error-free runs, one fresh instance per trial.
    # Horizon 15 keeps both sides far above the floating-point floor of the
    # iteration (the bound decays geometrically and would cross ~1e-15 after
    # about 20 rounds on these instances).
    horizon = 15
    violations = 0
    worst_ratio = 0.0
    for i in range(n_instances):
        rng = np.random.default_rng(trial_seed(seed, i))
        prob = gen_problem(_well_gen(), rng)
        trace_rng = np.random.default_rng(trial_seed(seed, i) + 1)
        state = FedSplitState(
            local_models=np.zeros((prob.n_devices, prob.dim)),
            server_estimate=np.zeros(prob.dim),
            step=1.0 / math.sqrt(prob.ell_star * prob.lip_star))
        prox_op = ProxOperator(prob, state.step)
        fp = fixed_points(prob, state.step)
        delta0 = float(np.mean(np.sum(fp ** 2, axis=1)))
        rho = contraction_factor(prob.kappa)
        for t in range(horizon):
            state, _ = fedsplit_round(prob, state, ERROR_FREE, trace_rng,
                                      prox_op=prox_op)
            dist = float(np.linalg.norm(state.server_estimate - prob.theta_star))
            bound = rho ** t * math.sqrt(delta0)
            ratio = dist / bound if bound > 0 else math.inf
            worst_ratio = max(worst_ratio, ratio)
            if dist > bound * (1.0 + 1e-9):
                violations += 1
    report.add("trajectory_bound_violations", violations, "== 0", violations == 0)
    report.add("trajectory_bound_worst_ratio", worst_ratio, "<= 1 + 1e-9",
               worst_ratio <= 1.0 + 1e-9)

    # Finite error bound on noisy runs with a fixed participating-set size.
    prob = gen_problem(_well_gen(), np.random.default_rng(problem_seed(seed)))
    chan = ChannelParams(noise_var=1.0, threshold=0.5, max_power=10.0,
                         selection="top_b", top_b=50)
    traces = [run_algorithm(prob, "fedsplit", chan, rounds_noisy,
                            np.random.default_rng(trial_seed(seed, i)))
              for i in range(trials)]
    mean_gap = np.stack([t.gaps for t in traces]).mean(axis=0)
    g_measured = max(t.g_measured for t in traces)
    inp = BoundInputs(delta0=traces[0].delta0, kappa=prob.kappa,
                      lip_sum=prob.lip_sum, g_bound=g_measured, b=50,
                      dim=prob.dim, noise_var=chan.noise_var,
                      threshold=chan.threshold, max_power=chan.max_power)
    bound = np.array([theorem2_bound(inp, t, "as_proved")
                      for t in range(1, rounds_noisy + 1)])
    gap_violations = int(np.sum(mean_gap > bound))
    min_slack = float(np.min(bound / np.maximum(mean_gap, 1e-300)))
    report.add("error_bound_violations", gap_violations, "== 0",
               gap_violations == 0)
    report.add("error_bound_min_slack", min_slack, ">= 1", min_slack >= 1.0)

    # Pure algebra: the two bound variants differ exactly by lip_sum^2.
    rng = np.random.default_rng(seed)
    worst_alg = 0.0
    for _ in range(10):
        inp2 = BoundInputs(delta0=float(rng.uniform(0, 5)),
                           kappa=float(rng.uniform(1, 100)),
                           lip_sum=float(rng.uniform(0.1, 1e4)),
                           g_bound=float(rng.uniform(0.1, 10)),
                           b=int(rng.integers(1, 100)), dim=6,
                           noise_var=float(rng.uniform(0, 2)),
                           threshold=0.5, max_power=10.0)
        t = int(rng.integers(0, 50))
        stated = theorem2_bound(inp2, t, "as_stated")
        proved = theorem2_bound(inp2, t, "as_proved")
        worst_alg = max(worst_alg,
                        abs(proved / (stated * inp2.lip_sum ** 2) - 1.0))
    report.add("bound_variant_ratio_is_L_squared", worst_alg, "<= 1e-9",
               worst_alg <= 1e-9)
    return report


def validate(suite: str, seed: int = 1) -> ValidationReport:
    """Run one named suite (or ``"all"``) and return its report."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {SUITES}")
    if suite == "prox":
        return suite_prox(seed)
    if suite == "channel":
        return suite_channel(seed)
    if suite == "estimator":
        return suite_estimator(seed)
    if suite == "bounds":
        return suite_bounds(seed)
    combined = ValidationReport("all")
    for name in ("prox", "channel", "estimator", "bounds"):
        combined.extend(validate(name, seed))
    return combined
