"""Federated iterations: splitting over the air, and gradient baselines.

Three algorithms share the transceiver:

* ``fedsplit``: every device applies a local prox step and a local centering
  (reflection) step against the broadcast estimate, then the selected devices
  transmit their new local models; the server recovers the (noisy, subset)
  average and broadcasts it.
* ``gbma``: devices transmit local gradients through the identical channel;
  the server takes a gradient step scaled by the selected count so the
  error-free, all-selected limit is exact full-gradient descent.
* ``fedsgd``: ``gbma`` with a perfect channel and one local gradient step.

A perfect channel is requested by passing ``ERROR_FREE`` instead of
:class:`~airfed.channel.ChannelParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ERROR_FREE, ChannelParams, ErrorFree, transmit_round
from .errors import DimensionMismatch, NonPositiveStep
from .problems import DeviceProblem, FederatedProblem, fixed_points, optimality_gap, prox

ALGORITHMS = ("fedsplit", "gbma", "fedsgd")


def default_step(prob: FederatedProblem) -> float:
    """Splitting step size ``1 / sqrt(ell_star * lip_star)``."""
    return 1.0 / math.sqrt(prob.ell_star * prob.lip_star)


def default_rate(prob: FederatedProblem) -> float:
    """Fixed gradient-descent rate ``2 / (sum ell_n + sum L_n)``.

    This is the classical optimal fixed step for a strongly convex smooth
    objective, evaluated with the summed per-device constants, so the
    gradient baseline runs at its best fixed-step rate.
    """
    return 2.0 / (prob.ell_sum + prob.lip_sum)


@dataclass
class FedSplitState:
    """Local models, the server broadcast, and the step size."""

    local_models: np.ndarray      # (n_devices, dim)
    server_estimate: np.ndarray   # (dim,)
    step: float
    round_index: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise NonPositiveStep(f"step must be > 0, got {self.step}")


@dataclass
class GdState:
    """Server model and hyperparameters of the gradient baseline."""

    server_model: np.ndarray      # (dim,)
    rate: float
    local_steps: int = 1
    round_index: int = 0

    def __post_init__(self):
        if self.rate <= 0:
            raise NonPositiveStep(f"rate must be > 0, got {self.rate}")
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")


@dataclass(frozen=True)
class RoundRecord:
    """Per-round trace entry."""

    round_index: int
    gap: float
    selected_count: int
    alpha: float
    eff_noise_var: float


@dataclass
class TrialTrace:
    """Full per-round record of one seeded run plus its terminal summary."""

    records: list[RoundRecord] = field(default_factory=list)
    delta0: float = 0.0
    g_measured: float = 0.0

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])

    @property
    def selected_counts(self) -> np.ndarray:
        return np.array([r.selected_count for r in self.records], dtype=float)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha for r in self.records])


class ProxOperator:
    """Batched closed-form prox for every device at a fixed step size.

    The shifted Gram matrices ``X_n^T X_n + I/s`` are inverted once; each
    round is then a single batched matvec.  The shift ``1/s`` keeps the
    matrices well conditioned, so the explicit inverse is safe here.
    """

    def __init__(self, prob: FederatedProblem, step: float):
        if step <= 0:
            raise NonPositiveStep(f"step must be > 0, got {step}")
        shifted = prob.gram_stack + np.eye(prob.dim) / step
        self._inv = np.linalg.inv(shifted)
        self._xty = prob.xty_stack
        self._step = step

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """Prox of every device at the rows of ``z`` (shape (n_devices, dim))."""
        return np.einsum("nij,nj->ni", self._inv, self._xty + z / self._step)


def fedsplit_local_update(dev: DeviceProblem, server_est: np.ndarray,
                          local: np.ndarray, s: float) -> np.ndarray:
    """One device's prox-then-center update against the broadcast.

    ``local + 2 * (prox_s(2 * server_est - local) - server_est)``.
    """
    server_est = np.asarray(server_est, dtype=float)
    local = np.asarray(local, dtype=float)
    if server_est.shape != local.shape:
        raise DimensionMismatch("server estimate and local model differ in shape")
    half = prox(dev, s, 2.0 * server_est - local)
    return local + 2.0 * (half - server_est)


def fedsplit_round(prob: FederatedProblem, state: FedSplitState,
                   chan: ChannelParams | ErrorFree, rng: np.random.Generator,
                   prox_op: ProxOperator | None = None
                   ) -> tuple[FedSplitState, RoundRecord]:
    """Advance the splitting iteration by one communication round.

    All devices update their local models against the current broadcast;
    the new models are then either averaged exactly (``ERROR_FREE``) or sent
    through the fading MAC.  If nothing is transmitted (empty selection or a
    deferred top-b round) the server keeps its previous estimate and the
    round still counts.
    """
    if prox_op is None:
        prox_op = ProxOperator(prob, state.step)
    theta_hat = state.server_estimate
    reflected = 2.0 * theta_hat[None, :] - state.local_models
    new_locals = state.local_models + 2.0 * (prox_op(reflected) - theta_hat[None, :])

    if isinstance(chan, ErrorFree):
        new_est = new_locals.mean(axis=0)
        selected, alpha, eff = prob.n_devices, float("nan"), float("nan")
    else:
        chan_round, recovered = transmit_round(new_locals, chan, rng,
                                               round_index=state.round_index)
        if recovered is None:
            new_est = theta_hat.copy()
            selected, alpha, eff = 0, 0.0, float("nan")
        else:
            new_est = recovered.estimate
            selected = recovered.selected_count
            alpha = chan_round.alpha
            eff = recovered.eff_noise_var

    next_state = FedSplitState(local_models=new_locals, server_estimate=new_est,
                               step=state.step, round_index=state.round_index + 1)
    record = RoundRecord(round_index=next_state.round_index,
                         gap=optimality_gap(prob, new_est),
                         selected_count=selected, alpha=alpha, eff_noise_var=eff)
    return next_state, record


def _gradient_payloads(prob: FederatedProblem, theta: np.ndarray,
                       rate: float, local_steps: int) -> np.ndarray:
    """Per-device payloads for the gradient baseline.

    With one local step the payload is the plain local gradient at ``theta``.
    With ``e > 1`` each device accumulates the gradients along ``e`` local
    descent steps, so an exact recovery applies all of them at once.
    """
    grads = np.einsum("nij,j->ni", prob.gram_stack, theta) - prob.xty_stack
    if local_steps == 1:
        return grads
    models = np.broadcast_to(theta, grads.shape).copy()
    payload = np.zeros_like(grads)
    g = grads
    for _ in range(local_steps):
        payload += g
        models = models - rate * g
        g = np.einsum("nij,nj->ni", prob.gram_stack, models) - prob.xty_stack
    return payload


def gbma_round(prob: FederatedProblem, state: GdState,
               chan: ChannelParams | ErrorFree, rng: np.random.Generator
               ) -> tuple[GdState, RoundRecord]:
    """Advance the gradient baseline by one communication round.

    Selected devices transmit their local gradients through the same
    precode/superpose/recover chain used for models; the server update is
    ``theta - rate * |B| * recovered_average``, whose error-free all-selected
    limit is full-gradient descent.
    """
    theta = state.server_model
    payloads = _gradient_payloads(prob, theta, state.rate, state.local_steps)

    if isinstance(chan, ErrorFree):
        new_theta = theta - state.rate * payloads.sum(axis=0)
        selected, alpha, eff = prob.n_devices, float("nan"), float("nan")
    else:
        chan_round, recovered = transmit_round(payloads, chan, rng,
                                               round_index=state.round_index)
        if recovered is None:
            new_theta = theta.copy()
            selected, alpha, eff = 0, 0.0, float("nan")
        else:
            selected = recovered.selected_count
            new_theta = theta - state.rate * selected * recovered.estimate
            alpha = chan_round.alpha
            eff = recovered.eff_noise_var

    next_state = GdState(server_model=new_theta, rate=state.rate,
                         local_steps=state.local_steps,
                         round_index=state.round_index + 1)
    record = RoundRecord(round_index=next_state.round_index,
                         gap=optimality_gap(prob, new_theta),
                         selected_count=selected, alpha=alpha, eff_noise_var=eff)
    return next_state, record


def run_algorithm(prob: FederatedProblem, algo: str,
                  chan: ChannelParams | ErrorFree, rounds: int,
                  rng: np.random.Generator, *, step: float | None = None,
                  rate: float | None = None, local_steps: int = 1) -> TrialTrace:
    """Run ``rounds`` communication rounds from the all-zeros initialization.

    ``delta0`` in the returned trace is the mean squared distance of the
    zero initialization to the splitting fixed points at the run's step size
    (the default step when the run is a gradient baseline), and
    ``g_measured`` is the largest local-model norm seen during the run (the
    server iterate norm for the gradient baselines).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")

    s = step if step is not None else default_step(prob)
    fp = fixed_points(prob, s)
    delta0 = float(np.mean(np.sum(fp ** 2, axis=1)))  # start is all zeros

    trace = TrialTrace(delta0=delta0)
    g_max = 0.0

    if algo == "fedsplit":
        state = FedSplitState(local_models=np.zeros((prob.n_devices, prob.dim)),
                              server_estimate=np.zeros(prob.dim), step=s)
        prox_op = ProxOperator(prob, s)
        for _ in range(rounds):
            state, record = fedsplit_round(prob, state, chan, rng, prox_op=prox_op)
            g_max = max(g_max, float(np.sqrt(
                np.max(np.sum(state.local_models ** 2, axis=1)))))
            trace.records.append(record)
    else:
        eff_chan = ERROR_FREE if algo == "fedsgd" else chan
        eff_steps = 1 if algo == "fedsgd" else local_steps
        eta = rate if rate is not None else default_rate(prob)
        state = GdState(server_model=np.zeros(prob.dim), rate=eta,
                        local_steps=eff_steps)
        for _ in range(rounds):
            state, record = gbma_round(prob, state, eff_chan, rng)
            g_max = max(g_max, float(np.linalg.norm(state.server_model)))
            trace.records.append(record)

    trace.g_measured = g_max
    return trace


def rounds_until_gap(prob: FederatedProblem, algo: str,
                     chan: ChannelParams | ErrorFree, gap_threshold: float,
                     max_rounds: int, rng: np.random.Generator, *,
                     step: float | None = None, rate: float | None = None
                     ) -> int | None:
    """First round index at which the optimality gap drops to the threshold.

    Runs the same per-round machinery as :func:`run_algorithm` but stops as
    soon as the gap reaches ``gap_threshold``; returns ``None`` if the cap is
    hit first.  Used by the condition-number sweeps, where the gradient
    baseline can need tens of thousands of rounds.
    """
    if algo == "fedsplit":
        s = step if step is not None else default_step(prob)
        state = FedSplitState(local_models=np.zeros((prob.n_devices, prob.dim)),
                              server_estimate=np.zeros(prob.dim), step=s)
        prox_op = ProxOperator(prob, s)
        for _ in range(max_rounds):
            state, record = fedsplit_round(prob, state, chan, rng, prox_op=prox_op)
            if record.gap <= gap_threshold:
                return record.round_index
        return None
    if algo in ("gbma", "fedsgd"):
        eff_chan = ERROR_FREE if algo == "fedsgd" else chan
        eta = rate if rate is not None else default_rate(prob)
        state = GdState(server_model=np.zeros(prob.dim), rate=eta)
        for _ in range(max_rounds):
            state, record = gbma_round(prob, state, eff_chan, rng)
            if record.gap <= gap_threshold:
                return record.round_index
        return None
    raise ValueError(f"unknown algorithm {algo!r}")
