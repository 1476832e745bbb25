"""Fading MAC and AirComp transceiver.

One uplink round runs: draw fading coefficients, select devices, pick the
uniform power scale, channel-invert and precode the payloads, superpose them
with additive complex noise, and recover the selected-set average at the
server.  Selection comes in three flavours:

* ``"threshold"``: a device transmits iff its fading magnitude is at least
  the threshold (the operational scheme).
* ``"top_b"``: among threshold passers, exactly the ``b`` strongest transmit;
  if fewer than ``b`` pass, the round is deferred (no transmission).
* ``"with_replacement"``: analysis-only mode that samples ``b`` device
  indices uniformly with replacement and draws each participant's fading
  conditioned on passing the threshold.  This matches the independence
  assumptions behind the error-bound proof and keeps ``1/alpha`` bounded so
  Monte Carlo moments are well behaved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySelection,
    PowerViolation,
    ZeroAlpha,
    ZeroChannel,
)
from .linalg import complex_gaussian

#: absolute slack allowed on the per-device power check
POWER_TOL = 1e-12

SELECTION_MODES = ("threshold", "top_b", "with_replacement")


class ErrorFree:
    """Marker for a perfect channel: the server sees exact averages."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "ERROR_FREE"


ERROR_FREE = ErrorFree()


class Deferred:
    """Marker returned when top-b selection cannot fill its quota."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "DEFERRED"


DEFERRED = Deferred()


@dataclass(frozen=True)
class ChannelParams:
    """Static channel and selection configuration."""

    noise_var: float
    threshold: float
    max_power: float
    selection: str = "threshold"
    top_b: int | None = None

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.max_power <= 0:
            raise ValueError("max_power must be > 0")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.selection in ("top_b", "with_replacement"):
            if self.top_b is None or self.top_b < 1:
                raise ValueError(f"selection {self.selection!r} requires top_b >= 1")


@dataclass(frozen=True)
class ChannelRound:
    """Realized fading, selection and power scale of one uplink round."""

    coeffs: np.ndarray      # complex fading per transmitter
    selected: np.ndarray    # bool flags (physical modes) over devices
    alpha: float
    round_index: int


@dataclass(frozen=True)
class RecoveredModel:
    """Server-side estimate recovered from one uplink round."""

    estimate: np.ndarray
    eff_noise_var: float    # noise_var / (alpha * |B|^2), per complex component
    selected_count: int


def draw_fading(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. CN(0, 1) fading coefficients (Rayleigh magnitudes)."""
    if n < 1:
        raise ValueError("need n >= 1")
    return complex_gaussian(1.0, rng, n)


def draw_fading_above(gamma: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """CN(0,1) fading conditioned on magnitude >= ``gamma``.

    Rayleigh squared-magnitude is Exp(1), which is memoryless, so the
    conditional law is exact: ``|h|^2 = gamma^2 + Exp(1)`` with a uniform
    phase.  Used by the with-replacement analysis mode.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    mag = np.sqrt(gamma * gamma + rng.exponential(1.0, size=n))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return mag * np.exp(1j * phase)


def select_devices(coeffs: np.ndarray, gamma: float) -> np.ndarray:
    """Threshold selection: flag ``n`` iff ``|h_n| >= gamma`` (exact compare)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return np.abs(np.asarray(coeffs)) >= gamma


def select_top_b(coeffs: np.ndarray, gamma: float, b: int):
    """Flags for the ``b`` strongest threshold passers, or ``DEFERRED``.

    Ties at the b-th magnitude break toward the lower device index so replay
    is deterministic.
    """
    if b < 1:
        raise ValueError("need b >= 1")
    mags = np.abs(np.asarray(coeffs))
    passers = np.nonzero(mags >= gamma)[0]
    if passers.size < b:
        return DEFERRED
    order = np.argsort(-mags[passers], kind="stable")
    chosen = passers[order[:b]]
    flags = np.zeros(mags.shape[0], dtype=bool)
    flags[chosen] = True
    return flags


def scaling_factor(coeffs: np.ndarray, selected: np.ndarray,
                   models: np.ndarray, p0: float) -> float:
    """Power scale ``alpha = min over selected of |h|^2 p0 / ||theta||^2``.

    Zero-norm payloads are excluded from the minimum (their transmit power is
    zero at any scale).  If every selected payload is zero the unit-norm
    convention ``alpha = min |h|^2 * p0`` applies.
    """
    if p0 <= 0:
        raise ValueError("p0 must be > 0")
    selected = np.asarray(selected, dtype=bool)
    if not selected.any():
        raise EmptySelection("no selected devices")
    mags2 = np.abs(np.asarray(coeffs)[selected]) ** 2
    norms2 = np.sum(np.asarray(models, dtype=float)[selected] ** 2, axis=1)
    nonzero = norms2 > 0.0
    if not nonzero.any():
        return float(mags2.min() * p0)
    return float(np.min(mags2[nonzero] * p0 / norms2[nonzero]))


def precode(model: np.ndarray, h: complex, alpha: float, selected: bool) -> np.ndarray:
    """Transmit signal ``sqrt(alpha) * conj(h)/|h|^2 * model`` (zero if silent).

    The inversion makes the effective channel gain exactly one, so
    ``h * x`` is the scaled payload, real and phase aligned.
    """
    model = np.asarray(model, dtype=float)
    if not selected:
        return np.zeros(model.shape[0], dtype=complex)
    mag2 = abs(h) ** 2
    if mag2 == 0.0:
        raise ZeroChannel("selected device has a zero channel coefficient")
    return (np.sqrt(alpha) * np.conj(h) / mag2) * model


def mac_superpose(signals: np.ndarray, coeffs: np.ndarray, noise_var: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Received signal ``y = sum_n h_n x_n + w`` with CN(0, noise_var) noise."""
    signals = np.asarray(signals, dtype=complex)
    coeffs = np.asarray(coeffs, dtype=complex)
    if signals.ndim != 2 or coeffs.shape != (signals.shape[0],):
        raise DimensionMismatch(
            f"signals {signals.shape} and coeffs {coeffs.shape} do not align")
    y = (coeffs[:, None] * signals).sum(axis=0)
    return y + complex_gaussian(noise_var, rng, signals.shape[1])


def recover(y: np.ndarray, alpha: float, selected_count: int,
            noise_var: float = 0.0) -> RecoveredModel:
    """Server estimate ``Re(y) / (sqrt(alpha) * |B|)``.

    The useful part of ``y`` is exactly real after channel inversion, so the
    imaginary noise component is discarded.  ``eff_noise_var`` records the
    per-component variance of the equivalent complex noise
    ``noise_var / (alpha |B|^2)``.
    """
    if selected_count < 1:
        raise EmptySelection("recovery needs at least one transmitter")
    if alpha <= 0:
        raise ZeroAlpha("recovery needs alpha > 0")
    y = np.asarray(y, dtype=complex)
    estimate = y.real / (np.sqrt(alpha) * selected_count)
    return RecoveredModel(
        estimate=estimate,
        eff_noise_var=noise_var / (alpha * selected_count ** 2),
        selected_count=int(selected_count),
    )


def equivalent_noise_norm_expect(alpha: float, b: int, noise_var: float,
                                 d: int) -> float:
    """Expected squared norm ``d * noise_var / (alpha b^2)`` of the equivalent noise."""
    if alpha <= 0:
        raise ZeroAlpha("alpha must be > 0")
    if b < 1:
        raise ValueError("need b >= 1")
    return d * noise_var / (alpha * b * b)


def _assert_power(signals: np.ndarray, p0: float) -> None:
    # The min-achieving device sits exactly on the budget, so allow the
    # rounding of a handful of float ops on top of the absolute slack.
    powers = np.sum(np.abs(signals) ** 2, axis=1)
    worst = float(powers.max()) if powers.size else 0.0
    if worst > p0 + POWER_TOL + 64.0 * np.finfo(float).eps * p0:
        raise PowerViolation(
            f"transmit power {worst!r} exceeds budget {p0!r}")


def _precode_batch(payloads: np.ndarray, coeffs: np.ndarray,
                   alpha: float) -> np.ndarray:
    # Vectorized form of precode() over the transmitting devices; tests pin
    # the elementwise agreement between the two routes.
    mag2 = np.abs(coeffs) ** 2
    if np.any(mag2 == 0.0):
        raise ZeroChannel("selected device has a zero channel coefficient")
    gains = np.sqrt(alpha) * np.conj(coeffs) / mag2
    return gains[:, None] * payloads


def transmit_round(models: np.ndarray, params: ChannelParams,
                   rng: np.random.Generator, round_index: int = 0
                   ) -> tuple[ChannelRound, RecoveredModel | None]:
    """Run one full uplink round for the given payloads.

    Returns the realized :class:`ChannelRound` and the recovered estimate,
    or ``None`` in place of the estimate when nothing was transmitted (empty
    threshold selection, or a deferred top-b round).  No noise is drawn in
    that case.  The per-device power budget is enforced on every transmitted
    signal.
    """
    models = np.asarray(models, dtype=float)
    n = models.shape[0]

    if params.selection == "with_replacement":
        idx = rng.integers(0, n, size=params.top_b)
        coeffs = draw_fading_above(params.threshold, rng, params.top_b)
        payloads = models[idx]
        all_on = np.ones(params.top_b, dtype=bool)
        alpha = scaling_factor(coeffs, all_on, payloads, params.max_power)
        signals = _precode_batch(payloads, coeffs, alpha)
        _assert_power(signals, params.max_power)
        y = mac_superpose(signals, coeffs, params.noise_var, rng)
        recovered = recover(y, alpha, params.top_b, params.noise_var)
        flags = np.zeros(n, dtype=bool)
        flags[np.unique(idx)] = True
        chan_round = ChannelRound(coeffs=coeffs, selected=flags, alpha=alpha,
                                  round_index=round_index)
        return chan_round, recovered

    coeffs = draw_fading(n, rng)
    if params.selection == "threshold":
        flags = select_devices(coeffs, params.threshold)
    else:
        sel = select_top_b(coeffs, params.threshold, params.top_b)
        flags = None if sel is DEFERRED else sel

    if flags is None or not flags.any():
        chan_round = ChannelRound(coeffs=coeffs,
                                  selected=np.zeros(n, dtype=bool),
                                  alpha=0.0, round_index=round_index)
        return chan_round, None

    alpha = scaling_factor(coeffs, flags, models, params.max_power)
    sel_idx = np.nonzero(flags)[0]
    signals = _precode_batch(models[sel_idx], coeffs[sel_idx], alpha)
    _assert_power(signals, params.max_power)
    y = mac_superpose(signals, coeffs[sel_idx], params.noise_var, rng)
    recovered = recover(y, alpha, int(sel_idx.size), params.noise_var)
    chan_round = ChannelRound(coeffs=coeffs, selected=flags, alpha=alpha,
                              round_index=round_index)
    return chan_round, recovered
