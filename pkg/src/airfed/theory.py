"""Analytical quantities used to validate simulated traces.

The splitting iteration contracts linearly with per-round factor
``1 - 2/(sqrt(kappa) + 1)``; the noisy variant additionally carries a
non-vanishing floor combining subset-sampling error and channel noise.
Both the trajectory bound and the finite error bound are evaluated here so
the harness can overlay them on empirical curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidEps, InvalidKappa, InvalidVariant

BOUND_VARIANTS = ("as_stated", "as_proved")


@dataclass(frozen=True)
class BoundInputs:
    """Everything the finite error bound needs."""

    delta0: float      # initial mean squared distance to the fixed points
    kappa: float       # lip_star / ell_star
    lip_sum: float     # L, the summed smoothness constants
    g_bound: float     # uniform bound on local-model norms
    b: int             # fixed number of participating devices
    dim: int
    noise_var: float
    threshold: float
    max_power: float

    def __post_init__(self):
        if self.delta0 < 0:
            raise ValueError("delta0 must be >= 0")
        if self.kappa < 1:
            raise InvalidKappa(f"kappa must be >= 1, got {self.kappa}")
        if min(self.lip_sum, self.g_bound, self.max_power, self.threshold) <= 0:
            raise ValueError("lip_sum, g_bound, threshold and max_power must be > 0")
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")


def contraction_factor(kappa: float) -> float:
    """Per-round distance contraction ``1 - 2/(sqrt(kappa) + 1)``, in [0, 1)."""
    if kappa < 1:
        raise InvalidKappa(f"kappa must be >= 1, got {kappa}")
    return 1.0 - 2.0 / (math.sqrt(kappa) + 1.0)


def theorem1_bound(delta0: float, kappa: float, t: int) -> float:
    """Distance bound ``contraction_factor(kappa)**t * sqrt(delta0)``.

    Bounds the distance of the iterate produced by round ``t`` (zero-based)
    to the optimum, for the error-free iteration at the default step size.
    """
    if delta0 < 0:
        raise ValueError("delta0 must be >= 0")
    return contraction_factor(kappa) ** t * math.sqrt(delta0)


def iteration_complexity(eps: float, kappa: float,
                         delta0: float = 1.0) -> tuple[int, float]:
    """Rounds needed for the distance bound to reach ``eps``.

    Returns the exact count implied by the linear rate,
    ``ceil(log(sqrt(delta0)/eps) / log(1/rho))`` with
    ``rho = contraction_factor(kappa)``, together with the asymptotic
    surrogate ``sqrt(kappa) * log(1/eps)``.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidEps(f"eps must lie in (0, 1), got {eps}")
    if delta0 < 0:
        raise ValueError("delta0 must be >= 0")
    surrogate = math.sqrt(kappa) * math.log(1.0 / eps)
    start = math.sqrt(delta0)
    if eps >= start:
        return 0, surrogate
    rho = contraction_factor(kappa)
    if rho == 0.0:
        return 1, surrogate
    exact = math.ceil(math.log(start / eps) / math.log(1.0 / rho))
    return int(exact), surrogate


def theorem2_bound(inp: BoundInputs, t: int, variant: str = "as_proved") -> float:
    """Finite optimality-gap bound for the noisy iteration at round ``t``.

    Two algebraic variants are kept side by side and neither is silently
    corrected:

    * ``"as_stated"``: ``delta0/(2L) * rho**t + G^2/(2 B^2 L) * (B + d
      sigma_w^2 / (gamma^2 P0))``
    * ``"as_proved"`` (default): ``(L/2) * [delta0 * rho**t + G^2/B^2 * (B +
      d sigma_w^2 / (gamma^2 P0))]``, the form the smoothness-based proof
      chain actually produces.

    Here ``rho = contraction_factor(kappa)**2``.  The two differ exactly by
    the factor ``L^2`` and coincide at ``L = 1``.
    """
    if variant not in BOUND_VARIANTS:
        raise InvalidVariant(f"variant must be one of {BOUND_VARIANTS}")
    rho = contraction_factor(inp.kappa) ** 2
    noise_term = inp.b + inp.dim * inp.noise_var / (inp.threshold ** 2 * inp.max_power)
    g2_over_b2 = inp.g_bound ** 2 / inp.b ** 2
    if variant == "as_stated":
        return (inp.delta0 / (2.0 * inp.lip_sum)) * rho ** t \
            + g2_over_b2 * noise_term / (2.0 * inp.lip_sum)
    return (inp.lip_sum / 2.0) * (inp.delta0 * rho ** t + g2_over_b2 * noise_term)


def measure_g(local_models) -> float:
    """Largest local-model norm over a run: ``max_{t,n} ||theta_n^t||``.

    Accepts any iterable of arrays whose rows (or which themselves) are
    model vectors.
    """
    worst = 0.0
    seen = False
    for block in local_models:
        arr = np.atleast_2d(np.asarray(block, dtype=float))
        seen = True
        if arr.size:
            worst = max(worst, float(np.sqrt(np.max(np.sum(arr ** 2, axis=-1)))))
    if not seen:
        raise ValueError("need at least one model")
    return worst
