"""Federated linear-regression instances and their calculus.

A problem is a set of device datasets ``(X_n, Y_n)`` with least-squares
losses ``f_n(theta) = 0.5 * ||Y_n - X_n theta||^2``.  This module generates
instances (well-conditioned i.i.d. Gaussian designs, or designs with an
exactly controlled condition number), and provides the per-device calculus
the algorithms need: loss, gradient, closed-form proximal operator,
convexity constants, the global optimum, and the splitting fixed points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidKappa,
    NonConvergence,
    NonPositiveStep,
    RankDeficient,
)
from .linalg import extreme_eigs, spd_solve

#: lambda_min below this fraction of lambda_max counts as rank deficient
_RANK_RTOL = 1e-10

#: max regeneration attempts for a rank-deficient design
_MAX_GEN_ATTEMPTS = 10


@dataclass(frozen=True)
class DeviceProblem:
    """One device's dataset plus its curvature constants.

    ``ell`` and ``lip`` are the extreme eigenvalues of ``design.T @ design``,
    i.e. the strong-convexity and smoothness constants of the local loss.
    """

    design: np.ndarray   # (m, d)
    targets: np.ndarray  # (m,)
    ell: float
    lip: float

    @classmethod
    def from_data(cls, design: np.ndarray, targets: np.ndarray) -> "DeviceProblem":
        design = np.asarray(design, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if design.ndim != 2:
            raise DimensionMismatch(f"design must be 2-d, got shape {design.shape}")
        m, d = design.shape
        if targets.shape != (m,):
            raise DimensionMismatch(
                f"targets have shape {targets.shape}, expected ({m},)")
        ell, lip = extreme_eigs(design.T @ design)
        if ell <= _RANK_RTOL * max(lip, 1.0):
            raise RankDeficient(
                f"design is rank deficient (lambda_min={ell:g}, lambda_max={lip:g})")
        return cls(design=design, targets=targets, ell=ell, lip=lip)

    @property
    def n_samples(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class FederatedProblem:
    """An N-device instance with its aggregate quantities precomputed."""

    devices: tuple[DeviceProblem, ...]
    dim: int
    theta_star: np.ndarray      # minimizer of the summed loss
    ell_star: float             # min_n ell_n
    lip_star: float             # max_n L_n
    kappa: float                # lip_star / ell_star
    lip_sum: float              # sum_n L_n
    ell_sum: float              # sum_n ell_n
    theta_true: np.ndarray      # generating parameter vector
    gram_stack: np.ndarray = field(repr=False)   # (N, d, d) per-device X^T X
    xty_stack: np.ndarray = field(repr=False)    # (N, d)    per-device X^T Y
    hessian: np.ndarray = field(repr=False)      # (d, d)    sum of grams

    @classmethod
    def assemble(cls, devices: list[DeviceProblem],
                 theta_true: np.ndarray) -> "FederatedProblem":
        if not devices:
            raise DimensionMismatch("need at least one device")
        d = devices[0].dim
        for dev in devices:
            if dev.dim != d:
                raise DimensionMismatch("devices disagree on model dimension")
        gram_stack = np.stack([dev.design.T @ dev.design for dev in devices])
        xty_stack = np.stack([dev.design.T @ dev.targets for dev in devices])
        hessian = gram_stack.sum(axis=0)
        theta_star = spd_solve(hessian, xty_stack.sum(axis=0))
        ells = np.array([dev.ell for dev in devices])
        lips = np.array([dev.lip for dev in devices])
        return cls(
            devices=tuple(devices),
            dim=d,
            theta_star=theta_star,
            ell_star=float(ells.min()),
            lip_star=float(lips.max()),
            kappa=float(lips.max() / ells.min()),
            lip_sum=float(lips.sum()),
            ell_sum=float(ells.sum()),
            theta_true=np.asarray(theta_true, dtype=float),
            gram_stack=gram_stack,
            xty_stack=xty_stack,
            hessian=hessian,
        )

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    def gradient_norm_at_optimum(self) -> float:
        g = self.hessian @ self.theta_star - self.xty_stack.sum(axis=0)
        return float(np.linalg.norm(g))


@dataclass(frozen=True)
class GenConfig:
    """Instance-generation parameters.

    ``conditioning`` is ``"well"`` (i.i.d. standard normal designs) or
    ``"ill"`` (exactly controlled condition number ``kappa_target``).
    """

    n_devices: int
    samples_per_device: int
    dim: int
    data_noise_var: float
    conditioning: str = "well"
    kappa_target: float | None = None

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if self.samples_per_device < self.dim:
            raise ValueError("samples_per_device must be >= dim for full rank")
        if self.data_noise_var < 0:
            raise ValueError("data_noise_var must be >= 0")
        if self.conditioning not in ("well", "ill"):
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.conditioning == "ill":
            if self.kappa_target is None or self.kappa_target < 1:
                raise InvalidKappa("ill conditioning requires kappa_target >= 1")


def gen_design_well(m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """An (m, d) design with i.i.d. standard normal entries."""
    if m < d:
        raise DimensionMismatch(f"need m >= d, got m={m}, d={d}")
    return rng.standard_normal((m, d))


def gen_design_ill(m: int, d: int, kappa_target: float, rng: np.random.Generator,
                   right_basis: np.ndarray | None = None) -> np.ndarray:
    """A design whose Gram matrix has condition number exactly ``kappa_target``.

    Builds ``X = U diag(sigma) V^T`` with ``U`` (m x d) and ``V`` (d x d)
    orthonormal from QR of Gaussian draws and log-spaced singular values with
    ``sigma_d = 1`` and ``sigma_1^2 / sigma_d^2 = kappa_target``.

    Parameters
    ----------
    right_basis : ndarray of shape (d, d), optional
        Orthogonal matrix to use as ``V``.  Passing the same basis for every
        device makes the per-device Gram matrices (and therefore the aggregate
        Hessian) share the target condition number, which is what the
        condition-number sweeps rely on.  By default a fresh ``V`` is drawn.
    """
    if kappa_target < 1:
        raise InvalidKappa(f"kappa_target must be >= 1, got {kappa_target}")
    if m < d:
        raise DimensionMismatch(f"need m >= d, got m={m}, d={d}")
    if d == 1 and kappa_target != 1:
        raise InvalidKappa("a 1-d Gram matrix always has condition number 1")
    u, _ = np.linalg.qr(rng.standard_normal((m, d)))
    if right_basis is None:
        v, _ = np.linalg.qr(rng.standard_normal((d, d)))
    else:
        v = np.asarray(right_basis, dtype=float)
        if v.shape != (d, d):
            raise DimensionMismatch(f"right_basis must be ({d}, {d})")
    if d == 1:
        sigma = np.ones(1)
    else:
        sigma = np.logspace(0.5 * np.log10(kappa_target), 0.0, num=d)
    return (u * sigma) @ v.T


def gen_problem(cfg: GenConfig, rng: np.random.Generator) -> FederatedProblem:
    """Generate a federated least-squares instance.

    Targets follow ``Y_n = X_n theta_0 + v_n`` with ``theta_0`` standard
    normal and ``v_n ~ N(0, data_noise_var I)``.  Rank-deficient designs are
    regenerated up to a small number of attempts.

    Draw order from ``rng``: ``theta_0``; for ill conditioning one shared
    right basis; then per device the design followed by the data noise.
    """
    cfg.validate()
    theta_true = rng.standard_normal(cfg.dim)
    shared_basis = None
    if cfg.conditioning == "ill":
        shared_basis, _ = np.linalg.qr(rng.standard_normal((cfg.dim, cfg.dim)))

    noise_scale = float(np.sqrt(cfg.data_noise_var))
    devices = []
    for _ in range(cfg.n_devices):
        dev = None
        for _attempt in range(_MAX_GEN_ATTEMPTS):
            if cfg.conditioning == "well":
                x = gen_design_well(cfg.samples_per_device, cfg.dim, rng)
            else:
                x = gen_design_ill(cfg.samples_per_device, cfg.dim,
                                   cfg.kappa_target, rng, right_basis=shared_basis)
            noise = noise_scale * rng.standard_normal(cfg.samples_per_device)
            y = x @ theta_true + noise
            try:
                dev = DeviceProblem.from_data(x, y)
            except RankDeficient:
                continue
            break
        if dev is None:
            raise RankDeficient(
                f"could not draw a full-rank design in {_MAX_GEN_ATTEMPTS} attempts")
        devices.append(dev)

    prob = FederatedProblem.assemble(devices, theta_true)
    resid = prob.gradient_norm_at_optimum()
    if resid > 1e-8 * (1.0 + float(np.linalg.norm(prob.theta_star))):
        raise NonConvergence(
            f"aggregate normal equations solved too loosely (residual {resid:g})")
    if cfg.conditioning == "ill" and abs(prob.kappa / cfg.kappa_target - 1.0) > 0.05:
        raise InvalidKappa(
            f"measured condition number {prob.kappa:g} is more than 5% away "
            f"from target {cfg.kappa_target:g}")
    return prob


def loss(dev: DeviceProblem, theta: np.ndarray) -> float:
    """Local least-squares loss ``0.5 * ||Y - X theta||^2``."""
    theta = _check_theta(dev.dim, theta)
    r = dev.targets - dev.design @ theta
    return 0.5 * float(r @ r)


def global_loss(prob: FederatedProblem, theta: np.ndarray) -> float:
    """Sum of the device losses."""
    return float(sum(loss(dev, theta) for dev in prob.devices))


def gradient(dev: DeviceProblem, theta: np.ndarray) -> np.ndarray:
    """Gradient ``X^T (X theta - Y)`` of the local loss."""
    theta = _check_theta(dev.dim, theta)
    return dev.design.T @ (dev.design @ theta - dev.targets)


def prox(dev: DeviceProblem, s: float, z: np.ndarray) -> np.ndarray:
    """Proximal operator of the local loss at step size ``s``.

    Returns ``argmin_x f(x) + ||z - x||^2 / (2 s)``, computed in closed form
    as the SPD solve ``(X^T X + I/s) x = X^T Y + z/s``.
    """
    if s <= 0:
        raise NonPositiveStep(f"step size must be > 0, got {s}")
    z = _check_theta(dev.dim, z)
    a = dev.design.T @ dev.design + np.eye(dev.dim) / s
    rhs = dev.design.T @ dev.targets + z / s
    return spd_solve(a, rhs)


def global_optimum(devices: list[DeviceProblem] | tuple[DeviceProblem, ...]) -> np.ndarray:
    """Minimizer of the summed loss via the aggregate normal equations."""
    if not devices:
        raise DimensionMismatch("need at least one device")
    d = devices[0].dim
    h = np.zeros((d, d))
    rhs = np.zeros(d)
    for dev in devices:
        if dev.dim != d:
            raise DimensionMismatch("devices disagree on model dimension")
        h += dev.design.T @ dev.design
        rhs += dev.design.T @ dev.targets
    return spd_solve(h, rhs)


def fixed_points(prob: FederatedProblem, s: float) -> np.ndarray:
    """Per-device fixed points of the splitting iteration at step ``s``.

    The fixed point of device ``n`` is ``theta* - s * grad f_n(theta*)``;
    their mean is ``theta*`` because the gradients sum to zero at the optimum.

    Returns
    -------
    ndarray of shape (n_devices, dim)
    """
    if s <= 0:
        raise NonPositiveStep(f"step size must be > 0, got {s}")
    grads = np.einsum("nij,j->ni", prob.gram_stack, prob.theta_star) - prob.xty_stack
    return prob.theta_star[None, :] - s * grads


def optimality_gap(prob: FederatedProblem, theta: np.ndarray) -> float:
    """Gap ``F(theta) - F(theta*)``, evaluated as a quadratic form.

    For least squares the gap equals ``0.5 (theta - theta*)^T H (theta -
    theta*)`` up to the normal-equation residual, which instance generation
    keeps below 1e-8.  The quadratic form avoids the catastrophic
    cancellation a direct loss difference would hit near the optimum and is
    nonnegative by construction.
    """
    dev = np.asarray(theta, dtype=float) - prob.theta_star
    return 0.5 * float(dev @ prob.hessian @ dev)


def save_problem(prob: FederatedProblem, path) -> None:
    """Dump an instance to an .npz archive for replay.

    Layout: ``n_devices``, ``theta_true``, and per device ``design_<i>`` /
    ``targets_<i>``.  Curvature constants and aggregates are recomputed on
    load so the archive stays minimal and self-consistent.
    """
    arrays = {"n_devices": np.array(prob.n_devices),
              "theta_true": prob.theta_true}
    for i, dev in enumerate(prob.devices):
        arrays[f"design_{i}"] = dev.design
        arrays[f"targets_{i}"] = dev.targets
    np.savez(path, **arrays)


def load_problem(path) -> FederatedProblem:
    """Rebuild an instance saved by :func:`save_problem`."""
    with np.load(path) as data:
        n = int(data["n_devices"])
        theta_true = data["theta_true"]
        devices = [DeviceProblem.from_data(data[f"design_{i}"], data[f"targets_{i}"])
                   for i in range(n)]
    return FederatedProblem.assemble(devices, theta_true)


def _check_theta(dim: int, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dim,):
        raise DimensionMismatch(f"model has shape {theta.shape}, expected ({dim},)")
    return theta
