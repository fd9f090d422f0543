"""Loss families for regression under extreme-value shaped errors.

Residual convention, fixed across the whole package: ``residual = sample -
prediction`` (x - h, and Q - V in the value-learning modules).  Every loss
works on the scaled residual z = residual / beta.  Losses return per-sample
values and leave batch reduction to the caller, with one exception:
:func:`clipped_gumbel_loss` subtracts the batch maximum inside the
exponential, which couples the samples, so it is inherently a batch mean.

The exponential is evaluated in double precision.  When e**z overflows, the
result is returned as an IEEE infinity instead of raising, so a training loop
can observe the blow-up and record it as a divergence event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "LossSpec",
    "VARIANTS",
    "gumbel_loss",
    "gumbel_loss_grad",
    "clipped_gumbel_loss",
    "clipped_gumbel_loss_grad",
    "expanded_gumbel_loss",
    "expanded_gumbel_loss_grad",
    "expectile_loss",
    "expectile_loss_grad",
    "loss_values",
    "loss_grads",
    "loss_curve",
]

VARIANTS = ("gumbel", "clipped_gumbel", "expanded_gumbel", "l2", "expectile")


@dataclass(frozen=True)
class LossSpec:
    """Tagged description of one loss family and its parameters.

    variant      one of ``gumbel``, ``clipped_gumbel``, ``expanded_gumbel``,
                 ``l2``, ``expectile``
    beta         temperature, scales the residual (z = residual / beta)
    order        truncation order of the series variant, even and >= 2;
                 even orders keep the loss nonnegative
    clip         symmetric bound applied to z before the exponential
                 (clipped variant only)
    tau          expectile level in (0, 1) (expectile variant only)
    """

    variant: str
    beta: float = 1.0
    order: int | None = None
    clip: float | None = None
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}, expected one of {VARIANTS}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be a positive finite real, got {self.beta}")
        if self.variant == "expanded_gumbel":
            if self.order is None:
                raise ValueError("expanded_gumbel requires an order")
            if self.order < 2 or self.order % 2 != 0:
                raise ValueError(f"order must be even and >= 2, got {self.order}")
        elif self.order is not None:
            raise ValueError(f"order is only meaningful for expanded_gumbel, got variant {self.variant!r}")
        if self.variant == "clipped_gumbel":
            if self.clip is None or not self.clip > 0:
                raise ValueError("clipped_gumbel requires clip > 0")
        elif self.clip is not None:
            raise ValueError(f"clip is only meaningful for clipped_gumbel, got variant {self.variant!r}")
        if self.variant == "expectile":
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise ValueError("expectile requires tau in (0, 1)")
        elif self.tau is not None:
            raise ValueError(f"tau is only meaningful for expectile, got variant {self.variant!r}")

    @classmethod
    def gumbel(cls, beta: float = 1.0) -> "LossSpec":
        return cls("gumbel", beta=beta)

    @classmethod
    def clipped(cls, beta: float = 1.0, clip: float = 7.0) -> "LossSpec":
        return cls("clipped_gumbel", beta=beta, clip=clip)

    @classmethod
    def expanded(cls, order: int, beta: float = 1.0) -> "LossSpec":
        return cls("expanded_gumbel", beta=beta, order=order)

    @classmethod
    def l2(cls, beta: float = 1.0) -> "LossSpec":
        return cls("l2", beta=beta)

    @classmethod
    def expectile(cls, tau: float) -> "LossSpec":
        return cls("expectile", tau=tau)


def _check_beta(beta: float) -> None:
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a positive finite real, got {beta}")


def _finite_array(values, name: str = "residual") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _like_input(out: np.ndarray, template) -> float | np.ndarray:
    return float(out) if np.ndim(template) == 0 else out


def gumbel_loss(residual, beta: float):
    """Per-sample loss e**z - z - 1 with z = residual / beta.

    Zero at zero residual, exponential on the side where the sample exceeds
    the prediction, linear on the other side.  Overflow of e**z is returned
    as +inf.
    """
    _check_beta(beta)
    z = _finite_array(residual) / beta
    with np.errstate(over="ignore"):
        out = np.exp(z) - z - 1.0
    return _like_input(out, residual)


def gumbel_loss_grad(residual, beta: float):
    """Derivative of :func:`gumbel_loss` with respect to the prediction.

    Equals (1 - e**z) / beta; an overflowing e**z yields -inf, which is the
    mechanism by which mismatched-scale training blows up.
    """
    _check_beta(beta)
    z = _finite_array(residual) / beta
    with np.errstate(over="ignore"):
        out = (1.0 - np.exp(z)) / beta
    return _like_input(out, residual)


def _clipped_terms(residuals, beta: float, clip: float) -> np.ndarray:
    z = np.clip(_finite_array(residuals) / beta, -clip, clip)
    m = float(np.max(z))
    if m < -1.0:
        m = -1.0
    with np.errstate(over="ignore"):
        em = math.exp(-m)
        return np.exp(z - m) - z * em - em


def clipped_gumbel_loss(residuals, beta: float, clip: float) -> float:
    """Batch mean of the max-normalized, clipped exponential loss.

    Procedure: z_i = clamp(residual_i / beta, -clip, clip); m = max_i z_i,
    replaced by -1 when it falls below -1; the per-sample term is
    e**(z_i - m) - z_i e**(-m) - e**(-m).  The shared maximum couples the
    samples, hence the mean is taken here and not by the caller.
    """
    _check_beta(beta)
    if not clip > 0:
        raise ValueError(f"clip must be positive, got {clip}")
    arr = np.atleast_1d(np.asarray(residuals, dtype=float))
    if arr.size == 0:
        raise ValueError("clipped_gumbel_loss requires a nonempty batch")
    return float(np.mean(_clipped_terms(arr, beta, clip)))


def clipped_gumbel_loss_grad(residuals, beta: float, clip: float) -> np.ndarray:
    """Per-sample derivative of the clipped batch loss with respect to the prediction.

    The batch maximum is treated as a constant (it is detached in the
    defining procedure) and clamped samples carry zero gradient.
    """
    _check_beta(beta)
    if not clip > 0:
        raise ValueError(f"clip must be positive, got {clip}")
    arr = np.atleast_1d(_finite_array(residuals))
    if arr.size == 0:
        raise ValueError("clipped_gumbel_loss_grad requires a nonempty batch")
    zraw = arr / beta
    z = np.clip(zraw, -clip, clip)
    m = float(np.max(z))
    if m < -1.0:
        m = -1.0
    inside = np.abs(zraw) <= clip
    with np.errstate(over="ignore"):
        em = math.exp(-m)
        grads = em * (1.0 - np.exp(z)) / beta
    return np.where(inside, grads, 0.0)


@lru_cache(maxsize=None)
def _recip_factorials(n: int) -> tuple[float, ...]:
    return tuple(1.0 / math.factorial(j) for j in range(n + 1))


def expanded_gumbel_loss(residual, beta: float, order: int):
    """Truncated series sum_{j=2..n} z**j / j! with z = residual / beta.

    Evaluated by a Horner scheme on precomputed reciprocal factorials, so no
    large factorial or high power is formed on its own.  Even orders make the
    polynomial nonnegative everywhere; order 2 is exactly z**2 / 2.
    """
    _check_beta(beta)
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    z = _finite_array(residual) / beta
    c = _recip_factorials(order)
    acc = np.full_like(z, c[order])
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(order - 1, 1, -1):
            acc = acc * z + c[j]
        out = acc * z * z
    return _like_input(out, residual)


def expanded_gumbel_loss_grad(residual, beta: float, order: int):
    """Derivative of :func:`expanded_gumbel_loss` with respect to the prediction.

    Equals -(1/beta) sum_{k=1..n-1} z**k / k!.
    """
    _check_beta(beta)
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    z = _finite_array(residual) / beta
    c = _recip_factorials(order - 1)
    acc = np.full_like(z, c[order - 1])
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(order - 2, 0, -1):
            acc = acc * z + c[k]
        out = -(acc * z) / beta
    return _like_input(out, residual)


def expectile_loss(residual, tau: float):
    """Asymmetric squared loss |tau - 1[residual < 0]| * residual**2."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    r = _finite_array(residual)
    weight = np.where(r < 0, 1.0 - tau, tau)
    return _like_input(weight * r * r, residual)


def expectile_loss_grad(residual, tau: float):
    """Derivative of :func:`expectile_loss` with respect to the prediction."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    r = _finite_array(residual)
    weight = np.where(r < 0, 1.0 - tau, tau)
    return _like_input(-2.0 * weight * r, residual)


def loss_values(spec: LossSpec, residuals):
    """Pointwise loss values for any spec.

    For the clipped variant each residual is treated as its own batch of one,
    which matches how a loss curve is read.
    """
    if spec.variant == "gumbel":
        return gumbel_loss(residuals, spec.beta)
    if spec.variant == "expanded_gumbel":
        return expanded_gumbel_loss(residuals, spec.beta, spec.order)
    if spec.variant == "l2":
        return expanded_gumbel_loss(residuals, spec.beta, 2)
    if spec.variant == "expectile":
        return expectile_loss(residuals, spec.tau)
    # clipped, per-point batches of one: m = max(z, -1) for a single sample
    z = np.clip(_finite_array(residuals) / spec.beta, -spec.clip, spec.clip)
    m = np.maximum(z, -1.0)
    em = np.exp(-m)
    out = np.exp(z - m) - z * em - em
    return _like_input(out, residuals)


def loss_grads(spec: LossSpec, residuals):
    """Per-sample gradients with respect to the prediction for any spec.

    Batch-coupled for the clipped variant (shared maximum over the given
    residuals), independent per sample for every other variant.
    """
    if spec.variant == "gumbel":
        return gumbel_loss_grad(residuals, spec.beta)
    if spec.variant == "expanded_gumbel":
        return expanded_gumbel_loss_grad(residuals, spec.beta, spec.order)
    if spec.variant == "l2":
        return expanded_gumbel_loss_grad(residuals, spec.beta, 2)
    if spec.variant == "expectile":
        return expectile_loss_grad(residuals, spec.tau)
    return clipped_gumbel_loss_grad(residuals, spec.beta, spec.clip)


def loss_curve(spec: LossSpec, grid) -> np.ndarray:
    """Tabulate (residual, loss) pairs over a grid, as a (n, 2) array."""
    pts = _finite_array(grid, name="grid")
    if pts.size == 0:
        raise ValueError("grid must be nonempty")
    vals = np.atleast_1d(loss_values(spec, pts))
    return np.column_stack([pts, vals])
