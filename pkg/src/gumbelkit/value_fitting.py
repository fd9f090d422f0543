"""In-sample tabular value learning on offline data.

V is fitted against in-dataset Q targets under a chosen loss (residual
Q(s,a) - V(s)), Q is fitted by least squares against r + gamma V(s'), and the
two steps alternate to a fixed point.  With the squared loss the fixed point
is the behavior value; with the exponential loss it is the soft optimal
value; the series-truncated losses land in between, moving from the former
to the latter as the order grows.

Divergence is reported when a table entry or gradient stops being finite or
when an entry escapes the value scale implied by the rewards (see
``escape_factor`` on :class:`TrainConfig`); the exponential loss's blow-up
can freeze at huge finite values where gradients flatten, so non-finiteness
alone is not a sufficient detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import LossSpec, loss_grads, loss_values
from .mdp import OfflineDataset, TabularMdp

__all__ = [
    "TrainConfig",
    "ValueTables",
    "IterationRecord",
    "DivergenceError",
    "v_step",
    "q_step",
    "train",
]


class DivergenceError(RuntimeError):
    """A value table left the finite, data-supported range.

    Carries the offending state and the residual that produced the bad
    gradient when known.
    """

    def __init__(self, message: str, state: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.state = state
        self.residual = residual


@dataclass(frozen=True)
class TrainConfig:
    """Schedule and step sizes for the alternating fit.

    q_mode ``closed_form`` sets Q(s,a) to the dataset mean of r + gamma V(s')
    in one sweep; ``gradient`` takes lr_q steps on the squared error.
    v_mode ``gradient`` runs v_steps descent steps per outer iteration;
    ``closed_form_n2`` is the exact mean update, valid only when the loss is
    the squared one (order 2 or l2).
    """

    loss: LossSpec
    v_steps: int = 50
    q_mode: str = "closed_form"
    v_mode: str = "gradient"
    lr_v: float = 0.02
    lr_q: float = 0.5
    outer_iterations: int = 500
    tolerance: float = 1e-9
    escape_factor: float | None = 100.0

    def __post_init__(self) -> None:
        if self.q_mode not in ("closed_form", "gradient"):
            raise ValueError(f"q_mode must be 'closed_form' or 'gradient', got {self.q_mode!r}")
        if self.v_mode not in ("closed_form_n2", "gradient"):
            raise ValueError(f"v_mode must be 'closed_form_n2' or 'gradient', got {self.v_mode!r}")
        if self.v_mode == "closed_form_n2" and not _is_squared(self.loss):
            raise ValueError("closed_form_n2 requires the squared loss (l2 or order 2)")
        if min(self.v_steps, self.outer_iterations) <= 0:
            raise ValueError("v_steps and outer_iterations must be positive")
        if min(self.lr_v, self.lr_q, self.tolerance) <= 0:
            raise ValueError("lr_v, lr_q, and tolerance must be positive")
        if self.escape_factor is not None and not self.escape_factor > 0:
            raise ValueError("escape_factor must be positive or None")


def _is_squared(spec: LossSpec) -> bool:
    return spec.variant == "l2" or (spec.variant == "expanded_gumbel" and spec.order == 2)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    max_change: float
    v_loss: float
    q_loss: float


@dataclass
class ValueTables:
    """Fitted tables plus the trace of the run that produced them."""

    v: np.ndarray
    q: np.ndarray
    iterations: int
    converged: bool
    diverged: bool = False
    divergence_note: str = ""
    final_v_loss: float = math.nan
    final_q_loss: float = math.nan
    trace: list[IterationRecord] = field(default_factory=list)


@dataclass(frozen=True)
class _DatasetIndex:
    """Cached count structure of one dataset against one MDP's shape."""

    pair_counts: np.ndarray      # (S, A) row multiplicities
    state_counts: np.ndarray     # (S,)
    state_present: np.ndarray    # (S,) bool
    pair_present: np.ndarray     # (S, A) bool
    pair_weights: np.ndarray     # (S, A) within-state action weights


def _index_dataset(dataset: OfflineDataset, num_states: int, num_actions: int) -> _DatasetIndex:
    counts = dataset.pair_counts(num_states, num_actions)
    state_counts = counts.sum(axis=1)
    state_present = state_counts > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        weights = np.where(state_present[:, None], counts / np.maximum(state_counts, 1)[:, None], 0.0)
    return _DatasetIndex(
        pair_counts=counts,
        state_counts=state_counts,
        state_present=state_present,
        pair_present=counts > 0,
        pair_weights=weights,
    )


def v_step(
    v: np.ndarray,
    q: np.ndarray,
    dataset: OfflineDataset,
    loss: LossSpec,
    lr: float,
    steps: int,
    mode: str = "gradient",
) -> np.ndarray:
    """Update V against the dataset's Q residuals; absent states are untouched.

    Gradient mode descends each state's dataset-weighted mean loss over its
    observed actions.  Closed-form mode (squared loss only) jumps straight to
    the weighted mean of Q(s, .).
    """
    s_count, a_count = q.shape
    idx = _index_dataset(dataset, s_count, a_count)
    v_new = v.astype(float).copy()
    if mode == "closed_form_n2":
        if not _is_squared(loss):
            raise ValueError("closed_form_n2 requires the squared loss")
        means = (idx.pair_weights * q).sum(axis=1)
        v_new[idx.state_present] = means[idx.state_present]
        return v_new
    if mode != "gradient":
        raise ValueError(f"unknown v_step mode {mode!r}")
    for _ in range(steps):
        residuals = q - v_new[:, None]
        finite_rows = np.isfinite(np.where(idx.pair_present, residuals, 0.0)).all(axis=1)
        if not finite_rows.all():
            state = int(np.argmin(finite_rows))
            raise DivergenceError(
                f"non-finite residual while fitting V at state {state}", state=state
            )
        grads = _pair_grads(loss, residuals, idx)
        state_grad = (idx.pair_weights * grads).sum(axis=1)
        finite_grad = np.isfinite(np.where(idx.state_present, state_grad, 0.0))
        if not finite_grad.all():
            state = int(np.argmin(finite_grad))
            bad = residuals[state][idx.pair_present[state]]
            worst = float(bad[np.argmax(np.abs(bad))])
            raise DivergenceError(
                f"non-finite gradient while fitting V at state {state} "
                f"(residual about {worst:.6g})",
                state=state,
                residual=worst,
            )
        v_new = np.where(idx.state_present, v_new - lr * state_grad, v_new)
    return v_new


def _pair_grads(loss: LossSpec, residuals: np.ndarray, idx: _DatasetIndex) -> np.ndarray:
    """Per-(s, a) gradients; the clipped variant shares its max over observed pairs."""
    if loss.variant == "clipped_gumbel":
        flat = residuals[idx.pair_present]
        grads = np.zeros_like(residuals)
        grads[idx.pair_present] = loss_grads(loss, flat)
        return grads
    safe = np.where(idx.pair_present, residuals, 0.0)
    return np.asarray(loss_grads(loss, safe))


def q_step(
    q: np.ndarray,
    v: np.ndarray,
    dataset: OfflineDataset,
    gamma: float,
    mode: str = "closed_form",
    lr: float = 0.5,
    steps: int = 1,
) -> np.ndarray:
    """Update Q toward the dataset mean of r + gamma V(s'); absent pairs are untouched."""
    s_count, a_count = q.shape
    counts = dataset.pair_counts(s_count, a_count)
    present = counts > 0
    targets = dataset.rewards + gamma * v[dataset.next_states]
    sums = np.zeros((s_count, a_count))
    np.add.at(sums, (dataset.states, dataset.actions), targets)
    with np.errstate(invalid="ignore"):
        means = np.where(present, sums / np.maximum(counts, 1), 0.0)
    q_new = q.astype(float).copy()
    if mode == "closed_form":
        q_new[present] = means[present]
        return q_new
    if mode != "gradient":
        raise ValueError(f"unknown q_step mode {mode!r}")
    for _ in range(steps):
        grad = 2.0 * (q_new - means)
        q_new = np.where(present, q_new - lr * grad, q_new)
    return q_new


def _value_scale_bound(mdp: TabularMdp, loss: LossSpec, factor: float | None) -> float:
    if factor is None:
        return math.inf
    reward_span = float(np.max(np.abs(mdp.reward)))
    return factor * (reward_span / (1.0 - mdp.gamma) + loss.beta * math.log(mdp.num_actions + 1) + 1.0)


def _dataset_v_loss(loss: LossSpec, residuals: np.ndarray, idx: _DatasetIndex) -> float:
    flat = residuals[idx.pair_present]
    weights = idx.pair_counts[idx.pair_present]
    if loss.variant == "clipped_gumbel":
        values = np.repeat(flat, weights.astype(int))
        from .losses import clipped_gumbel_loss

        return clipped_gumbel_loss(values, loss.beta, loss.clip)
    values = np.asarray(loss_values(loss, flat))
    return float(np.sum(values * weights) / np.sum(weights))


def train(mdp: TabularMdp, dataset: OfflineDataset, config: TrainConfig) -> ValueTables:
    """Alternate q_step and v_step until V stops moving.

    Divergence does not raise; the partial trace comes back flagged, with the
    note naming what escaped.
    """
    s_count, a_count = mdp.num_states, mdp.num_actions
    idx = _index_dataset(dataset, s_count, a_count)
    bound = _value_scale_bound(mdp, config.loss, config.escape_factor)
    v = np.zeros(s_count)
    q = np.zeros((s_count, a_count))
    trace: list[IterationRecord] = []
    for it in range(1, config.outer_iterations + 1):
        try:
            q = q_step(q, v, dataset, mdp.gamma, mode=config.q_mode, lr=config.lr_q, steps=1)
            v_new = v_step(
                v, q, dataset, config.loss, config.lr_v, config.v_steps, mode=config.v_mode
            )
        except DivergenceError as err:
            return ValueTables(
                v=v, q=q, iterations=it, converged=False, diverged=True,
                divergence_note=str(err), trace=trace,
            )
        finite = np.all(np.isfinite(v_new)) and np.all(np.isfinite(q))
        escaped = finite and (
            float(np.max(np.abs(v_new))) > bound or float(np.max(np.abs(q))) > bound
        )
        if not finite or escaped:
            what = "non-finite" if not finite else f"beyond the value-scale bound {bound:.6g}"
            return ValueTables(
                v=v_new, q=q, iterations=it, converged=False, diverged=True,
                divergence_note=f"table entries went {what} at iteration {it}", trace=trace,
            )
        change = float(np.max(np.abs(v_new - v)))
        residuals = q - v_new[:, None]
        v_loss = _dataset_v_loss(config.loss, residuals, idx)
        targets = dataset.rewards + mdp.gamma * v_new[dataset.next_states]
        q_loss = float(np.mean((targets - q[dataset.states, dataset.actions]) ** 2))
        trace.append(IterationRecord(it, change, v_loss, q_loss))
        v = v_new
        if change < config.tolerance:
            return ValueTables(
                v=v, q=q, iterations=it, converged=True,
                final_v_loss=v_loss, final_q_loss=q_loss, trace=trace,
            )
    last = trace[-1] if trace else IterationRecord(0, math.nan, math.nan, math.nan)
    return ValueTables(
        v=v, q=q, iterations=config.outer_iterations, converged=False,
        final_v_loss=last.v_loss, final_q_loss=last.q_loss, trace=trace,
    )
