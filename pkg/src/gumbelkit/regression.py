"""Scalar-regression stability harness over mismatched temperature scales.

Data are drawn from a negated Gumbel at scale ``beta_data`` and fitted by
stochastic gradient descent on a chosen loss at scale ``beta_reg``.  The
estimate's absolute error against the empirical loss minimizer is recorded at
fixed update counts, over many independent repeats, on a grid of
(beta_data, beta_reg) cells.

Divergence detection.  A repeat is marked diverged when the estimate, a
per-sample loss, or a gradient stops being finite, or when the estimate
escapes the data's scale by a configurable factor (``escape_factor``).  The
escape test exists because in double precision the exponential loss's blow-up
overshoots the estimate to a huge but still finite value where the gradient
flattens to 1/beta and the run freezes; a non-finiteness check alone provably
never fires at these data scales, while the polynomial losses that do
overflow reach literal infinities and are caught either way.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import GumbelParams, sample_gumbel
from .losses import LossSpec, loss_grads, loss_values
from .rng import stream

__all__ = [
    "RegressionConfig",
    "RepeatResult",
    "RegressionTrace",
    "CellResult",
    "DEFAULT_BETAS",
    "generate_data",
    "target_value",
    "run_repeat",
    "run_cell",
    "run_experiment",
    "full_batch_descent",
    "experiment_rows",
    "EXPERIMENT_COLUMNS",
]

DEFAULT_BETAS = (0.5, 2.0, 10.0)
DEFAULT_CHECKPOINTS = (10, 100, 500, 1000, 2000)


@dataclass(frozen=True)
class RegressionConfig:
    """Full definition of one regression cell.

    ``loss.beta`` must equal ``beta_reg`` for every temperature-carrying
    variant.  ``init_h`` is the starting estimate; it is recorded in run
    metadata so it can be varied.  ``resample_data`` draws a fresh dataset
    per repeat; when false, one shared dataset (stream slot 0) is reused.
    ``target`` selects the reference the error is measured against:
    ``minimizer`` is beta * log mean exp(x / beta), the exact minimizer of
    the empirical exponential loss, and ``logsumexp`` is the unscaled
    log sum exp(x / beta) alternative.
    """

    beta_data: float
    beta_reg: float
    loss: LossSpec
    n_data: int = 10_000
    lr: float = 0.02
    batch_size: int = 32
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    repeats: int = 100
    master_seed: int = 0
    init_h: float = 1.0
    resample_data: bool = True
    target: str = "minimizer"
    escape_factor: float | None = 20.0
    stream_key: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not (self.beta_data > 0 and self.beta_reg > 0):
            raise ValueError("beta_data and beta_reg must be positive")
        if self.loss.variant != "expectile" and self.loss.beta != self.beta_reg:
            raise ValueError(
                f"loss.beta ({self.loss.beta}) must equal beta_reg ({self.beta_reg})"
            )
        if self.n_data <= 0 or self.batch_size <= 0 or self.lr <= 0 or self.repeats <= 0:
            raise ValueError("n_data, batch_size, lr, and repeats must be positive")
        if len(self.checkpoints) == 0 or any(
            b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])
        ):
            raise ValueError("checkpoints must be nonempty and strictly ascending")
        if self.checkpoints[0] <= 0:
            raise ValueError("checkpoints must be positive update counts")
        if self.target not in ("minimizer", "logsumexp"):
            raise ValueError(f"target must be 'minimizer' or 'logsumexp', got {self.target!r}")
        if self.escape_factor is not None and not self.escape_factor > 0:
            raise ValueError("escape_factor must be positive or None")


@dataclass(frozen=True)
class RepeatResult:
    """One repeat: per-checkpoint absolute errors (NaN past divergence)."""

    errors: np.ndarray
    diverged: bool
    diverged_at: int | None
    target: float
    final_h: float


@dataclass
class RegressionTrace:
    """Aggregate over the repeats of one cell.

    Means and standard deviations are taken over the non-diverged repeats
    only; a cell where every repeat diverged carries ``all_diverged`` and
    NaN-free aggregates are simply absent (None).
    """

    config: RegressionConfig
    repeats: list[RepeatResult]
    mean_abs_error: np.ndarray | None = field(default=None)
    std_abs_error: np.ndarray | None = field(default=None)
    diverged_count: int = 0

    def __post_init__(self) -> None:
        survivors = [r.errors for r in self.repeats if not r.diverged]
        self.diverged_count = sum(r.diverged for r in self.repeats)
        if survivors:
            block = np.vstack(survivors)
            self.mean_abs_error = block.mean(axis=0)
            if block.shape[0] >= 2:
                self.std_abs_error = block.std(axis=0, ddof=1)

    @property
    def all_diverged(self) -> bool:
        return self.diverged_count == len(self.repeats)


@dataclass(frozen=True)
class CellResult:
    beta_data: float
    beta_reg: float
    trace: RegressionTrace


def generate_data(beta_data: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the negated Gumbel at scale beta_data."""
    if not beta_data > 0:
        raise ValueError(f"beta_data must be positive, got {beta_data}")
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    return sample_gumbel(GumbelParams(0.0, beta_data, negated=True), rng, size=n)


def target_value(data: np.ndarray, beta_reg: float, convention: str = "minimizer") -> float:
    """Reference value the estimate is compared against.

    ``minimizer``: beta * log mean exp(x / beta), computed with a max shift;
    this is the exact minimizer of the empirical exponential loss.
    ``logsumexp``: log sum exp(x / beta) without the beta multiplier, kept as
    a selectable alternative reference.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("data must be nonempty")
    if not beta_reg > 0:
        raise ValueError(f"beta_reg must be positive, got {beta_reg}")
    z = arr / beta_reg
    m = float(np.max(z))
    lse = m + math.log(float(np.sum(np.exp(z - m))))
    if convention == "minimizer":
        return beta_reg * (lse - math.log(arr.size))
    if convention == "logsumexp":
        return lse
    raise ValueError(f"unknown target convention {convention!r}")


def _escape_bound(config: RegressionConfig, data: np.ndarray) -> float:
    """Estimates beyond this are collapse: the loss minimizer always lies
    inside the data range, so the bound scales with the data (and the start
    point, so unusual initializations cannot trip it)."""
    if config.escape_factor is None:
        return math.inf
    scale = max(float(np.max(np.abs(data))), abs(config.init_h))
    return config.escape_factor * (1.0 + scale)


def _shared_data(config: RegressionConfig) -> np.ndarray:
    return generate_data(
        config.beta_data, config.n_data, stream(config.master_seed, *config.stream_key, 0)
    )


def run_repeat(
    config: RegressionConfig, repeat_index: int, data: np.ndarray | None = None
) -> RepeatResult:
    """One SGD run: batches with replacement, one step per update.

    Checkpoint entries record |h - target|; after a divergence the remaining
    entries stay NaN (missing, not infinite).
    """
    rng = stream(config.master_seed, *config.stream_key, 1 + repeat_index)
    if config.resample_data:
        data = generate_data(config.beta_data, config.n_data, rng)
    elif data is None:
        data = _shared_data(config)
    target = target_value(data, config.beta_reg, config.target)
    bound = _escape_bound(config, data)

    total = config.checkpoints[-1]
    cp_index = {cp: i for i, cp in enumerate(config.checkpoints)}
    errors = np.full(len(config.checkpoints), np.nan)
    batches = rng.integers(0, config.n_data, size=(total, config.batch_size))

    h = config.init_h
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, total + 1):
            residuals = data[batches[t - 1]] - h
            if not np.all(np.isfinite(residuals)):
                diverged_at = t
                break
            grads = loss_grads(config.loss, residuals)
            losses = loss_values(config.loss, residuals)
            step = float(np.mean(grads))
            finite = (
                math.isfinite(step)
                and bool(np.all(np.isfinite(grads)))
                and bool(np.all(np.isfinite(np.atleast_1d(losses))))
            )
            if not finite:
                diverged_at = t
                break
            h = h - config.lr * step
            if not math.isfinite(h) or abs(h) > bound:
                diverged_at = t
                break
            if t in cp_index:
                errors[cp_index[t]] = abs(h - target)
    return RepeatResult(
        errors=errors,
        diverged=diverged_at is not None,
        diverged_at=diverged_at,
        target=target,
        final_h=h,
    )


def run_cell(config: RegressionConfig) -> RegressionTrace:
    """All repeats of one cell, aggregated."""
    shared = None if config.resample_data else _shared_data(config)
    results = [run_repeat(config, i, data=shared) for i in range(config.repeats)]
    return RegressionTrace(config=config, repeats=results)


def run_experiment(
    base: RegressionConfig,
    betas: tuple[float, ...] = DEFAULT_BETAS,
) -> list[CellResult]:
    """Run the full (beta_data, beta_reg) grid derived from a base config.

    Cells are keyed in sorted order; each cell gets its own stream key so the
    output is independent of execution order.
    """
    cells = []
    grid = sorted(betas)
    for i, beta_data in enumerate(grid):
        for j, beta_reg in enumerate(grid):
            loss = base.loss
            if loss.variant != "expectile":
                loss = dataclasses.replace(loss, beta=beta_reg)
            config = dataclasses.replace(
                base,
                beta_data=beta_data,
                beta_reg=beta_reg,
                loss=loss,
                stream_key=(i * len(grid) + j,),
            )
            cells.append(CellResult(beta_data, beta_reg, run_cell(config)))
    return cells


def full_batch_descent(
    data: np.ndarray, spec: LossSpec, lr: float, updates: int, init_h: float = 0.0
) -> float:
    """Deterministic gradient descent on the mean loss over the whole dataset."""
    h = init_h
    arr = np.asarray(data, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(updates):
            residuals = arr - h
            if not np.all(np.isfinite(residuals)):
                return math.inf
            step = float(np.mean(loss_grads(spec, residuals)))
            if not math.isfinite(step):
                return math.inf
            h = h - lr * step
    return h


EXPERIMENT_COLUMNS = (
    "cell_beta_data",
    "cell_beta_reg",
    "loss_variant",
    "order",
    "checkpoint",
    "mean_abs_error",
    "std_abs_error",
    "diverged_count",
    "repeats",
)


def experiment_rows(cells: list[CellResult]) -> list[tuple]:
    """Flatten cell traces into EXPERIMENT_COLUMNS rows, canonically sorted.

    Aggregate fields are empty strings when fewer than two (mean: one)
    repeats survived, so the output never contains NaN text.
    """
    rows = []
    for cell in sorted(cells, key=lambda c: (c.beta_data, c.beta_reg)):
        trace = cell.trace
        cfg = trace.config
        order = "" if cfg.loss.order is None else cfg.loss.order
        for k, cp in enumerate(cfg.checkpoints):
            mean = "" if trace.mean_abs_error is None else float(trace.mean_abs_error[k])
            std = "" if trace.std_abs_error is None else float(trace.std_abs_error[k])
            rows.append(
                (
                    cell.beta_data,
                    cell.beta_reg,
                    cfg.loss.variant,
                    order,
                    cp,
                    mean,
                    std,
                    trace.diverged_count,
                    cfg.repeats,
                )
            )
    return rows
