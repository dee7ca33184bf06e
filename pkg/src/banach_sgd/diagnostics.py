"""Quality metrics, theoretical bound calculators, and seed-ensemble statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, InvalidInputError
from .operators import BlockOperator, ObservationSet
from .spaces import SpaceDescriptor, bregman_distance, lr_norm

__all__ = [
    "ConvergenceRecord",
    "EnsembleTrace",
    "StabilityResult",
    "objective",
    "delta_metrics",
    "support_f1",
    "polyak_bound",
    "rate_envelope",
    "monte_carlo_mean",
    "stability_probe",
    "minimum_norm_solution",
]

CSV_HEADER = "epoch,objective,residual,bregman,delta1,delta2,step"


@dataclass
class ConvergenceRecord:
    """Per-epoch trace of a solver run.

    Columns: epoch index, objective value, full residual norm, Bregman
    distance to the reference, normalised l1/l2 errors against the true
    signal, and the step size in effect.  Reference columns are NaN when no
    reference was supplied.
    """

    epoch: np.ndarray = field(default_factory=lambda: np.empty(0))
    objective: np.ndarray = field(default_factory=lambda: np.empty(0))
    residual: np.ndarray = field(default_factory=lambda: np.empty(0))
    bregman: np.ndarray = field(default_factory=lambda: np.empty(0))
    delta1: np.ndarray = field(default_factory=lambda: np.empty(0))
    delta2: np.ndarray = field(default_factory=lambda: np.empty(0))
    step: np.ndarray = field(default_factory=lambda: np.empty(0))

    _COLUMNS = ("epoch", "objective", "residual", "bregman", "delta1", "delta2", "step")

    def __post_init__(self):
        for name in self._COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.validate()

    def validate(self):
        n = self.epoch.size
        for name in self._COLUMNS:
            if getattr(self, name).size != n:
                raise DimensionMismatchError(f"column {name} has wrong length")
        if n > 1 and not np.all(np.diff(self.epoch) > 0):
            raise InvalidInputError("epochs must be strictly increasing")
        for name in ("epoch", "objective", "residual", "step"):
            if not np.isfinite(getattr(self, name)).all():
                raise InvalidInputError(f"column {name} contains non-finite entries")

    def column(self, name: str) -> np.ndarray:
        if name not in self._COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as f:
            f.write(CSV_HEADER + "\n")
            for i in range(self.epoch.size):
                f.write(
                    ",".join(
                        format(getattr(self, c)[i], ".17g") for c in self._COLUMNS
                    )
                )
                f.write("\n")

    @classmethod
    def from_rows(cls, rows) -> "ConvergenceRecord":
        cols = list(zip(*rows)) if rows else [[]] * len(cls._COLUMNS)
        return cls(*[np.asarray(c, dtype=float) for c in cols])


def objective(x, op: BlockOperator, obs: ObservationSet, exponent: float) -> float:
    """(1/N) sum_i (1/exponent) ||A_i x - y_i||^exponent in the output norm."""
    if exponent <= 1.0:
        raise ConfigurationError("objective exponent must be > 1")
    ry = op.output_space.r
    total = 0.0
    for i in range(op.n_blocks):
        total += lr_norm(op.apply(i, x) - obs.blocks[i], ry) ** exponent / exponent
    return total / op.n_blocks


def delta_metrics(x, x_true):
    """Normalised l1 and l2 reconstruction errors (delta1, delta2)."""
    x = np.asarray(x, dtype=float).ravel()
    xt = np.asarray(x_true, dtype=float).ravel()
    if x.shape != xt.shape:
        raise DimensionMismatchError("reconstruction and reference lengths differ")
    n1 = float(np.sum(np.abs(xt)))
    n2 = float(np.sqrt(np.sum(xt * xt)))
    if n1 == 0.0 or n2 == 0.0:
        raise InvalidInputError("reference signal must be nonzero")
    d = xt - x
    return float(np.sum(np.abs(d))) / n1, float(np.sqrt(np.sum(d * d))) / n2


def support_f1(x, x_true, threshold: float | None = None) -> float:
    """F1 score of {|x_j| > threshold} against the true support {x_true_j != 0}.

    The default threshold is 0.1 * max|x_true|.
    """
    x = np.asarray(x, dtype=float).ravel()
    xt = np.asarray(x_true, dtype=float).ravel()
    if threshold is None:
        threshold = 0.1 * float(np.max(np.abs(xt)))
    if threshold <= 0:
        raise ConfigurationError("threshold must be positive")
    predicted = np.abs(x) > threshold
    actual = np.abs(xt) > 0
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    if 2 * tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def polyak_bound(delta0: float, alpha: float, steps) -> np.ndarray:
    """Closed-form majorant of the recursion d_{n+1} <= d_n - mu_{n+1} d_n^(1+alpha).

    Entry n of the result bounds d_n; entry 0 equals delta0.
    """
    if delta0 < 0:
        raise InvalidInputError("delta0 must be >= 0")
    if alpha <= 0:
        raise ConfigurationError("alpha must be > 0")
    mu = np.asarray(steps, dtype=float)
    if mu.size and mu.min() <= 0:
        raise ConfigurationError("step sizes must be positive")
    sums = np.concatenate([[0.0], np.cumsum(mu)])
    return delta0 * (1.0 + alpha * delta0 ** alpha * sums) ** (-1.0 / alpha)


def rate_envelope(delta0: float, alpha: float, per_step) -> np.ndarray:
    """Convergence-rate envelope under a Hoelder-type stability exponent alpha.

    For alpha = 1 the envelope after k steps is delta0 * exp(-sum_{j<=k} c_j);
    for alpha > 1 it is delta0 * (1 + (alpha-1) delta0^(alpha-1)
    sum_{j<=k} c_j)^(-1/(alpha-1)).  Entry 0 equals delta0.
    """
    if delta0 < 0:
        raise InvalidInputError("delta0 must be >= 0")
    if alpha < 1.0:
        raise ConfigurationError("alpha must be >= 1")
    c = np.asarray(per_step, dtype=float)
    sums = np.concatenate([[0.0], np.cumsum(c)])
    if alpha == 1.0:
        return delta0 * np.exp(-sums)
    return delta0 * (1.0 + (alpha - 1.0) * delta0 ** (alpha - 1.0) * sums) ** (-1.0 / (alpha - 1.0))


@dataclass
class EnsembleTrace:
    """Per-epoch sample mean and standard error over a seed ensemble."""

    epoch: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_seeds: int


def monte_carlo_mean(op, obs, cfg, n_seeds: int, field_name: str = "bregman",
                     x_true=None, x_ref=None) -> EnsembleTrace:
    """Run the solver with seeds cfg.seed .. cfg.seed + n_seeds - 1 and average.

    Returns the per-epoch sample mean and standard error of the requested
    record column.  Accumulation follows ascending seed order, so the result
    is deterministic; the mean itself is order-independent.
    """
    from . import solver  # deferred to avoid a module cycle

    if n_seeds < 2:
        raise ConfigurationError("need at least 2 seeds for a standard error")
    traces = []
    epochs = None
    for j in range(n_seeds):
        cfg_j = solver.with_seed(cfg, cfg.seed + j)
        result = solver.run(op, obs, cfg_j, x_true=x_true, x_ref=x_ref)
        traces.append(result.record.column(field_name))
        if epochs is None:
            epochs = result.record.epoch
    data = np.vstack(traces)
    mean = data.mean(axis=0)
    stderr = data.std(axis=0, ddof=1) / math.sqrt(n_seeds)
    return EnsembleTrace(epochs, mean, stderr, n_seeds)


@dataclass
class StabilityResult:
    """Mean discrepancies between noise-coupled runs, one row per noise level."""

    deltas: np.ndarray
    bregman_gap: np.ndarray
    primal_gap: np.ndarray
    dual_gap: np.ndarray


def stability_probe(op, y_clean, cfg, k_fixed: int, deltas, n_seeds: int = 20,
                    noise_seed: int = 0) -> StabilityResult:
    """Couple clean and noisy runs through identical index draws.

    For every requested noise level the clean data is perturbed by a Gaussian
    direction rescaled to that exact level, both runs are advanced k_fixed
    iterations with the same random indices, and the mean Bregman distance,
    primal norm gap and dual-map gap between the two end states are reported.
    """
    from . import solver

    y_clean = np.asarray(y_clean, dtype=float).ravel()
    obs_clean = ObservationSet.from_full(y_clean, op)
    deltas = np.asarray(deltas, dtype=float)
    ry = op.output_space.r
    rx_conj = cfg.x_space.r_conj
    breg = np.zeros(deltas.size)
    primal = np.zeros(deltas.size)
    dual = np.zeros(deltas.size)
    for di, delta in enumerate(deltas):
        acc = np.zeros(3)
        for j in range(n_seeds):
            if delta > 0:
                rng = np.random.Generator(np.random.Philox(key=noise_seed + j))
                direction = rng.normal(size=y_clean.size)
                xi = delta * direction / lr_norm(direction, ry)
            else:
                xi = np.zeros_like(y_clean)
            obs_noisy = ObservationSet.from_full(y_clean + xi, op, noise_level=float(delta))
            cfg_j = solver.with_seed(cfg, cfg.seed + j)
            clean = solver.iterate_n(op, obs_clean, cfg_j, k_fixed)
            noisy = solver.iterate_n(op, obs_noisy, cfg_j, k_fixed)
            acc[0] += bregman_distance(noisy.x, clean.x, cfg.x_space)
            acc[1] += lr_norm(noisy.x - clean.x, cfg.x_space.r)
            acc[2] += lr_norm(noisy.dual_x - clean.dual_x, rx_conj)
        breg[di], primal[di], dual[di] = acc / n_seeds
    return StabilityResult(deltas, breg, primal, dual)


def minimum_norm_solution(A, y, x_space: SpaceDescriptor, landweber_steps: int = 100_000,
                          step_scale: float = 0.9) -> np.ndarray:
    """Approximate the solution of A x = y with the smallest l^r norm.

    The minimum norm solution depends only on the norm exponent r of
    x_space, never on its gauge power.  For r = 2 this is the dense
    least-norm solve.  Otherwise a long deterministic descent run from zero
    is used, with the canonical convexity power max(r, 2) as the internal
    gauge; starting at zero keeps every iterate's dual image inside the
    closure of range(A^T), which pins the limit to the minimum norm solution.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    r = x_space.r
    if r == 2.0:
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        return sol
    from . import solver

    spectral = np.linalg.norm(A, 2)
    r_conj = x_space.r_conj
    if r < 2.0:
        # gauge 2: the dual l^(r*) (r* > 2) is 2-smooth with constant r* - 1
        gauge = 2.0
        mu = step_scale / ((r_conj - 1.0) * spectral ** 2)
    else:
        # gauge r: the dual l^(r*) (r* < 2) is r*-smooth; use a safety factor 2
        gauge = r
        mu = step_scale * (r_conj / (2.0 * spectral ** r_conj)) ** (1.0 / (r_conj - 1.0))
    op = BlockOperator([A], SpaceDescriptor.hilbert())
    obs = ObservationSet.from_full(y, op)
    cfg = solver.SolverConfig(
        x_space=SpaceDescriptor(r, gauge),
        y_space=SpaceDescriptor.hilbert(),
        schedule=solver.ConstantSchedule(mu),
        method="landweber",
        epochs=landweber_steps,
    )
    return solver.run(op, obs, cfg).state.x
