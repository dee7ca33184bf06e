"""Mini-batch descent in dual coordinates for row-partitioned linear systems.

The iteration keeps the dual variable z_k = J_p(x_k) and applies the affine
update z <- z - mu * g, re-deriving the primal iterate through the inverse
duality map.  Update directions:

  * "sgd":                  g = A_i^T j_p(A_i x - y_i), i drawn uniformly
  * "landweber":            g = A^T j_p(A x - y), deterministic full residual
  * "generalized_kaczmarz": g = A_i^T j_q(A_i x - y_i), 1 < q <= 2

where j_e is the duality map of the output l^r space with power e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import ConvergenceRecord, delta_metrics, objective
from .exceptions import ConfigurationError, IterationInvariantError
from .operators import BlockOperator, ObservationSet
from .spaces import (
    SpaceDescriptor,
    bregman_distance,
    duality_map,
    inverse_duality_map,
    lr_norm,
)

__all__ = [
    "PolynomialSchedule",
    "SlowDecaySchedule",
    "ConstantSchedule",
    "MaxEpochs",
    "APrioriStop",
    "SolverConfig",
    "IterationState",
    "ConstantsConfig",
    "RunResult",
    "step_size",
    "a_priori_stop_index",
    "stochastic_gradient",
    "sgd_step",
    "landweber_step",
    "theoretical_max_step",
    "estimate_constants",
    "initial_state",
    "iterate_n",
    "run",
    "with_seed",
]


@dataclass(frozen=True)
class PolynomialSchedule:
    """mu_k = mu0 * k^(-beta).  Summable in the p*-th power when beta > 1/p*."""

    mu0: float
    beta: float

    def __post_init__(self):
        if self.mu0 <= 0:
            raise ConfigurationError("mu0 must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigurationError(f"decay exponent must lie in (0, 1]; got {self.beta}")


@dataclass(frozen=True)
class SlowDecaySchedule:
    """mu_k = scale / (1 + 0.05 * (k / n_batches)^(1/p* + 0.01)).

    Decays just fast enough that the p*-th powers of the steps are summable
    while the steps themselves are not.
    """

    scale: float
    n_batches: int
    p_conj: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")
        if self.n_batches < 1:
            raise ConfigurationError("n_batches must be >= 1")
        if self.p_conj <= 1:
            raise ConfigurationError("conjugate power must be > 1")


@dataclass(frozen=True)
class ConstantSchedule:
    mu0: float

    def __post_init__(self):
        if self.mu0 <= 0:
            raise ConfigurationError("step size must be positive")


StepSchedule = PolynomialSchedule | SlowDecaySchedule | ConstantSchedule


def step_size(schedule: StepSchedule, k: int) -> float:
    """Step size for iteration k (1-based)."""
    if k < 1:
        raise ConfigurationError(f"iteration index must be >= 1, got {k}")
    if isinstance(schedule, PolynomialSchedule):
        return schedule.mu0 * float(k) ** (-schedule.beta)
    if isinstance(schedule, SlowDecaySchedule):
        exponent = 1.0 / schedule.p_conj + 0.01
        return schedule.scale / (1.0 + 0.05 * (k / schedule.n_batches) ** exponent)
    if isinstance(schedule, ConstantSchedule):
        return schedule.mu0
    raise ConfigurationError(f"unknown schedule: {schedule!r}")


@dataclass(frozen=True)
class MaxEpochs:
    epochs: int

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epoch count must be >= 0")


@dataclass(frozen=True)
class APrioriStop:
    """Noise-adapted early stopping: k(delta) = ceil(delta^(-theta*power/(1-beta))).

    As the noise level shrinks, k(delta) grows without bound while
    k(delta) * delta^(power/(1-beta)) still vanishes, for any theta < 1.
    """

    delta: float
    beta: float
    power: float
    theta: float = 0.9

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigurationError("noise level must be positive")
        if not 0.0 < self.theta < 1.0:
            raise ConfigurationError("safety factor theta must lie in (0, 1)")
        if self.beta >= 1.0:
            raise ConfigurationError("beta = 1 leaves the stop index undefined; use MaxEpochs")
        if self.beta < 0.0:
            raise ConfigurationError("beta must be >= 0")
        if self.power <= 1.0:
            raise ConfigurationError("power must be > 1")


StoppingRule = MaxEpochs | APrioriStop


def a_priori_stop_index(rule: APrioriStop) -> int:
    exponent = -rule.theta * rule.power / (1.0 - rule.beta)
    log_k = exponent * math.log(rule.delta)
    if log_k > 60:  # e^60 iterations is far beyond any runnable budget
        raise ConfigurationError(
            f"a-priori stop index exp({log_k:.1f}) is astronomically large; "
            "loosen beta/theta or raise the noise level"
        )
    return max(1, math.ceil(math.exp(log_k)))


@dataclass(frozen=True)
class SolverConfig:
    """Everything that determines a run: geometry, method, schedule, stopping, seed."""

    x_space: SpaceDescriptor
    y_space: SpaceDescriptor
    schedule: StepSchedule
    method: str = "sgd"
    q: float | None = None
    stopping: StoppingRule | None = None
    seed: int = 0
    epochs: int = 1

    def __post_init__(self):
        if self.method not in ("sgd", "landweber", "generalized_kaczmarz"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.method == "generalized_kaczmarz":
            if self.q is None or not 1.0 < self.q <= 2.0:
                raise ConfigurationError(
                    f"generalized_kaczmarz needs a residual power 1 < q <= 2; got {self.q}"
                )
        elif self.q is not None:
            raise ConfigurationError("q is only meaningful for generalized_kaczmarz")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if isinstance(self.schedule, PolynomialSchedule):
            if self.schedule.beta <= 1.0 / self.x_space.p_conj:
                raise ConfigurationError(
                    f"polynomial decay needs beta > 1/p* = {1.0 / self.x_space.p_conj:.4g}; "
                    f"got beta = {self.schedule.beta}"
                )

    @property
    def gradient_exponent(self) -> float:
        """Duality power applied to the residual when forming the update."""
        return self.q if self.method == "generalized_kaczmarz" else self.x_space.p


def with_seed(cfg: SolverConfig, seed: int) -> SolverConfig:
    return replace(cfg, seed=seed)


@dataclass
class IterationState:
    """Primal iterate, its dual image, the iteration counter, and the index RNG."""

    x: np.ndarray
    dual_x: np.ndarray
    k: int
    rng: np.random.Generator


def initial_state(op: BlockOperator, cfg: SolverConfig) -> IterationState:
    """Zero start; J_p(0) = 0 lies in the closure of range(A^T) for free."""
    n = op.input_dim
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    return IterationState(np.zeros(n), np.zeros(n), 0, rng)


def stochastic_gradient(x, obs: ObservationSet, op: BlockOperator, i: int,
                        exponent: float) -> np.ndarray:
    """A_i^T applied to the output-space duality map of the residual A_i x - y_i."""
    if exponent <= 1.0:
        raise ConfigurationError("residual power must be > 1")
    residual = op.apply(i, x) - obs.blocks[i]
    jres = duality_map(residual, SpaceDescriptor(op.output_space.r, exponent))
    return op.apply_adjoint(i, jres)


def sgd_step(state: IterationState, op: BlockOperator, obs: ObservationSet,
             cfg: SolverConfig, mu: float) -> IterationState:
    """One stochastic step: draw a block uniformly, move in the dual, remap."""
    i = int(state.rng.integers(op.n_blocks))
    g = stochastic_gradient(state.x, obs, op, i, cfg.gradient_exponent)
    dual = state.dual_x - mu * g
    x = inverse_duality_map(dual, cfg.x_space)
    return IterationState(x, dual, state.k + 1, state.rng)


def landweber_step(state: IterationState, op: BlockOperator, obs: ObservationSet,
                   cfg: SolverConfig, mu: float) -> IterationState:
    """One deterministic step using the full concatenated residual."""
    residual = op.apply_all(state.x) - obs.concatenated
    jres = duality_map(residual, SpaceDescriptor(op.output_space.r, cfg.gradient_exponent))
    g = op.full_matrix.T @ jres
    dual = state.dual_x - mu * g
    x = inverse_duality_map(dual, cfg.x_space)
    return IterationState(x, dual, state.k + 1, state.rng)


def _stepper(cfg: SolverConfig):
    return landweber_step if cfg.method == "landweber" else sgd_step


def iterate_n(op: BlockOperator, obs: ObservationSet, cfg: SolverConfig,
              n_iterations: int) -> IterationState:
    """Advance n_iterations from the zero start and return the final state."""
    state = initial_state(op, cfg)
    step = _stepper(cfg)
    for _ in range(n_iterations):
        mu = step_size(cfg.schedule, state.k + 1)
        state = step(state, op, obs, cfg, mu)
    return state


@dataclass(frozen=True)
class ConstantsConfig:
    """Empirical smoothness/convexity constants of the solution-space geometry."""

    G_pstar: float
    C_p: float
    estimation_samples: int = 0

    def __post_init__(self):
        if self.G_pstar <= 0 or self.C_p <= 0:
            raise ConfigurationError("geometry constants must be positive")


def theoretical_max_step(constants: ConstantsConfig, l_max: float, p_conj: float) -> float:
    """Largest constant step with guaranteed per-step error monotonicity.

    Solves mu^(p*-1) = p* / (G_{p*} L_max^{p*}).
    """
    if l_max <= 0 or p_conj <= 1:
        raise ConfigurationError("need l_max > 0 and p* > 1")
    return (p_conj / (constants.G_pstar * l_max ** p_conj)) ** (1.0 / (p_conj - 1.0))


def estimate_constants(desc: SpaceDescriptor, dim: int, samples: int = 200,
                       seed: int = 0) -> ConstantsConfig:
    """Sample-based surrogate for the geometry constants G_{p*} and C_p.

    G_{p*} is the running max of p* D_dual(z*, w*) / ||w* - z*||^{p*} over
    random dual pairs, inflated by 1.2; C_p the running min of
    p D(z, w) / ||w - z||^p over random primal pairs, deflated by 0.8.  In the
    Hilbert case both raw ratios are identically 1.
    """
    if dim < 1 or samples < 1:
        raise ConfigurationError("dim and samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    dual = desc.dual
    g_max = 0.0
    c_min = math.inf
    for _ in range(samples):
        z = rng.normal(size=dim) * math.exp(rng.uniform(-2.0, 2.0))
        w = rng.normal(size=dim) * math.exp(rng.uniform(-2.0, 2.0))
        gap = lr_norm(w - z, desc.r)
        if gap > 1e-12:
            c_min = min(c_min, desc.p * bregman_distance(z, w, desc) / gap ** desc.p)
        zs = rng.normal(size=dim) * math.exp(rng.uniform(-2.0, 2.0))
        ws = rng.normal(size=dim) * math.exp(rng.uniform(-2.0, 2.0))
        gap_s = lr_norm(ws - zs, dual.r)
        if gap_s > 1e-12:
            g_max = max(g_max, dual.p * bregman_distance(zs, ws, dual) / gap_s ** dual.p)
    if not math.isfinite(c_min) or g_max == 0.0:
        raise ConfigurationError("constant estimation degenerated; increase samples")
    return ConstantsConfig(1.2 * g_max, 0.8 * c_min, samples)


@dataclass
class RunResult:
    record: ConvergenceRecord
    state: IterationState


def _iteration_budget(op: BlockOperator, cfg: SolverConfig):
    per_epoch = 1 if cfg.method == "landweber" else op.n_blocks
    if isinstance(cfg.stopping, APrioriStop):
        total = a_priori_stop_index(cfg.stopping)
    elif isinstance(cfg.stopping, MaxEpochs):
        total = cfg.stopping.epochs * per_epoch
    else:
        total = cfg.epochs * per_epoch
    return total, per_epoch


def run(op: BlockOperator, obs: ObservationSet, cfg: SolverConfig,
        x_true=None, x_ref=None) -> RunResult:
    """Run the configured iteration from zero and record per-epoch diagnostics.

    x_ref is the reference for the Bregman column (usually the minimum norm
    solution); x_true feeds the normalised l1/l2 error columns.  Both are
    optional, leaving NaN columns.  The run is fully determined by
    (cfg.seed, op, obs).
    """
    state = initial_state(op, cfg)
    step = _stepper(cfg)
    total, per_epoch = _iteration_budget(op, cfg)
    exponent = cfg.gradient_exponent
    y_full = obs.concatenated
    ry = op.output_space.r
    sizes = {b.shape[0] for b in op.blocks}
    block_rows = sizes.pop() if len(sizes) == 1 else None

    def snapshot(mu):
        x = state.x
        if not np.isfinite(x).all():
            raise IterationInvariantError(f"non-finite iterate at iteration {state.k}")
        # One full pass gives both the residual norm and the objective; for
        # equisized blocks the per-block norms vectorise over a reshape.
        # Overflow is silenced here and reported as a divergence error below.
        full_res = op.apply_all(x) - y_full
        with np.errstate(over="ignore", invalid="ignore"):
            res = lr_norm(full_res, ry)
            if block_rows is not None:
                rows = np.abs(full_res.reshape(op.n_blocks, block_rows))
                m = rows.max(axis=1)
                safe = np.where(m > 0, m, 1.0)
                norms = safe * np.sum((rows / safe[:, None]) ** ry, axis=1) ** (1.0 / ry)
                norms[m == 0] = 0.0
                obj = float(np.sum(norms ** exponent)) / (exponent * op.n_blocks)
            else:
                obj = objective(x, op, obs, exponent)
        if not (math.isfinite(obj) and math.isfinite(res)):
            raise IterationInvariantError(
                f"diverged at iteration {state.k} (objective {obj:.3g}); reduce the step size"
            )
        breg = bregman_distance(x, x_ref, cfg.x_space) if x_ref is not None else math.nan
        if x_true is not None:
            d1, d2 = delta_metrics(x, x_true)
        else:
            d1 = d2 = math.nan
        return (state.k / per_epoch, obj, res, breg, d1, d2, mu)

    rows = [snapshot(step_size(cfg.schedule, 1))]
    for k in range(1, total + 1):
        mu = step_size(cfg.schedule, k)
        state = step(state, op, obs, cfg, mu)
        if state.k % per_epoch == 0 or state.k == total:
            rows.append(snapshot(mu))
    return RunResult(ConvergenceRecord.from_rows(rows), state)
