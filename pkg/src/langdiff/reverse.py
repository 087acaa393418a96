"""Reverse-time generation: the four denoising process rows.

Each row integrates its own reverse clock forward while the forward noise
level runs down through a strictly decreasing clock map::

    vp-sde  dx = [x/2 + score(x, T - t')] dt' + dW      t = T - t',  alpha = exp(-t)
    vp-ode  dx = [x + score(x, T - t')] / 2 dt'         t = T - t'
    ve      dz = -noise(z, Sigma - sig') dsig'          sigma = Sigma - sig'
    rf      dr = -velocity(r, 1 - s') ds'               s = 1 - s'

A row consumes its native prediction kind; fields of another kind are
converted sample-wise through :func:`langdiff.convert.convert_values`, which
is deterministic algebra, so a pre-converted field and an internally
converted one produce bitwise identical trajectories.

Default horizons: vp runs to T = log(1e4), where alpha equals 1e-4; ve
starts at Sigma = 20x an upper bound on the data standard deviation; rf
starts at s = 1 - 1e-3 with initial noise N(0, s^2 I), the s-level marginal
of near-zero data.  The ve start approximates the true sigma = Sigma
marginal by N(0, Sigma^2 I); the approximation error is part of any
comparison's tolerance budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convert import convert_values
from .core import (
    ModelType,
    Parameterization,
    PredictionField,
    PredictionKind,
    RngStream,
    run_chain_blocks,
)
from .forward import vp_alpha_from_time
from .oracle import GaussianMixture, oracle_field, perturb

#: alpha at the default vp horizon; T = -log of this.
VP_TERMINAL_ALPHA = 1e-4

#: ve starts at Sigma = this multiple of the data standard deviation bound.
VE_SIGMA_MULTIPLE = 20.0

#: rf reverse runs start at s = 1 - this offset.
RF_START_OFFSET = 1e-3


def default_horizon(model_type: ModelType, data_std: float = 1.0) -> float:
    """Default reverse horizon: T for vp rows, Sigma for ve, start s for rf."""
    if model_type in (ModelType.VP_SDE, ModelType.VP_ODE):
        return -math.log(VP_TERMINAL_ALPHA)
    if model_type is ModelType.VE_KARRAS:
        return VE_SIGMA_MULTIPLE * data_std
    return 1.0 - RF_START_OFFSET


@dataclass(frozen=True)
class ReverseSpec:
    """One reverse process: a row, a prediction field, and a horizon.

    ``horizon`` is T for the vp rows, Sigma for ve, and the starting level s
    for rf.  ``heun`` switches the deterministic rows to a second-order
    predictor-corrector step.
    """

    model_type: ModelType
    field: PredictionField
    dim: int
    horizon: float
    heun: bool = False

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if self.model_type is ModelType.RECTIFIED_FLOW and self.horizon >= 1.0:
            raise ValueError("rf horizon is the starting level s and must be < 1")

    @property
    def window(self) -> tuple[float, float]:
        """The reverse-time interval the process integrates over."""
        if self.model_type is ModelType.RECTIFIED_FLOW:
            return (1.0 - self.horizon, 1.0)
        return (0.0, self.horizon)

    def forward_level(self, t_rev: float) -> float:
        """Forward noise level at reverse time; strictly decreasing in noise."""
        if self.model_type in (ModelType.VP_SDE, ModelType.VP_ODE):
            return vp_alpha_from_time(self.horizon - t_rev)
        if self.model_type is ModelType.VE_KARRAS:
            return self.horizon - t_rev
        return 1.0 - t_rev

    def forward_clock(self, t_rev: float) -> float:
        """Forward clock (t, sigma, or s) at reverse time t_rev."""
        if self.model_type in (ModelType.VP_SDE, ModelType.VP_ODE):
            return self.horizon - t_rev
        return self.forward_level(t_rev)


def reverse_spec(
    model_type: ModelType,
    field: PredictionField,
    dim: int,
    data_std: float = 1.0,
    horizon: float | None = None,
    heun: bool = False,
) -> ReverseSpec:
    if horizon is None:
        horizon = default_horizon(model_type, data_std)
    return ReverseSpec(model_type=model_type, field=field, dim=dim, horizon=horizon, heun=heun)


def _native_values(spec: ReverseSpec, x: np.ndarray, level: float) -> np.ndarray:
    values = spec.field(x, level)
    if spec.field.kind is spec.model_type.native_kind:
        return values
    return convert_values(
        values, spec.field.kind, spec.model_type.native_kind, x, level, spec.model_type.param
    )


def _row_drift(model_type: ModelType, x: np.ndarray, native: np.ndarray) -> np.ndarray:
    if model_type is ModelType.VP_SDE:
        return 0.5 * x + native
    if model_type is ModelType.VP_ODE:
        return 0.5 * (x + native)
    return -native


def reverse_step(
    spec: ReverseSpec, x: np.ndarray, t_rev: float, dt_rev: float, rng: RngStream
) -> np.ndarray:
    """One reverse step from t_rev to t_rev + dt_rev.

    Euler-Maruyama for the vp-sde row, explicit Euler (or Heun) for the
    deterministic rows.  The field is evaluated at the mapped forward level
    and converted to the row's native kind if needed.
    """
    if dt_rev <= 0:
        raise ValueError(f"dt_rev must be positive, got {dt_rev!r}")
    lo, hi = spec.window
    if t_rev < lo - 1e-12 or t_rev + dt_rev > hi + 1e-12:
        raise ValueError(
            f"step [{t_rev}, {t_rev + dt_rev}] leaves the reverse window [{lo}, {hi}]"
        )
    x = np.asarray(x, dtype=np.float64)
    level = spec.forward_level(t_rev)
    drift = _row_drift(spec.model_type, x, _native_values(spec, x, level))
    if spec.model_type is ModelType.VP_SDE:
        return x + drift * dt_rev + math.sqrt(dt_rev) * rng.normal(x.shape)
    x_next = x + drift * dt_rev
    if spec.heun:
        level_next = spec.forward_level(t_rev + dt_rev)
        drift_next = _row_drift(
            spec.model_type, x_next, _native_values(spec, x_next, level_next)
        )
        x_next = x + 0.5 * (drift + drift_next) * dt_rev
    return x_next


def initial_ensemble(spec: ReverseSpec, n_chains: int, rng: RngStream) -> np.ndarray:
    """Draws from the reverse process's starting distribution.

    vp rows: N(0, I); ve: N(0, Sigma^2 I); rf: N(0, s_start^2 I), the
    s-level marginal scale.
    """
    eps = rng.normal((n_chains, spec.dim))
    if spec.model_type in (ModelType.VE_KARRAS, ModelType.RECTIFIED_FLOW):
        return spec.horizon * eps
    return eps


def karras_sigma_grid(
    sigma_max: float, steps: int, sigma_min: float = 1e-3, rho: float = 7.0
) -> np.ndarray:
    """Reverse-time grid for the ve row with polynomially spaced sigmas.

    Sigma runs from sigma_max down through the rho-power interpolation to
    sigma_min and then one final step to 0; returned as reverse times
    sigma' = sigma_max - sigma.  The exponent is an artifact choice.
    """
    if steps < 2:
        raise ValueError("karras grids need at least 2 steps")
    i = np.arange(steps)
    inv = 1.0 / rho
    sigmas = (
        sigma_max**inv + i / (steps - 1) * (sigma_min**inv - sigma_max**inv)
    ) ** rho
    sigmas = np.concatenate([sigmas, [0.0]])
    return sigma_max - sigmas


def generate(
    spec: ReverseSpec,
    n_chains: int,
    steps: int,
    rng: RngStream,
    workers: int = 1,
    record_times: list[float] | None = None,
    grid: np.ndarray | None = None,
) -> tuple[np.ndarray, dict[float, np.ndarray]]:
    """Integrate the reverse process over an ensemble of chains.

    Uses ``steps`` uniform steps across the reverse window unless an
    explicit strictly increasing reverse-time ``grid`` is given.
    ``record_times`` are snapped to the nearest grid time and returned
    alongside the terminal ensemble.  Chains split into fixed blocks with
    per-block RNG substreams, so output does not depend on ``workers``.
    steps == 0 returns the initial noise ensemble unchanged.
    """
    lo, hi = spec.window
    if grid is None:
        grid = np.linspace(lo, hi, steps + 1)
    else:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing reverse times")
        if grid[0] < lo - 1e-12 or grid[-1] > hi + 1e-12:
            raise ValueError(f"grid must stay inside the reverse window [{lo}, {hi}]")
        steps = grid.size - 1
    record_idx: dict[int, float] = {}
    if record_times:
        for t in record_times:
            k = int(np.argmin(np.abs(grid - t)))
            record_idx[k] = t

    def block(block_id: int, start: int, count: int):
        block_rng = rng.spawn(rng.stream_id + 1 + block_id)
        x = initial_ensemble(spec, count, block_rng)
        recorded: dict[float, np.ndarray] = {}
        if 0 in record_idx:
            recorded[record_idx[0]] = x.copy()
        for k in range(steps):
            dt = float(grid[k + 1] - grid[k])
            x = reverse_step(spec, x, float(grid[k]), dt, block_rng)
            if (k + 1) in record_idx:
                recorded[record_idx[k + 1]] = x.copy()
        return x, recorded

    parts = run_chain_blocks(n_chains, block, workers=workers)
    final = np.concatenate([p[0] for p in parts], axis=0)
    records = {
        t: np.concatenate([p[1][t] for p in parts], axis=0)
        for t in {t for _, rec in parts for t in rec}
    }
    return final, records


def _mixture_fourth_moments(pm) -> np.ndarray:
    """Per-coordinate central fourth moments of a Gaussian mixture."""
    mix = pm.mixture
    m = mix.mean()
    out = np.zeros(mix.dim)
    for k in range(mix.n_components):
        delta = mix.means[k] - m
        v = np.diag(mix.covariances[k])
        out += mix.weights[k] * (3.0 * v**2 + 6.0 * v * delta**2 + delta**4)
    return out


@dataclass(frozen=True)
class CheckpointComparison:
    """Ensemble moments vs the analytic marginal at one reverse time."""

    t_rev: float
    level: float
    mean_error: np.ndarray
    cov_error: np.ndarray
    mean_tolerance: np.ndarray
    cov_tolerance: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(
            np.all(np.abs(self.mean_error) <= self.mean_tolerance)
            and np.all(np.abs(self.cov_error) <= self.cov_tolerance)
        )

    @property
    def max_ratio(self) -> float:
        return float(
            max(
                np.max(np.abs(self.mean_error) / self.mean_tolerance),
                np.max(np.abs(self.cov_error) / self.cov_tolerance),
            )
        )


@dataclass(frozen=True)
class DualityReport:
    """Reverse ensembles against analytic forward marginals, checkpoint by checkpoint."""

    model_type: ModelType
    checkpoints: list[CheckpointComparison]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checkpoints)

    @property
    def max_discrepancy(self) -> float:
        return max(c.max_ratio for c in self.checkpoints)


def duality_check(
    data: GaussianMixture,
    model_type: ModelType,
    n_chains: int = 20_000,
    steps: int = 400,
    n_checkpoints: int = 5,
    rng: RngStream | None = None,
    horizon: float | None = None,
    workers: int = 1,
    bias_budget: float = 3.0,
) -> DualityReport:
    """Compare reverse ensembles to the analytic noised data at checkpoints.

    At each of ``n_checkpoints`` reverse times (including the terminal one)
    the ensemble's mean and covariance are compared to the exact pushforward
    of ``data`` at the mapped forward level.  Tolerances are 4 standard
    errors plus an O(step) discretization allowance of ``bias_budget`` times
    the step size, scaled by the marginal's standard deviation.
    """
    rng = rng or RngStream(0)
    data_std = math.sqrt(max(np.max(np.linalg.eigvalsh(data.cov())), 1e-12))
    field = oracle_field(data, model_type.param, model_type.native_kind)
    spec = reverse_spec(model_type, field, data.dim, data_std=data_std, horizon=horizon)
    lo, hi = spec.window
    times = [lo + (hi - lo) * k / n_checkpoints for k in range(1, n_checkpoints + 1)]
    _, records = generate(
        spec, n_chains, steps, rng, workers=workers, record_times=times
    )
    dt = (hi - lo) / steps
    comparisons = []
    for t in times:
        ens = records[t]
        level = spec.forward_level(t)
        if model_type.param is Parameterization.VP:
            level = min(level, 1.0)
        else:
            level = max(level, 0.0)
        pm = perturb(data, model_type.param, level)
        mean_exact = pm.mean()
        cov_exact = pm.cov()
        n = ens.shape[0]
        mean_obs = ens.mean(axis=0)
        cov_obs = np.cov(ens.T, ddof=1).reshape(data.dim, data.dim)
        std_exact = np.sqrt(np.diag(cov_exact))
        se_mean = std_exact / math.sqrt(n)
        # Var of a sample variance is (m4 - var^2)/n; exact per coordinate,
        # Gaussian proxy for off-diagonal entries.
        m4 = _mixture_fourth_moments(pm)
        var_diag = np.diag(cov_exact)
        se_cov = np.sqrt((np.outer(var_diag, var_diag) + np.abs(cov_exact) ** 2) / n)
        np.fill_diagonal(se_cov, np.sqrt(np.maximum(m4 - var_diag**2, 0.0) / n))
        scale = max(np.max(std_exact), 1.0)
        mean_tol = 4.0 * se_mean + bias_budget * dt * scale
        cov_tol = 4.0 * se_cov + bias_budget * dt * scale * scale
        comparisons.append(
            CheckpointComparison(
                t_rev=t,
                level=level,
                mean_error=mean_obs - mean_exact,
                cov_error=cov_obs - cov_exact,
                mean_tolerance=mean_tol,
                cov_tolerance=cov_tol,
            )
        )
    return DualityReport(model_type=model_type, checkpoints=comparisons)
