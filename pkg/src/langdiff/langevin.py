"""Langevin dynamics and its decomposition into noising + denoising substeps.

A Langevin step ``dx = g s(x) dtau + sqrt(2 g) dW`` leaves its target
density invariant.  Each sampler family splits that step, at a fixed noise
level, into a forward (noising) part and a reverse (denoising) part whose
drifts and noise variances add back to the Langevin coefficients exactly:

    model      langevin (g)        forward part                     reverse part
    vp-sde     s dtau + sqrt2 dW   -x/2 dtau + dW                   (x/2 + s) dtau + dW
    vp-ode     s/2 dtau + dW       -x/2 dtau + dW                   (x + s)/2 dtau
    ve         sig*s dtau + ...    sqrt(2 sig) dW                   sig * s dtau
    rf         g = s/(1-s)         -r/(1-s) dtau + sqrt(2s/(1-s))dW ((s s_r + r)/(1-s)) dtau

For the ve and rf rows the local clock coincides with the noise level; the
vp rows' coefficients do not involve the clock at all.  The split holds the
level fixed across the substep pair, with independent increments, so one
composed (forward, reverse) pair reproduces one Langevin step for the
distribution at that level up to O(dtau^2) in mean and variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ModelType, Parameterization, RngStream, zero_noise_level


@dataclass(frozen=True)
class LangevinSpec:
    """A Langevin sampler: score field, time-rescaling g, and coordinates.

    ``score_field(state, level)`` returns the score of the target density in
    ``param`` coordinates; ``level`` selects which noised density the run
    targets and stays fixed over the run.
    """

    score_field: Callable[[np.ndarray, float], np.ndarray]
    g: Callable[[float], float]
    param: Parameterization
    level: float | None = None

    @property
    def target_level(self) -> float:
        return zero_noise_level(self.param) if self.level is None else self.level


def langevin_step(
    spec: LangevinSpec, x: np.ndarray, tau: float, dtau: float, rng: RngStream
) -> np.ndarray:
    """One Euler-Maruyama step x + g s dtau + sqrt(2 g dtau) xi.

    dtau should be small relative to the score's curvature scale (for a
    Lipschitz score with constant L, g * L * dtau well below 1).
    """
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau!r}")
    x = np.asarray(x, dtype=np.float64)
    g = spec.g(tau)
    if g <= 0:
        raise ValueError(f"g(tau) must be positive, got {g!r} at tau={tau!r}")
    drift = g * spec.score_field(x, spec.target_level)
    return x + drift * dtau + math.sqrt(2.0 * g * dtau) * rng.normal(x.shape)


def run_langevin(
    spec: LangevinSpec,
    x0: np.ndarray,
    dtau: float,
    steps: int,
    rng: RngStream,
    record_every: int = 0,
) -> tuple[np.ndarray, list[tuple[int, np.ndarray]]]:
    """Iterate langevin_step over an ensemble; optionally record snapshots."""
    x = np.asarray(x0, dtype=np.float64).copy()
    trace: list[tuple[int, np.ndarray]] = []
    for k in range(steps):
        x = langevin_step(spec, x, k * dtau, dtau, rng)
        if record_every and (k + 1) % record_every == 0:
            trace.append((k + 1, x.copy()))
    return x, trace


def run_langevin_ensemble(
    spec: LangevinSpec,
    n_chains: int,
    dim: int,
    init,
    dtau: float,
    steps: int,
    rng: RngStream,
    record_every: int = 0,
    workers: int = 1,
) -> tuple[np.ndarray, list[tuple[int, np.ndarray]]]:
    """Block-parallel Langevin run with per-block RNG substreams.

    ``init(n, rng)`` draws the starting ensemble.  Output is independent of
    ``workers``: blocks are fixed and merged in order.
    """
    from .core import run_chain_blocks

    def block(block_id: int, start: int, count: int):
        block_rng = rng.spawn(rng.stream_id + 1 + block_id)
        x = np.asarray(init(count, block_rng), dtype=np.float64).reshape(count, dim)
        return run_langevin(spec, x, dtau, steps, block_rng, record_every=record_every)

    parts = run_chain_blocks(n_chains, block, workers=workers)
    final = np.concatenate([p[0] for p in parts], axis=0)
    merged: list[tuple[int, np.ndarray]] = []
    if parts and parts[0][1]:
        for i, (step, _) in enumerate(parts[0][1]):
            merged.append(
                (step, np.concatenate([p[1][i][1] for p in parts], axis=0))
            )
    return final, merged


def langevin_g(model_type: ModelType, level: float) -> float:
    """The time-rescaling g of the Langevin dynamics each row decomposes."""
    if model_type is ModelType.VP_SDE:
        return 1.0
    if model_type is ModelType.VP_ODE:
        return 0.5
    if model_type is ModelType.VE_KARRAS:
        return level
    return level / (1.0 - level)


@dataclass(frozen=True)
class SplitCoefficients:
    """Evaluated drift vectors and noise variance rates of one split row.

    Variances are per unit dtau.  drift_forward + drift_reverse equals
    drift_langevin and var_forward + var_reverse equals var_langevin,
    identically in (x, score, level).
    """

    drift_forward: np.ndarray
    var_forward: float
    drift_reverse: np.ndarray
    var_reverse: float
    drift_langevin: np.ndarray
    var_langevin: float


def split_coefficients(
    model_type: ModelType, x: np.ndarray, score: np.ndarray, level: float
) -> SplitCoefficients:
    """Closed-form split coefficients at (x, score, level)."""
    x = np.asarray(x, dtype=np.float64)
    score = np.asarray(score, dtype=np.float64)
    if model_type is ModelType.VP_SDE:
        return SplitCoefficients(
            drift_forward=-0.5 * x,
            var_forward=1.0,
            drift_reverse=0.5 * x + score,
            var_reverse=1.0,
            drift_langevin=score,
            var_langevin=2.0,
        )
    if model_type is ModelType.VP_ODE:
        return SplitCoefficients(
            drift_forward=-0.5 * x,
            var_forward=1.0,
            drift_reverse=0.5 * (x + score),
            var_reverse=0.0,
            drift_langevin=0.5 * score,
            var_langevin=1.0,
        )
    if model_type is ModelType.VE_KARRAS:
        sig = level
        return SplitCoefficients(
            drift_forward=np.zeros_like(x),
            var_forward=2.0 * sig,
            drift_reverse=sig * score,
            var_reverse=0.0,
            drift_langevin=sig * score,
            var_langevin=2.0 * sig,
        )
    s = level
    return SplitCoefficients(
        drift_forward=-x / (1.0 - s),
        var_forward=2.0 * s / (1.0 - s),
        drift_reverse=(s * score + x) / (1.0 - s),
        var_reverse=0.0,
        drift_langevin=(s / (1.0 - s)) * score,
        var_langevin=2.0 * s / (1.0 - s),
    )


@dataclass(frozen=True)
class SplitStep:
    """One sampler row's (forward, reverse) substep pair at a fixed level.

    The score field supplies the denoising drift; coefficients come from
    :func:`split_coefficients` for the row.
    """

    model_type: ModelType
    score_field: Callable[[np.ndarray, float], np.ndarray]

    def forward_part(self, x: np.ndarray, level: float) -> tuple[np.ndarray, float]:
        """(drift, noise variance rate) of the noising substep."""
        c = split_coefficients(self.model_type, x, np.zeros_like(x), level)
        return c.drift_forward, c.var_forward

    def reverse_part(self, x: np.ndarray, level: float) -> tuple[np.ndarray, float]:
        """(drift, noise variance rate) of the denoising substep."""
        c = split_coefficients(self.model_type, x, self.score_field(x, level), level)
        return c.drift_reverse, c.var_reverse


def split_step(
    step: SplitStep, x: np.ndarray, level: float, dtau: float, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the forward part, then the reverse part, with independent noise.

    Returns (state after the forward substep, state after the reverse
    substep).  The level is held fixed across the pair, so the composition
    approximates one Langevin step for the noised density at that level.
    """
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau!r}")
    x = np.asarray(x, dtype=np.float64)
    drift_f, var_f = step.forward_part(x, level)
    x_fwd = x + drift_f * dtau
    if var_f > 0:
        x_fwd = x_fwd + math.sqrt(var_f * dtau) * rng.normal(x.shape)
    drift_r, var_r = step.reverse_part(x_fwd, level)
    x_rev = x_fwd + drift_r * dtau
    if var_r > 0:
        x_rev = x_rev + math.sqrt(var_r * dtau) * rng.normal(x.shape)
    return x_fwd, x_rev
