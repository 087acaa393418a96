"""Forward noising: closed-form marginals and direct SDE simulation.

Each parameterization mixes data and noise as ``state = a * x0 + b * eps``
with level-dependent coefficients::

    vp:  a = sqrt(alpha), b = sqrt(1 - alpha)    d x = -x/2 dt + dW,  alpha = exp(-t)
    ve:  a = 1,           b = sigma              d z = sqrt(2 sigma) dW_sigma
    rf:  a = 1 - s,       b = s                  d r = -r/(1-s) ds + sqrt(2s/(1-s)) dW_s

The VE and RF SDE clocks coincide with their noise levels; the VP SDE runs
in t = -log(alpha).  :func:`vp_time_from_alpha` / :func:`vp_alpha_from_time`
are the single source of that clock conversion for the whole package.

The Euler-Maruyama integrator exists to validate that simulating the SDE
reproduces the closed-form marginal; the closed form is exact and is what
everything else uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    DomainError,
    ParamPoint,
    Parameterization,
    RngStream,
    run_chain_blocks,
    validate_level,
    zero_noise_level,
)

#: SDE integration keeps rf grids at or below this level; the drift -r/(1-s)
#: stiffens as s -> 1 (explicit stability needs step <= 1-s), so the
#: integrator clamps harder than the algebraic bound RF_S_MAX.
RF_SDE_S_MAX = 1.0 - 1e-3


def vp_time_from_alpha(alpha: float) -> float:
    return -math.log(alpha)


def vp_alpha_from_time(t: float) -> float:
    return math.exp(-t)


@dataclass(frozen=True)
class ForwardSpec:
    """Drift, diffusion, and marginal coefficients of one forward process.

    ``drift(state, level)`` and ``diffusion(level)`` are the SDE coefficients
    in the process's own clock; ``marginal_coeffs(level)`` returns (a, b)
    with state = a * x0 + b * eps.
    """

    param: Parameterization
    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[float], float]
    marginal_coeffs: Callable[[float], tuple[float, float]]


def _vp_marginal(alpha):
    return math.sqrt(alpha), math.sqrt(1.0 - alpha)


def _ve_marginal(sigma):
    return 1.0, sigma


def _rf_marginal(s):
    return 1.0 - s, s


_SPECS = {
    Parameterization.VP: ForwardSpec(
        param=Parameterization.VP,
        drift=lambda x, alpha: -0.5 * x,
        diffusion=lambda alpha: 1.0,
        marginal_coeffs=_vp_marginal,
    ),
    Parameterization.VE_KARRAS: ForwardSpec(
        param=Parameterization.VE_KARRAS,
        drift=lambda z, sigma: np.zeros_like(z),
        diffusion=lambda sigma: math.sqrt(2.0 * sigma),
        marginal_coeffs=_ve_marginal,
    ),
    Parameterization.RECTIFIED_FLOW: ForwardSpec(
        param=Parameterization.RECTIFIED_FLOW,
        drift=lambda r, s: -r / (1.0 - s),
        diffusion=lambda s: math.sqrt(2.0 * s / (1.0 - s)),
        marginal_coeffs=_rf_marginal,
    ),
}


def forward_spec(param: Parameterization) -> ForwardSpec:
    return _SPECS[param]


def marginal_coeffs_array(param: Parameterization, levels) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (a, b) marginal coefficients over an array of levels."""
    levels = np.asarray(levels, dtype=np.float64)
    if param is Parameterization.VP:
        return np.sqrt(levels), np.sqrt(1.0 - levels)
    if param is Parameterization.VE_KARRAS:
        return np.ones_like(levels), levels
    return 1.0 - levels, levels


def sample_closed_form(
    spec: ForwardSpec, x0: np.ndarray, level: float, rng: RngStream
) -> ParamPoint:
    """One exact draw from the marginal at ``level``: N(a*x0, b^2 I)."""
    validate_level(spec.param, level)
    x0 = np.asarray(x0, dtype=np.float64)
    a, b = spec.marginal_coeffs(level)
    state = a * x0 + b * rng.normal(x0.shape)
    return ParamPoint(param=spec.param, state=state, level=level)


def sample_closed_form_ensemble(
    spec: ForwardSpec, x0: np.ndarray, level: float, rng: RngStream, n_chains: int
) -> np.ndarray:
    """Exact marginal draws for ``n_chains`` chains sharing one x0; (n, d)."""
    validate_level(spec.param, level)
    x0 = np.asarray(x0, dtype=np.float64)
    a, b = spec.marginal_coeffs(level)
    return a * x0[None, :] + b * rng.normal((n_chains, x0.size))


def _clock(param: Parameterization, level: float) -> float:
    """The SDE clock at a level: t for vp, the level itself otherwise."""
    if param is Parameterization.VP:
        return vp_time_from_alpha(level)
    return level


def _check_grid(param: Parameterization, grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("level grid must be a non-empty 1-D sequence")
    if grid[0] != zero_noise_level(param):
        raise ValueError(
            f"level grid must start at the zero-noise level "
            f"({zero_noise_level(param)}), got {grid[0]!r}"
        )
    diffs = np.diff(grid)
    if param is Parameterization.VP:
        if np.any(diffs >= 0):
            raise ValueError("vp level grid must be strictly decreasing in alpha")
    else:
        if np.any(diffs <= 0):
            raise ValueError(f"{param.label} level grid must be strictly increasing")
    for lvl in (grid[0], grid[-1]):
        validate_level(param, float(lvl))
    if param is Parameterization.RECTIFIED_FLOW and grid[-1] > RF_SDE_S_MAX:
        raise DomainError(
            f"rf SDE grids must stay at or below {RF_SDE_S_MAX}; got {grid[-1]!r}"
        )
    return grid


def _em_steps(
    param: Parameterization, states: np.ndarray, grid: np.ndarray, rng: RngStream,
    record: set[int] | None = None,
) -> dict[int, np.ndarray]:
    """Euler-Maruyama through the grid; returns {grid index: states copy}.

    ``states`` is (n, d) and is advanced in place.
    """
    spec = _SPECS[param]
    out: dict[int, np.ndarray] = {}
    if record is None or 0 in record:
        out[0] = states.copy()
    for k in range(grid.size - 1):
        lvl, nxt = float(grid[k]), float(grid[k + 1])
        dt = _clock(param, nxt) - _clock(param, lvl)
        xi = rng.normal(states.shape)
        states += spec.drift(states, lvl) * dt + spec.diffusion(lvl) * math.sqrt(dt) * xi
        if record is None or (k + 1) in record:
            out[k + 1] = states.copy()
    return out


def integrate_forward_sde(
    spec: ForwardSpec, x0: np.ndarray, level_grid: Sequence[float], rng: RngStream
) -> list[ParamPoint]:
    """One Euler-Maruyama trajectory through a noise-ascending level grid.

    The grid starts at the zero-noise level and moves strictly toward more
    noise (decreasing alpha for vp, increasing sigma or s otherwise).  The
    terminal ensemble over many chains matches the closed-form marginal to
    Monte Carlo plus O(step) discretization error.
    """
    grid = _check_grid(spec.param, level_grid)
    x0 = np.asarray(x0, dtype=np.float64)
    states = x0[None, :].copy()
    recorded = _em_steps(spec.param, states, grid, rng)
    return [
        ParamPoint(param=spec.param, state=recorded[k][0], level=float(grid[k]))
        for k in range(grid.size)
    ]


def integrate_forward_ensemble(
    spec: ForwardSpec,
    x0: np.ndarray,
    level_grid: Sequence[float],
    rng: RngStream,
    n_chains: int,
    workers: int = 1,
    record_indices: Sequence[int] | None = None,
) -> dict[int, np.ndarray]:
    """Euler-Maruyama over an ensemble of chains from a shared x0.

    Chains are split into fixed blocks, one RNG substream per block, so the
    result is identical for any ``workers`` count.  Returns arrays of shape
    (n_chains, d) keyed by recorded grid index (default: terminal only).
    """
    grid = _check_grid(spec.param, level_grid)
    x0 = np.asarray(x0, dtype=np.float64)
    record = {grid.size - 1} if record_indices is None else set(record_indices)

    def block(block_id: int, start: int, count: int) -> dict[int, np.ndarray]:
        block_rng = rng.spawn(rng.stream_id + 1 + block_id)
        states = np.repeat(x0[None, :], count, axis=0)
        return _em_steps(spec.param, states, grid, block_rng, record=record)

    parts = run_chain_blocks(n_chains, block, workers=workers)
    return {
        k: np.concatenate([part[k] for part in parts], axis=0) for k in sorted(record)
    }


def uniform_level_grid(param: Parameterization, max_level: float, steps: int) -> np.ndarray:
    """Default grid: ``steps`` uniform intervals in the native level variable."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    validate_level(param, max_level)
    if param is Parameterization.RECTIFIED_FLOW and max_level > RF_SDE_S_MAX:
        raise DomainError(f"rf SDE grids must stay at or below {RF_SDE_S_MAX}")
    return np.linspace(zero_noise_level(param), max_level, steps + 1)
