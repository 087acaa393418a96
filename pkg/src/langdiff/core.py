"""Shared domain types: parameterizations, states, predictions, RNG streams.

Conventions used throughout the package:

* Noise levels are stored in each parameterization's native variable
  (``alpha`` for variance-preserving, ``sigma`` for variance-exploding,
  ``s`` for rectified flow), never in a shared clock.  Clock conversions
  live in :mod:`langdiff.forward`.
* States are dense 1-D float64 arrays of small dimension.  Ensemble code
  works on plain ``(n, d)`` arrays; the typed wrappers below are the
  single-point API.
* All types here are immutable values.  The only stateful object is
  :class:`RngStream`, which is owned by exactly one chain (or chain block)
  at a time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

#: Rectified-flow levels above this bound hit the 1/(1-s) singularities.
RF_S_MAX = 1.0 - 1e-6

#: Conversions that invert a noise prediction divide by sigma; below this
#: bound they are refused as singular.
VE_SIGMA_MIN_SCORE = 1e-9

#: Chains per RNG substream in ensemble runs.  Fixed so that the
#: block -> stream assignment, and therefore every result, is independent
#: of how many workers execute the blocks.
CHAIN_BLOCK = 8192


class DomainError(ValueError):
    """A level or point lies outside the domain where a formula is defined."""


class Parameterization(Enum):
    """The three ways of indexing the same family of noised states."""

    VP = "vp"
    VE_KARRAS = "ve"
    RECTIFIED_FLOW = "rf"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "Parameterization":
        for p in cls:
            if p.value == label:
                return p
        raise ValueError(f"unknown parameterization {label!r}; expected one of vp, ve, rf")


class PredictionKind(Enum):
    """What a model output encodes.

    SCORE is the gradient of log density in VP coordinates, NOISE the
    added-noise estimate in VE coordinates, VELOCITY the transport field in
    rectified-flow coordinates.  The three are exact reparameterizations of
    each other (see :mod:`langdiff.convert`).
    """

    SCORE = "score"
    NOISE = "noise"
    VELOCITY = "velocity"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "PredictionKind":
        for k in cls:
            if k.value == label:
                return k
        raise ValueError(f"unknown prediction kind {label!r}")


class ModelType(Enum):
    """Rows of the sampler family: which dynamics drive generation."""

    VP_SDE = "vp-sde"
    VP_ODE = "vp-ode"
    VE_KARRAS = "ve"
    RECTIFIED_FLOW = "rf"

    @property
    def label(self) -> str:
        return self.value

    @property
    def param(self) -> Parameterization:
        if self in (ModelType.VP_SDE, ModelType.VP_ODE):
            return Parameterization.VP
        if self is ModelType.VE_KARRAS:
            return Parameterization.VE_KARRAS
        return Parameterization.RECTIFIED_FLOW

    @property
    def native_kind(self) -> PredictionKind:
        if self in (ModelType.VP_SDE, ModelType.VP_ODE):
            return PredictionKind.SCORE
        if self is ModelType.VE_KARRAS:
            return PredictionKind.NOISE
        return PredictionKind.VELOCITY

    @classmethod
    def from_label(cls, label: str) -> "ModelType":
        for m in cls:
            if m.value == label:
                return m
        raise ValueError(f"unknown model type {label!r}; expected vp-sde, vp-ode, ve, rf")


def zero_noise_level(param: Parameterization) -> float:
    """The level at which the process is the identity embedding of the data."""
    return 1.0 if param is Parameterization.VP else 0.0


def validate_level(param: Parameterization, level: float) -> None:
    """Raise :class:`DomainError` if ``level`` is outside the valid domain.

    VP: alpha in (0, 1].  VE: sigma >= 0.  RF: s in [0, RF_S_MAX].
    """
    if not math.isfinite(level):
        raise DomainError(f"{param.label} level must be finite, got {level!r}")
    if param is Parameterization.VP:
        if not 0.0 < level <= 1.0:
            raise DomainError(f"vp level alpha must lie in (0, 1], got {level!r}")
    elif param is Parameterization.VE_KARRAS:
        if level < 0.0:
            raise DomainError(f"ve level sigma must be >= 0, got {level!r}")
    else:
        if not 0.0 <= level <= RF_S_MAX:
            raise DomainError(
                f"rf level s must lie in [0, {RF_S_MAX}] (formulas divide by 1-s), got {level!r}"
            )


def _frozen_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"expected a 1-D vector with d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ParamPoint:
    """A state vector at a noise level, in one parameterization's coordinates."""

    param: Parameterization
    state: np.ndarray
    level: float

    def __post_init__(self):
        object.__setattr__(self, "state", _frozen_vector(self.state))
        object.__setattr__(self, "level", float(self.level))
        validate_level(self.param, self.level)

    @property
    def dim(self) -> int:
        return self.state.size

    def __repr__(self) -> str:
        return (
            f"ParamPoint({self.param.label}, level={self.level!r}, "
            f"state={self.state.tolist()!r})"
        )


@dataclass(frozen=True, eq=False)
class Prediction:
    """A model output of a given kind, attached to the point it was made at."""

    kind: PredictionKind
    value: np.ndarray
    at: ParamPoint

    def __post_init__(self):
        object.__setattr__(self, "value", _frozen_vector(self.value))
        if self.value.size != self.at.dim:
            raise ValueError(
                f"prediction dimension {self.value.size} != point dimension {self.at.dim}"
            )

    def __repr__(self) -> str:
        return f"Prediction({self.kind.label}, value={self.value.tolist()!r}, at={self.at!r})"


@dataclass(frozen=True, eq=False)
class BrownianIncrement:
    """One Brownian increment over a step dt: each component is N(0, dt)."""

    dt: float
    noise: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "noise", _frozen_vector(self.noise))
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")


@dataclass(frozen=True)
class PredictionField:
    """A vectorized prediction of a fixed kind over (states, level).

    ``fn`` takes states shaped ``(n, d)`` (or ``(d,)``) in the coordinates of
    whatever process consumes the field, and the forward noise level, and
    returns values of the same shape.  Kind values (score, noise, velocity)
    identify the same underlying quantity regardless of which coordinates the
    point is expressed in.
    """

    kind: PredictionKind
    fn: Callable[[np.ndarray, float], np.ndarray]

    def __call__(self, states: np.ndarray, level: float) -> np.ndarray:
        return self.fn(states, level)


class RngStream:
    """Counter-based random stream addressed by (seed, stream_id).

    The same (seed, stream_id) pair replays an identical draw sequence;
    distinct stream ids are statistically independent (Philox keying).  Use
    :meth:`spawn` to derive per-chain or per-block streams from a base seed.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) % 2**64
        self.stream_id = int(stream_id) % 2**64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RngStream":
        """A fresh, independent stream under the same seed."""
        return RngStream(self.seed, stream_id)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, shape=None) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def draw_increment(rng: RngStream, dt: float, d: int) -> BrownianIncrement:
    """Draw a d-vector of i.i.d. N(0, dt) components, advancing the stream."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d!r}")
    noise = math.sqrt(dt) * rng.normal(d)
    return BrownianIncrement(dt=dt, noise=noise)


def chain_blocks(n_chains: int, block: int = CHAIN_BLOCK) -> list[tuple[int, int, int]]:
    """Fixed partition of chains into blocks: (block_id, start, count)."""
    if n_chains < 1:
        raise ValueError(f"n_chains must be >= 1, got {n_chains}")
    return [
        (i, start, min(block, n_chains - start))
        for i, start in enumerate(range(0, n_chains, block))
    ]


def run_chain_blocks(
    n_chains: int,
    worker: Callable[[int, int, int], object],
    workers: int = 1,
    block: int = CHAIN_BLOCK,
) -> list:
    """Run ``worker(block_id, start, count)`` over the fixed chain blocks.

    Results come back in block order, so output is byte-identical for any
    worker count as long as each block derives its randomness from its
    block_id alone.
    """
    spans = chain_blocks(n_chains, block)
    if workers <= 1 or len(spans) == 1:
        return [worker(*span) for span in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, *span) for span in spans]
        return [f.result() for f in futures]
