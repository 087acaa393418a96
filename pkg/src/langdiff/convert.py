"""Exact algebraic conversions between parameterizations and prediction kinds.

All maps route through one canonical frame: the unscaled state ``z`` with
noise scale ``sigma`` (the variance-exploding coordinates, where the noised
state is ``z0 + sigma * eps``).  The other two parameterizations are level
dependent rescalings of that frame::

    vp:  x = sqrt(alpha) * z,   alpha = 1 / (1 + sigma^2)
    rf:  r = (1 - s) * z,       s     = sigma / (1 + sigma)

Prediction kinds are affine in the canonical-frame score ``s_z``::

    score    s_x = sqrt(1 + sigma^2) * s_z
    noise    eps = -sigma * s_z
    velocity v   = -sigma * (1 + sigma) * s_z - z

so every directed conversion is one encode plus one decode.  Formulas that
mix variables from two parameterizations are resolved by always converting
the evaluation point first; the returned prediction sits at the point
expressed in the target kind's home parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    RF_S_MAX,
    VE_SIGMA_MIN_SCORE,
    DomainError,
    ParamPoint,
    Parameterization,
    Prediction,
    PredictionKind,
    validate_level,
)

#: Home parameterization of each prediction kind.
KIND_HOME_PARAM = {
    PredictionKind.SCORE: Parameterization.VP,
    PredictionKind.NOISE: Parameterization.VE_KARRAS,
    PredictionKind.VELOCITY: Parameterization.RECTIFIED_FLOW,
}


def sigma_from_level(param: Parameterization, level) -> float | np.ndarray:
    """Noise scale sigma of the canonical frame at a native level."""
    if param is Parameterization.VP:
        return np.sqrt((1.0 - level) / level)
    if param is Parameterization.VE_KARRAS:
        return level
    return level / (1.0 - level)


def level_from_sigma(param: Parameterization, sigma) -> float | np.ndarray:
    """Native level of ``param`` at canonical noise scale sigma."""
    if param is Parameterization.VP:
        return 1.0 / (1.0 + sigma * sigma)
    if param is Parameterization.VE_KARRAS:
        return sigma
    return sigma / (1.0 + sigma)


def frame_scale(param: Parameterization, level) -> float | np.ndarray:
    """Scale c with state = c * z at the given native level."""
    if param is Parameterization.VP:
        return np.sqrt(level)
    if param is Parameterization.VE_KARRAS:
        return np.ones_like(np.asarray(level, dtype=np.float64)) if np.ndim(level) else 1.0
    return 1.0 - level


def convert_level(level: float, src: Parameterization, dst: Parameterization) -> float:
    """Map a noise level between parameterizations; raises on clamp violation."""
    if src is dst:
        validate_level(src, level)
        return float(level)
    validate_level(src, level)
    sigma = sigma_from_level(src, level)
    out = float(level_from_sigma(dst, sigma))
    if dst is Parameterization.RECTIFIED_FLOW and out > RF_S_MAX:
        raise DomainError(
            f"rf level s = sigma/(1+sigma) = {out!r} exceeds the clamp {RF_S_MAX} "
            f"(downstream formulas divide by 1-s)"
        )
    validate_level(dst, out)
    return out


def convert_states(
    states: np.ndarray, level: float, src: Parameterization, dst: Parameterization
) -> tuple[np.ndarray, float]:
    """Vectorized state/level conversion for ``(n, d)`` or ``(d,)`` arrays."""
    states = np.asarray(states, dtype=np.float64)
    if src is dst:
        validate_level(src, level)
        return states.copy(), float(level)
    out_level = convert_level(level, src, dst)
    ratio = frame_scale(dst, out_level) / frame_scale(src, level)
    return states * ratio, out_level


def convert_point(p: ParamPoint, target: Parameterization) -> ParamPoint:
    """The equivalent point of ``p`` in the target parameterization.

    Total on the clamped domains; round trips return the original point to
    within a few ulps.
    """
    if p.param is target:
        return p
    state, level = convert_states(p.state, p.level, p.param, target)
    return ParamPoint(param=target, state=state, level=level)


def _kind_coeffs(kind: PredictionKind, sigma):
    """Coefficients (a, b) with kind value = a * s_z + b * z."""
    if kind is PredictionKind.SCORE:
        return np.sqrt(1.0 + sigma * sigma), 0.0
    if kind is PredictionKind.NOISE:
        return -sigma, 0.0
    return -sigma * (1.0 + sigma), -1.0


def convert_values(
    values: np.ndarray,
    from_kind: PredictionKind,
    to_kind: PredictionKind,
    states: np.ndarray,
    level,
    param: Parameterization,
) -> np.ndarray:
    """Convert prediction values between kinds, vectorized over rows.

    ``states`` and ``level`` locate the evaluation point in ``param``
    coordinates; ``level`` may be an array matching the leading axis of
    ``states``.  Inverting a noise or velocity value divides by sigma, hence
    the sigma floor.
    """
    values = np.asarray(values, dtype=np.float64)
    if from_kind is to_kind:
        return values.copy()
    sigma = sigma_from_level(param, np.asarray(level, dtype=np.float64))
    if from_kind in (PredictionKind.NOISE, PredictionKind.VELOCITY):
        if np.any(sigma < VE_SIGMA_MIN_SCORE):
            raise DomainError(
                f"converting from {from_kind.label} divides by sigma; "
                f"requires sigma >= {VE_SIGMA_MIN_SCORE}"
            )
    a_src, b_src = _kind_coeffs(from_kind, sigma)
    a_dst, b_dst = _kind_coeffs(to_kind, sigma)
    states = np.asarray(states, dtype=np.float64)
    scale = a_dst / a_src
    offset = b_dst - a_dst * b_src / a_src
    if values.ndim == 2 and np.ndim(scale) == 1:
        scale = scale[:, None]
        if np.ndim(offset) == 1:
            offset = np.asarray(offset)[:, None]
    if np.all(np.asarray(offset) == 0.0):
        return scale * values
    c = frame_scale(param, level)
    if values.ndim == 2 and np.ndim(c) == 1:
        c = np.reshape(c, (-1, 1))
    return scale * values + offset * (states / c)


def kind_scale(
    from_kind: PredictionKind, to_kind: PredictionKind, level, param: Parameterization
):
    """d(target value)/d(source value) of a kind conversion at a level.

    The conversion is affine in the value; this is its linear coefficient,
    which is all a gradient needs.
    """
    if from_kind is to_kind:
        return np.ones_like(np.asarray(level, dtype=np.float64)) if np.ndim(level) else 1.0
    sigma = sigma_from_level(param, np.asarray(level, dtype=np.float64))
    a_src, _ = _kind_coeffs(from_kind, sigma)
    a_dst, _ = _kind_coeffs(to_kind, sigma)
    return a_dst / a_src


def values_to_frame_score(
    values: np.ndarray,
    kind: PredictionKind,
    states: np.ndarray,
    level,
    param: Parameterization,
) -> np.ndarray:
    """Recover the score in ``param`` coordinates from kind values."""
    values = np.asarray(values, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    sigma = sigma_from_level(param, np.asarray(level, dtype=np.float64))
    if kind in (PredictionKind.NOISE, PredictionKind.VELOCITY) and np.any(
        sigma < VE_SIGMA_MIN_SCORE
    ):
        raise DomainError(
            f"recovering a score from {kind.label} divides by sigma; "
            f"requires sigma >= {VE_SIGMA_MIN_SCORE}"
        )
    a, b = _kind_coeffs(kind, sigma)
    c = frame_scale(param, level)
    if values.ndim == 2 and np.ndim(a) == 1:
        a = a[:, None]
        b = np.asarray(b)[:, None] if np.ndim(b) else b
        c = np.reshape(c, (-1, 1))
    if np.all(np.asarray(b) == 0.0):
        return values / (a * c)
    return (values - b * (states / c)) / (a * c)


def frame_score_to_values(
    frame_score: np.ndarray,
    kind: PredictionKind,
    states: np.ndarray,
    level,
    param: Parameterization,
) -> np.ndarray:
    """Express a score in ``param`` coordinates as kind values."""
    frame_score = np.asarray(frame_score, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    sigma = sigma_from_level(param, np.asarray(level, dtype=np.float64))
    a, b = _kind_coeffs(kind, sigma)
    c = frame_scale(param, level)
    if frame_score.ndim == 2 and np.ndim(a) == 1:
        a = a[:, None]
        b = np.asarray(b)[:, None] if np.ndim(b) else b
        c = np.reshape(c, (-1, 1))
    value = a * c * frame_score
    if np.any(np.asarray(b) != 0.0):
        value = value + b * (states / c)
    return value


def convert_prediction(pred: Prediction, target_kind: PredictionKind) -> Prediction:
    """The equivalent prediction of another kind.

    The result is attached to the same underlying point, expressed in the
    target kind's home parameterization.
    """
    at = convert_point(pred.at, KIND_HOME_PARAM[target_kind])
    if pred.kind is target_kind:
        return Prediction(kind=target_kind, value=pred.value, at=at)
    value = convert_values(
        pred.value, pred.kind, target_kind, pred.at.state, pred.at.level, pred.at.param
    )
    return Prediction(kind=target_kind, value=value, at=at)


@dataclass(frozen=True)
class ConversionReport:
    """Round-trip record for one point: there and back, with the error."""

    source: ParamPoint
    target: ParamPoint
    max_abs_roundtrip_error: float


def roundtrip(p: ParamPoint, via: Parameterization) -> ConversionReport:
    """Convert ``p`` to ``via`` and back; report the worst absolute error."""
    there = convert_point(p, via)
    back = convert_point(there, p.param)
    err = max(
        float(np.max(np.abs(back.state - p.state))),
        abs(back.level - p.level),
    )
    return ConversionReport(source=p, target=there, max_abs_roundtrip_error=err)
