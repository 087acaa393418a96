"""Serialization helpers shared by the CLI and the verification suites.

CSV cells use 17-significant-digit decimal formatting, which round-trips
float64 exactly, so identical runs produce identical bytes and downstream
diffs are meaningful.  JSON goes through the standard library with sorted
keys (repr-based floats, also round-trip exact).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ParamPoint, Parameterization, Prediction, PredictionKind


def format_float(x: float) -> str:
    """Full round-trip decimal text for a float64."""
    return format(float(x), ".17g")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                format_float(v) if isinstance(v, (float, np.floating)) else str(v)
                for v in row
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def dump_json(obj, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def point_to_json(p: ParamPoint) -> dict:
    return {
        "param": p.param.label,
        "level": p.level,
        "state": [float(v) for v in p.state],
    }


def point_from_json(obj: dict) -> ParamPoint:
    missing = {"param", "level", "state"} - set(obj)
    if missing:
        raise ValueError(f"point object missing keys: {sorted(missing)}")
    return ParamPoint(
        param=Parameterization.from_label(obj["param"]),
        state=np.asarray(obj["state"], dtype=np.float64),
        level=float(obj["level"]),
    )


def prediction_to_json(pred: Prediction) -> dict:
    return {
        "kind": pred.kind.label,
        "value": [float(v) for v in pred.value],
        "at": point_to_json(pred.at),
    }


def prediction_from_json(obj: dict) -> Prediction:
    missing = {"kind", "value", "at"} - set(obj)
    if missing:
        raise ValueError(f"prediction object missing keys: {sorted(missing)}")
    return Prediction(
        kind=PredictionKind.from_label(obj["kind"]),
        value=np.asarray(obj["value"], dtype=np.float64),
        at=point_from_json(obj["at"]),
    )
