"""Denoising training of small prediction networks, all by hand.

No autodiff: the MLP forward and backward passes, SGD with momentum, and a
fixed-step Adam are written out explicitly so gradients can be checked
against finite differences.  Each process family regresses its network on
the closed-form conditional target of the Gaussian transition kernel::

    family  network output   denoising target        weight
    vp      score            -eps / sqrt(1 - alpha)  1/2
    ve      noise            eps                     1/sigma
    rf      velocity         eps - x0                (1 - s)/s

The weight only rebalances levels; the per-level minimizer is the marginal
score (in the family's output coordinates) under any positive weight.  At a
fixed level the denoising loss and the marginal ("oracle") loss differ by a
model-independent constant, which `dsm_loss` / `sm_loss_oracle` expose.

The scalar level enters the network as the raw level plus sin/cos features
at 4 fixed frequencies of the level normalized to the training range; the
range is stored with the model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .convert import (
    convert_states,
    convert_values,
    frame_score_to_values,
    kind_scale,
    values_to_frame_score,
)
from .core import (
    RF_S_MAX,
    DomainError,
    Parameterization,
    PredictionField,
    PredictionKind,
    RngStream,
)
from .forward import marginal_coeffs_array
from .oracle import GaussianMixture, PerturbedMixture, perturb
from .reverse import RF_START_OFFSET, VE_SIGMA_MULTIPLE, VP_TERMINAL_ALPHA

N_LEVEL_FREQUENCIES = 4

#: Native network output of each training family.
NATIVE_OUTPUT = {
    Parameterization.VP: PredictionKind.SCORE,
    Parameterization.VE_KARRAS: PredictionKind.NOISE,
    Parameterization.RECTIFIED_FLOW: PredictionKind.VELOCITY,
}


class TrainingError(RuntimeError):
    """A non-finite value or divergence aborted training."""


def _tanh_grad(z):
    t = np.tanh(z)
    return 1.0 - t * t


ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "tanh": (np.tanh, _tanh_grad),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("layer shapes do not chain")


class MLPModel:
    """A small feed-forward network over (state, level features).

    ``prediction_kind`` tags what the output encodes; ``param`` fixes which
    coordinates the input states live in.  ``level_range`` is the training
    domain of the level variable, used to normalize the sin/cos features.
    """

    def __init__(
        self,
        layers: list[Layer],
        prediction_kind: PredictionKind,
        param: Parameterization,
        level_range: tuple[float, float],
        dim: int,
    ):
        if not layers:
            raise ValueError("need at least one layer")
        expected_in = dim + 1 + 2 * N_LEVEL_FREQUENCIES
        if layers[0].weight.shape[1] != expected_in:
            raise ValueError(
                f"first layer expects {layers[0].weight.shape[1]} inputs, "
                f"model dim {dim} implies {expected_in}"
            )
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise ValueError("layer shapes do not chain")
        if layers[-1].weight.shape[0] != dim:
            raise ValueError("output dimension must equal the state dimension")
        lo, hi = level_range
        if not lo < hi:
            raise ValueError("level_range must satisfy lo < hi")
        for layer in layers:
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise ValueError("parameters must be finite")
        self.layers = layers
        self.prediction_kind = prediction_kind
        self.param = param
        self.level_range = (float(lo), float(hi))
        self.dim = dim

    @classmethod
    def create(
        cls,
        dim: int,
        hidden: Sequence[int],
        prediction_kind: PredictionKind,
        param: Parameterization,
        level_range: tuple[float, float],
        rng: RngStream,
    ) -> "MLPModel":
        """Glorot-initialized tanh MLP with a linear output layer."""
        sizes = [dim + 1 + 2 * N_LEVEL_FREQUENCIES, *hidden, dim]
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            scale = math.sqrt(2.0 / (n_in + n_out))
            weight = scale * rng.normal((n_out, n_in))
            activation = "identity" if i == len(sizes) - 2 else "tanh"
            layers.append(Layer(weight=weight, bias=np.zeros(n_out), activation=activation))
        return cls(layers, prediction_kind, param, level_range, dim)

    def level_features(self, levels: np.ndarray) -> np.ndarray:
        levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
        lo, hi = self.level_range
        unit = (levels - lo) / (hi - lo)
        cols = [levels]
        for k in range(1, N_LEVEL_FREQUENCIES + 1):
            cols.append(np.sin(2.0 * math.pi * k * unit))
            cols.append(np.cos(2.0 * math.pi * k * unit))
        return np.stack(cols, axis=1)

    def _inputs(self, states: np.ndarray, levels) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        levels = np.broadcast_to(
            np.asarray(levels, dtype=np.float64), (states.shape[0],)
        )
        return np.concatenate([states, self.level_features(levels)], axis=1)

    def forward(self, states: np.ndarray, levels) -> np.ndarray:
        """Network output for (n, d) states at scalar or (n,) levels."""
        a = self._inputs(states, levels)
        for layer in self.layers:
            act, _ = ACTIVATIONS[layer.activation]
            a = act(a @ layer.weight.T + layer.bias)
        return a

    def forward_cached(self, states: np.ndarray, levels):
        """Forward pass keeping pre-activations for backprop."""
        a = self._inputs(states, levels)
        cache = []
        for layer in self.layers:
            z = a @ layer.weight.T + layer.bias
            act, _ = ACTIVATIONS[layer.activation]
            cache.append((a, z))
            a = act(z)
        return a, cache

    def backward(self, cache, grad_out: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Parameter gradients given d(loss)/d(output); same order as layers."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        g = grad_out
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            a_in, z = cache[idx]
            _, dact = ACTIVATIONS[layer.activation]
            dz = g * dact(z)
            grads[idx] = (dz.T @ a_in, dz.sum(axis=0))
            g = dz @ layer.weight
        return grads

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers]
        )

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        for layer in self.layers:
            n_w = layer.weight.size
            layer.weight = flat[pos : pos + n_w].reshape(layer.weight.shape).copy()
            pos += n_w
            n_b = layer.bias.size
            layer.bias = flat[pos : pos + n_b].copy()
            pos += n_b
        if pos != flat.size:
            raise ValueError(f"parameter vector has {flat.size} entries, expected {pos}")

    def copy(self) -> "MLPModel":
        layers = [
            Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers
        ]
        return MLPModel(layers, self.prediction_kind, self.param, self.level_range, self.dim)

    def to_config(self) -> dict:
        return {
            "format": "langdiff-checkpoint",
            "version": 1,
            "prediction_kind": self.prediction_kind.label,
            "param": self.param.label,
            "dim": self.dim,
            "level_range": list(self.level_range),
            "layers": [
                {
                    "activation": l.activation,
                    "weight": l.weight.tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_config(cls, config: dict) -> "MLPModel":
        layers = [
            Layer(
                weight=np.array(l["weight"], dtype=np.float64),
                bias=np.array(l["bias"], dtype=np.float64),
                activation=l["activation"],
            )
            for l in config["layers"]
        ]
        return cls(
            layers,
            PredictionKind.from_label(config["prediction_kind"]),
            Parameterization.from_label(config["param"]),
            tuple(config["level_range"]),
            int(config["dim"]),
        )


@dataclass(frozen=True)
class LossSpec:
    """Which family's loss to use and how to weight levels.

    weight_mode "paper" applies the family coefficient (1/2, 1/sigma,
    (1-s)/s); "uniform" sets it to 1; a callable is applied to the levels.
    """

    model_type: Parameterization
    weight_mode: str | Callable = "paper"

    def weights(self, levels) -> np.ndarray:
        levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
        if callable(self.weight_mode):
            return np.broadcast_to(self.weight_mode(levels), levels.shape).astype(float)
        if self.weight_mode == "uniform":
            return np.ones_like(levels)
        if self.weight_mode != "paper":
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")
        if self.model_type is Parameterization.VP:
            return np.full_like(levels, 0.5)
        if self.model_type is Parameterization.VE_KARRAS:
            return 1.0 / levels
        return (1.0 - levels) / levels


def _check_training_levels(model_type: Parameterization, levels) -> np.ndarray:
    levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
    if model_type is Parameterization.VP:
        bad = (levels <= 0.0) | (levels >= 1.0)
        reason = "vp targets divide by sqrt(1 - alpha); need alpha in (0, 1)"
    elif model_type is Parameterization.VE_KARRAS:
        bad = levels <= 0.0
        reason = "ve targets divide by sigma; need sigma > 0"
    else:
        bad = (levels <= 0.0) | (levels > RF_S_MAX)
        reason = f"rf targets divide by s; need s in (0, {RF_S_MAX}]"
    if np.any(bad):
        raise DomainError(f"level {levels[bad][0]!r} outside the loss domain: {reason}")
    return levels


def conditional_score_target(model_type: Parameterization, x0, eps, level) -> np.ndarray:
    """Exact conditional score of the transition kernel at the noised state.

    vp: -eps/sqrt(1-alpha); ve: -eps/sigma; rf: -eps/s.  Levels must lie
    strictly inside the clamped domain (the targets diverge at zero noise).
    """
    eps = np.asarray(eps, dtype=np.float64)
    levels = _check_training_levels(model_type, level)
    if model_type is Parameterization.VP:
        denom = np.sqrt(1.0 - levels)
    else:
        denom = levels
    if eps.ndim == 2:
        denom = denom[:, None] if denom.size > 1 else denom
    return -eps / denom


def native_target(model_type: Parameterization, x0, eps, levels) -> np.ndarray:
    """The regression target in the family's own output coordinates."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if model_type is Parameterization.VP:
        return conditional_score_target(model_type, x0, eps, levels)
    _check_training_levels(model_type, levels)
    if model_type is Parameterization.VE_KARRAS:
        return eps.copy()
    return eps - x0


@dataclass(frozen=True)
class TrainBatch:
    """Clean samples, their noise draws, and the levels they are noised to."""

    x0: np.ndarray  # (n, d)
    eps: np.ndarray  # (n, d)
    levels: np.ndarray  # (n,)

    def __post_init__(self):
        if self.x0.shape != self.eps.shape or self.levels.shape != (self.x0.shape[0],):
            raise ValueError("batch shapes do not agree")
        if self.x0.shape[0] == 0:
            raise ValueError("batch must be non-empty")


def make_batch(
    data: GaussianMixture,
    model_type: Parameterization,
    level_range: tuple[float, float],
    batch_size: int,
    rng: RngStream,
) -> TrainBatch:
    lo, hi = level_range
    levels = rng.uniform(lo, hi, batch_size)
    x0 = data.sample(batch_size, rng)
    eps = rng.normal((batch_size, data.dim))
    return TrainBatch(x0=x0, eps=eps, levels=levels)


def noised_states(model_type: Parameterization, batch: TrainBatch) -> np.ndarray:
    a, b = marginal_coeffs_array(model_type, batch.levels)
    return a[:, None] * batch.x0 + b[:, None] * batch.eps


def dsm_loss(
    model: MLPModel, batch: TrainBatch, spec: LossSpec
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Weighted denoising loss and its parameter gradients.

    The model's output kind is converted to the family's native kind inside
    the loss when they differ (an affine, differentiable map).
    """
    states = noised_states(spec.model_type, batch)
    target = native_target(spec.model_type, batch.x0, batch.eps, batch.levels)
    out, cache = model.forward_cached(states, batch.levels)
    if not np.all(np.isfinite(out)):
        raise TrainingError(
            f"non-finite network output (params max abs "
            f"{np.max(np.abs(model.flat_parameters())):.3e})"
        )
    native_kind = NATIVE_OUTPUT[spec.model_type]
    if model.prediction_kind is native_kind:
        out_native = out
        scale = 1.0
    else:
        scale = kind_scale(
            model.prediction_kind, native_kind, batch.levels, spec.model_type
        )
        out_native = convert_values(
            out, model.prediction_kind, native_kind, states, batch.levels, spec.model_type
        )
    weights = spec.weights(batch.levels)
    residual = out_native - target
    n = states.shape[0]
    loss = float(np.sum(weights * np.sum(residual * residual, axis=1)) / n)
    grad_native = (2.0 / n) * weights[:, None] * residual
    grad_out = grad_native * (scale[:, None] if np.ndim(scale) else scale)
    grads = model.backward(cache, grad_out)
    return loss, grads


def sm_loss_oracle(
    model: MLPModel,
    pm: PerturbedMixture,
    n_samples: int,
    spec: LossSpec,
    rng: RngStream,
) -> float:
    """Monte Carlo marginal-score loss against the analytic oracle.

    Estimates the weighted expected squared error between the model and the
    exact marginal score of ``pm``, expressed in the family's native output
    coordinates.  At a fixed level this differs from `dsm_loss` only by a
    model-independent constant.
    """
    if pm.param is not spec.model_type:
        raise ValueError("perturbed mixture and loss family disagree on coordinates")
    x = pm.sample(n_samples, rng)
    frame_score = pm.score(x)
    native_kind = NATIVE_OUTPUT[spec.model_type]
    target = frame_score_to_values(frame_score, native_kind, x, pm.level, pm.param)
    out = model.forward(x, pm.level)
    if model.prediction_kind is not native_kind:
        out = convert_values(
            out, model.prediction_kind, native_kind, x, pm.level, pm.param
        )
    weight = float(spec.weights(np.array([pm.level]))[0])
    residual = out - target
    return float(weight * np.mean(np.sum(residual * residual, axis=1)))


def default_level_range(
    model_type: Parameterization, data_std: float = 1.0
) -> tuple[float, float]:
    """Training-level domain: uniform sampling range in the native variable.

    The ends exclude the singular targets: vp stops short of alpha = 1, ve
    of sigma = 0, rf of both s = 0 and s = 1.
    """
    if model_type is Parameterization.VP:
        return (VP_TERMINAL_ALPHA, 1.0 - 1e-3)
    if model_type is Parameterization.VE_KARRAS:
        return (1e-3, VE_SIGMA_MULTIPLE * data_std)
    return (1e-3, 1.0 - RF_START_OFFSET)


@dataclass
class OptimizerConfig:
    """Plain SGD with momentum, or a fixed-step Adam, both hand-rolled."""

    kind: str = "adam"
    lr: float = 1e-3
    steps: int = 2000
    batch_size: int = 128
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"optimizer kind must be sgd or adam, got {self.kind!r}")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")


@dataclass
class TrainResult:
    model: MLPModel
    loss_trace: list[tuple[int, float]]
    level_range: tuple[float, float]


def train(
    model: MLPModel,
    data: GaussianMixture,
    model_type: Parameterization,
    spec: LossSpec,
    schedule: OptimizerConfig,
    level_range: tuple[float, float] | None = None,
) -> TrainResult:
    """Run the optimizer loop; aborts with the trace if the loss diverges."""
    if spec.model_type is not model_type:
        raise ValueError("loss spec and training family disagree")
    level_range = level_range or model.level_range
    rng = RngStream(schedule.seed, stream_id=0)
    velocity = [
        (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
    ]
    second = [
        (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
    ]
    trace: list[tuple[int, float]] = []
    for step in range(schedule.steps):
        batch = make_batch(data, model_type, level_range, schedule.batch_size, rng)
        loss, grads = dsm_loss(model, batch, spec)
        if not math.isfinite(loss) or loss > 1e6:
            raise TrainingError(
                f"loss diverged at step {step}: {loss!r}; trace: {trace[-5:]}"
            )
        if schedule.kind == "sgd":
            for layer, vel, (g_w, g_b) in zip(model.layers, velocity, grads):
                vel[0][:] = schedule.momentum * vel[0] + g_w
                vel[1][:] = schedule.momentum * vel[1] + g_b
                layer.weight -= schedule.lr * vel[0]
                layer.bias -= schedule.lr * vel[1]
        else:
            t = step + 1
            corr1 = 1.0 - schedule.beta1**t
            corr2 = 1.0 - schedule.beta2**t
            for layer, m, v, (g_w, g_b) in zip(model.layers, velocity, second, grads):
                m[0][:] = schedule.beta1 * m[0] + (1 - schedule.beta1) * g_w
                m[1][:] = schedule.beta1 * m[1] + (1 - schedule.beta1) * g_b
                v[0][:] = schedule.beta2 * v[0] + (1 - schedule.beta2) * g_w * g_w
                v[1][:] = schedule.beta2 * v[1] + (1 - schedule.beta2) * g_b * g_b
                layer.weight -= schedule.lr * (m[0] / corr1) / (
                    np.sqrt(v[0] / corr2) + schedule.adam_eps
                )
                layer.bias -= schedule.lr * (m[1] / corr1) / (
                    np.sqrt(v[1] / corr2) + schedule.adam_eps
                )
        if schedule.log_every and (step % schedule.log_every == 0 or step == schedule.steps - 1):
            trace.append((step, loss))
    return TrainResult(model=model, loss_trace=trace, level_range=level_range)


def as_field(model: MLPModel, eval_param: Parameterization) -> PredictionField:
    """Wrap a trained model as a prediction field over ``eval_param`` states.

    Kind values name the same quantity in any coordinates, so only the
    evaluation point needs converting when frames differ.
    """

    def fn(states: np.ndarray, level: float) -> np.ndarray:
        if eval_param is model.param:
            return model.forward(states, level)
        model_states, model_level = convert_states(states, level, eval_param, model.param)
        return model.forward(model_states, model_level)

    return PredictionField(kind=model.prediction_kind, fn=fn)


def score_field_error(
    model: MLPModel,
    data: GaussianMixture,
    levels: Sequence[float],
    n_samples: int,
    rng: RngStream,
    mass_fraction: float = 0.9,
) -> list[tuple[float, float]]:
    """Relative L2 error of the model against the oracle score, per level.

    Error is measured on the high-density region: samples from the noised
    data, keeping the top ``mass_fraction`` by density.  Model outputs are
    mapped to frame scores before comparing.
    """
    out = []
    for level in levels:
        pm = perturb(data, model.param, level)
        x = pm.sample(n_samples, rng)
        logp = pm.logpdf(x)
        keep = logp >= np.quantile(logp, 1.0 - mass_fraction)
        x = x[keep]
        truth = pm.score(x)
        pred = values_to_frame_score(
            model.forward(x, level), model.prediction_kind, x, level, model.param
        )
        num = float(np.sum((pred - truth) ** 2))
        den = float(np.sum(truth**2))
        out.append((float(level), math.sqrt(num / den)))
    return out


def save_checkpoint(
    model: MLPModel, path: str | Path, loss_spec: LossSpec | None = None, extra: dict | None = None
) -> None:
    config = model.to_config()
    if loss_spec is not None:
        config["loss_spec"] = {
            "model_type": loss_spec.model_type.label,
            "weight_mode": loss_spec.weight_mode
            if isinstance(loss_spec.weight_mode, str)
            else "custom",
        }
    if extra:
        config["extra"] = extra
    Path(path).write_text(json.dumps(config, indent=2, sort_keys=True))


def load_checkpoint(path: str | Path) -> MLPModel:
    config = json.loads(Path(path).read_text())
    if config.get("format") != "langdiff-checkpoint":
        raise ValueError(f"{path} is not a checkpoint file")
    return MLPModel.from_config(config)
