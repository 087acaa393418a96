"""Langevin-split diffusion sampling at desk scale.

Forward noising processes, their reverse-time samplers, exact conversions
between parameterizations and prediction kinds, denoising training of small
networks with hand-rolled backprop, and a 1-D Fokker-Planck solver for
verifying the KL-decay identities, all driven by analytic Gaussian-mixture
oracles.
"""

from .convert import (
    ConversionReport,
    convert_level,
    convert_point,
    convert_prediction,
    convert_states,
    convert_values,
    roundtrip,
)
from .core import (
    CHAIN_BLOCK,
    RF_S_MAX,
    VE_SIGMA_MIN_SCORE,
    BrownianIncrement,
    DomainError,
    ModelType,
    ParamPoint,
    Parameterization,
    Prediction,
    PredictionField,
    PredictionKind,
    RngStream,
    draw_increment,
    zero_noise_level,
)
from .fokker_planck import FPOperator, GridDensity, KLTrace, StabilityError, fp_step, kl_trace
from .forward import (
    ForwardSpec,
    forward_spec,
    integrate_forward_ensemble,
    integrate_forward_sde,
    sample_closed_form,
    sample_closed_form_ensemble,
    uniform_level_grid,
    vp_alpha_from_time,
    vp_time_from_alpha,
)
from .langevin import (
    LangevinSpec,
    SplitCoefficients,
    SplitStep,
    langevin_g,
    langevin_step,
    run_langevin,
    run_langevin_ensemble,
    split_coefficients,
    split_step,
)
from .oracle import (
    Gaussian,
    GaussianMixture,
    PerturbedMixture,
    kl_gaussian,
    oracle_field,
    perturb,
    quadrature_kl,
    score,
    score_field,
)
from .reverse import (
    DualityReport,
    ReverseSpec,
    duality_check,
    generate,
    initial_ensemble,
    karras_sigma_grid,
    reverse_spec,
    reverse_step,
)
from .train import (
    LossSpec,
    MLPModel,
    OptimizerConfig,
    TrainBatch,
    TrainResult,
    as_field,
    conditional_score_target,
    dsm_loss,
    load_checkpoint,
    save_checkpoint,
    score_field_error,
    sm_loss_oracle,
    train,
)

__version__ = "0.1.0"
