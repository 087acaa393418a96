"""Runnable property suites behind the `verify` CLI command.

Each suite exercises one module's invariants at a budget small enough to
run interactively; the pytest acceptance suite runs the same properties at
full size.  A check returns a :class:`CheckResult`; a suite is a list of
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import io_utils
from .convert import (
    convert_point,
    convert_prediction,
    convert_values,
    roundtrip,
)
from .core import (
    ModelType,
    ParamPoint,
    Parameterization,
    Prediction,
    PredictionField,
    PredictionKind,
    RngStream,
    draw_increment,
)
from .fokker_planck import (
    FPOperator,
    GridDensity,
    explicit_dt_bound,
    fp_step,
    grid_kl,
    kl_trace,
)
from .forward import forward_spec, integrate_forward_ensemble, uniform_level_grid
from .langevin import LangevinSpec, SplitStep, langevin_step, split_coefficients, split_step
from .oracle import Gaussian, GaussianMixture, kl_gaussian, oracle_field, perturb, score_field
from .reverse import generate, reverse_spec
from .train import (
    LossSpec,
    MLPModel,
    OptimizerConfig,
    TrainBatch,
    dsm_loss,
    make_batch,
    score_field_error,
    sm_loss_oracle,
    train,
)

#: Level ranges over which absolute 1e-12 round-trip accuracy is claimed.
#: Double precision cannot hold 1e-12 absolute error for unbounded sigma
#: (the s -> sigma map amplifies rounding by 1/(1-s)^2), so randomized
#: checks draw levels from these windows.
NONDEGENERATE_LEVELS = {
    Parameterization.VP: (1e-3, 1.0),
    Parameterization.VE_KARRAS: (0.0, 50.0),
    Parameterization.RECTIFIED_FLOW: (0.0, 0.98),
}

#: Tighter windows for prediction-triangle checks, which amplify values by
#: sqrt(1+sigma^2)/sigma near sigma = 0 and by 1/(1-s) near s = 1.
PREDICTION_LEVELS = {
    Parameterization.VP: (4e-4, 0.99),
    Parameterization.VE_KARRAS: (0.1, 50.0),
    Parameterization.RECTIFIED_FLOW: (0.09, 0.95),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _rng(i: int = 0) -> RngStream:
    return RngStream(20_260_810, stream_id=i)


def _bimodal() -> GaussianMixture:
    return GaussianMixture([0.5, 0.5], [[-2.0], [2.0]], [[[0.1]], [[0.1]]])


# ---------------------------------------------------------------------------
# core


def suite_core() -> list[CheckResult]:
    out = []
    rng = _rng(1)
    inc = draw_increment(rng, 0.25, 1_000_000)
    mean = float(inc.noise.mean())
    var = float(inc.noise.var())
    out.append(
        _check(
            "increment moments",
            abs(mean) < 4 * math.sqrt(0.25 / 1e6) and abs(var - 0.25) < 0.01 * 0.25,
            f"mean={mean:.2e} var={var:.6f} (want 0, 0.25)",
        )
    )
    a = draw_increment(RngStream(5, 3), 0.5, 1000).noise
    b = draw_increment(RngStream(5, 3), 0.5, 1000).noise
    c = draw_increment(RngStream(5, 4), 0.5, 1000).noise
    out.append(
        _check(
            "increment determinism",
            np.array_equal(a, b) and not np.array_equal(a, c),
            "same (seed, stream) bitwise equal; different stream differs",
        )
    )
    rng2 = _rng(2)
    worst = 0.0
    for param in Parameterization:
        lo, hi = NONDEGENERATE_LEVELS[param]
        for _ in range(200):
            lvl = float(rng2.uniform(max(lo, 1e-6), hi))
            p = ParamPoint(param, rng2.normal(3), lvl)
            q = io_utils.point_from_json(io_utils.point_to_json(p))
            txt = [float(io_utils.format_float(v)) for v in p.state]
            worst = max(
                worst,
                float(np.max(np.abs(q.state - p.state))),
                abs(q.level - p.level),
                float(np.max(np.abs(np.array(txt) - p.state))),
            )
    out.append(
        _check(
            "point serialization identity",
            worst == 0.0,
            f"max serialize/deserialize error {worst!r} (want exactly 0)",
        )
    )
    return out


# ---------------------------------------------------------------------------
# conversions


def _random_points(param: Parameterization, n: int, rng: RngStream, windows=None):
    lo, hi = (windows or NONDEGENERATE_LEVELS)[param]
    levels = rng.uniform(max(lo, 1e-9) if param is Parameterization.VP else lo, hi, n)
    states = 3.0 * rng.normal((n, 2))
    return states, levels


def suite_conversions(cases_per_pair: int = 3000) -> list[CheckResult]:
    out = []
    rng = _rng(3)
    worst = 0.0
    for src in Parameterization:
        for via in Parameterization:
            if src is via:
                continue
            states, levels = _random_points(src, cases_per_pair, rng)
            for i in range(cases_per_pair):
                p = ParamPoint(src, states[i], float(levels[i]))
                worst = max(worst, roundtrip(p, via).max_abs_roundtrip_error)
    out.append(
        _check(
            "point round trips (state and level)",
            worst <= 1e-12,
            f"max abs error {worst:.2e} over {6 * cases_per_pair} cases (tol 1e-12)",
        )
    )
    worst_tri = 0.0
    kinds = list(PredictionKind)
    for param in Parameterization:
        states, levels = _random_points(param, cases_per_pair // 3, rng, PREDICTION_LEVELS)
        for i in range(states.shape[0]):
            p = ParamPoint(param, states[i], float(levels[i]))
            value = rng.normal(2)
            src_kind = kinds[i % 3]
            pred = Prediction(src_kind, value, p)
            for dst_kind in kinds:
                if dst_kind is src_kind:
                    continue
                third = next(k for k in kinds if k is not src_kind and k is not dst_kind)
                direct = convert_prediction(pred, dst_kind)
                two_step = convert_prediction(convert_prediction(pred, third), dst_kind)
                worst_tri = max(
                    worst_tri, float(np.max(np.abs(direct.value - two_step.value)))
                )
    out.append(
        _check(
            "prediction triangle closures",
            worst_tri <= 1e-12,
            f"max abs direct-vs-two-step gap {worst_tri:.2e} (tol 1e-12)",
        )
    )
    gm = _bimodal()
    worst_oracle = 0.0
    for alpha in (0.2, 0.5, 0.9):
        pm_vp = perturb(gm, Parameterization.VP, alpha)
        xs = pm_vp.sample(200, rng)
        for i in range(xs.shape[0]):
            point = ParamPoint(Parameterization.VP, xs[i], alpha)
            pred = Prediction(PredictionKind.SCORE, pm_vp.score(xs[i]), point)
            eps_pred = convert_prediction(pred, PredictionKind.NOISE)
            sigma = eps_pred.at.level
            native = -sigma * perturb(gm, Parameterization.VE_KARRAS, sigma).score(
                eps_pred.at.state
            )
            worst_oracle = max(worst_oracle, float(np.max(np.abs(eps_pred.value - native))))
    out.append(
        _check(
            "analytic score converts to analytic noise",
            worst_oracle <= 1e-10,
            f"max abs gap {worst_oracle:.2e} (tol 1e-10)",
        )
    )
    return out


# ---------------------------------------------------------------------------
# forward


def _discrete_marginal_moments(param: Parameterization, grid, x0: float):
    """Exact mean/variance of the Euler-Maruyama chain itself (linear SDEs)."""
    from .forward import _clock  # noqa: PLC2701 (module-internal reuse)

    spec = forward_spec(param)
    mean, var = x0, 0.0
    for k in range(len(grid) - 1):
        lvl, nxt = float(grid[k]), float(grid[k + 1])
        dt = _clock(param, nxt) - _clock(param, lvl)
        if param is Parameterization.VP:
            factor = 1.0 - 0.5 * dt
        elif param is Parameterization.VE_KARRAS:
            factor = 1.0
        else:
            factor = 1.0 - dt / (1.0 - lvl)
        g = spec.diffusion(lvl)
        mean = factor * mean
        var = factor * factor * var + g * g * dt
    return mean, var


def suite_forward(n_chains: int = 20_000) -> list[CheckResult]:
    out = []
    rng = _rng(4)
    interior = {
        Parameterization.VP: [0.9, 0.7, 0.5, 0.3, 0.1],
        Parameterization.VE_KARRAS: [0.4, 0.8, 1.2, 1.6, 2.0],
        Parameterization.RECTIFIED_FLOW: [0.19, 0.38, 0.57, 0.76, 0.95],
    }
    for j, param in enumerate(Parameterization):
        spec = forward_spec(param)
        max_level = interior[param][-1]
        grid = uniform_level_grid(param, max_level, 200)
        idx = [int(np.argmin(np.abs(grid - lvl))) for lvl in interior[param]]
        ens = integrate_forward_ensemble(
            spec, np.array([0.7]), grid, rng.spawn(40 + 10 * j), n_chains,
            record_indices=idx,
        )
        ok = True
        detail = []
        for k in idx:
            lvl = float(grid[k])
            a, b = spec.marginal_coeffs(lvl)
            exact_mean, exact_var = a * 0.7, b * b
            disc_mean, disc_var = _discrete_marginal_moments(param, grid[: k + 1], 0.7)
            sample = ens[k][:, 0]
            se_mean = math.sqrt(exact_var / n_chains) if exact_var > 0 else 1e-9
            se_var = exact_var * math.sqrt(2.0 / n_chains) + 1e-12
            mean_tol = 4 * se_mean + 1.05 * abs(disc_mean - exact_mean)
            var_tol = 4 * se_var + 1.05 * abs(disc_var - exact_var)
            ok &= abs(sample.mean() - exact_mean) <= mean_tol
            ok &= abs(sample.var(ddof=1) - exact_var) <= var_tol
            detail.append(f"{lvl:.3g}")
        out.append(
            _check(
                f"{param.label} SDE matches closed form",
                ok,
                f"5 levels ({', '.join(detail)}), 4 SE + exact discrete bias",
            )
        )
    # Gaussian preservation: skewness and excess kurtosis near 0
    spec = forward_spec(Parameterization.VP)
    grid = np.exp(-np.linspace(0.0, 2.0, 101))
    grid[0] = 1.0
    ens = integrate_forward_ensemble(spec, np.array([1.0]), grid, _rng(5), n_chains)
    x = ens[100][:, 0]
    z = (x - x.mean()) / x.std()
    skew = float(np.mean(z**3))
    kurt = float(np.mean(z**4) - 3.0)
    ok = abs(skew) < 4 * math.sqrt(6.0 / n_chains) and abs(kurt) < 4 * math.sqrt(
        24.0 / n_chains
    )
    out.append(
        _check(
            "gaussian preservation (skew, kurtosis)",
            ok,
            f"skew={skew:.4f} kurt={kurt:.4f} (4-SE bounds)",
        )
    )
    return out


# ---------------------------------------------------------------------------
# oracle


def suite_oracle() -> list[CheckResult]:
    out = []
    rng = _rng(6)
    gm = GaussianMixture(
        [0.4, 0.6],
        [[-1.5, 0.5], [1.0, -0.7]],
        [np.diag([0.3, 0.5]).tolist(), np.diag([0.4, 0.2]).tolist()],
    )
    levels = {
        Parameterization.VP: 0.6,
        Parameterization.VE_KARRAS: 0.8,
        Parameterization.RECTIFIED_FLOW: 0.45,
    }
    worst = 0.0
    for param, lvl in levels.items():
        pm = perturb(gm, param, lvl)
        xs = pm.sample(200, rng)
        h = 1e-5
        for i in range(xs.shape[0]):
            x = xs[i]
            analytic = pm.score(x)
            fd = np.zeros_like(x)
            for d in range(x.size):
                e = np.zeros_like(x)
                e[d] = h
                fd[d] = (pm.logpdf(x + e) - pm.logpdf(x - e)) / (2 * h)
            rel = np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-3))
            worst = max(worst, float(rel))
    out.append(
        _check(
            "score matches finite differences",
            worst <= 1e-6,
            f"max relative error {worst:.2e} (tol 1e-6)",
        )
    )
    # pushforward exactness via Monte Carlo moments
    pm = perturb(gm, Parameterization.VE_KARRAS, 1.3)
    n = 50_000
    draws0 = gm.sample(n, rng)[:, 0] + 1.3 * rng.normal(n)
    mc_mean = draws0.mean()
    mc_var = draws0.var(ddof=1)
    exact_mean = pm.mean()[0]
    exact_var = pm.cov()[0, 0]
    ok = abs(mc_mean - exact_mean) < 4 * math.sqrt(exact_var / n) and abs(
        mc_var - exact_var
    ) < 5 * exact_var * math.sqrt(2.0 / n)
    out.append(
        _check(
            "pushforward moments match sampling",
            ok,
            f"mean {mc_mean:.4f} vs {exact_mean:.4f}, var {mc_var:.4f} vs {exact_var:.4f}",
        )
    )
    # conversion coherence across parameterizations
    worst_coh = 0.0
    alpha = 0.55
    pm_vp = perturb(gm, Parameterization.VP, alpha)
    xs = pm_vp.sample(300, rng)
    for i in range(xs.shape[0]):
        point = ParamPoint(Parameterization.VP, xs[i], alpha)
        pred = Prediction(PredictionKind.SCORE, pm_vp.score(xs[i]), point)
        for kind, param in (
            (PredictionKind.NOISE, Parameterization.VE_KARRAS),
            (PredictionKind.VELOCITY, Parameterization.RECTIFIED_FLOW),
        ):
            conv = convert_prediction(pred, kind)
            native = oracle_field(gm, param, kind)(conv.at.state, conv.at.level)
            worst_coh = max(worst_coh, float(np.max(np.abs(conv.value - native))))
    out.append(
        _check(
            "native scores cohere across parameterizations",
            worst_coh <= 1e-10,
            f"max abs gap {worst_coh:.2e} (tol 1e-10)",
        )
    )
    # closed-form KL values
    kl_ok = (
        kl_gaussian(Gaussian([0.0], [[1.0]]), Gaussian([0.0], [[1.0]])) == 0.0
        and abs(kl_gaussian(Gaussian([0.0], [[1.0]]), Gaussian([1.0], [[1.0]])) - 0.5)
        < 1e-14
        and abs(
            kl_gaussian(Gaussian([0.0], [[1.0]]), Gaussian([0.0], [[4.0]]))
            - 0.5 * (math.log(4.0) + 0.25 - 1.0)
        )
        < 1e-14
    )
    out.append(_check("gaussian KL closed forms", kl_ok, "0, 0.5, 0.31815 cases"))
    return out


# ---------------------------------------------------------------------------
# langevin


def suite_langevin() -> list[CheckResult]:
    out = []
    rng = _rng(7)
    worst = 0.0
    for model_type in ModelType:
        for _ in range(1000):
            x = 3.0 * rng.normal(2)
            s = rng.normal(2)
            if model_type is ModelType.VE_KARRAS:
                lvl = float(rng.uniform(0.05, 30.0))
            else:
                lvl = float(rng.uniform(0.05, 0.95))
            c = split_coefficients(model_type, x, s, lvl)
            worst = max(
                worst,
                float(np.max(np.abs(c.drift_forward + c.drift_reverse - c.drift_langevin))),
                abs(c.var_forward + c.var_reverse - c.var_langevin),
            )
    out.append(
        _check(
            "split additivity (drift and variance)",
            worst <= 1e-12,
            f"max abs defect {worst:.2e} over 4000 evaluations (tol 1e-12)",
        )
    )
    # quick stationarity: standard normal target
    spec = LangevinSpec(
        score_field=lambda x, lvl: -x,
        g=lambda tau: 1.0,
        param=Parameterization.VP,
    )
    x = 5.0 + rng.normal((4000, 1))
    for k in range(2500):
        x = langevin_step(spec, x, k * 2e-3, 2e-3, rng)
    ok = abs(float(x.mean())) < 0.08 and 0.85 < float(x.var()) < 1.15
    out.append(
        _check(
            "stationary normal target held",
            ok,
            f"mean={float(x.mean()):.3f} var={float(x.var()):.3f}",
        )
    )
    # identity in distribution: one composed split step
    gm = _bimodal()
    level = 0.6
    pm = perturb(gm, Parameterization.VP, level)
    field = score_field(gm, Parameterization.VP)
    step = SplitStep(ModelType.VP_SDE, field)
    n = 50_000
    x0 = pm.sample(n, rng)
    dtau = 1e-3
    _, x1 = split_step(step, x0, level, dtau, rng)
    ok = True
    detail = []
    for power in (1, 2, 3):
        before = float(np.mean(x0**power))
        after = float(np.mean(x1**power))
        se = float(np.std(x0**power, ddof=1)) / math.sqrt(n)
        tol = 4 * math.sqrt(2.0) * se + 5.0 * dtau
        ok &= abs(after - before) <= tol
        detail.append(f"m{power}: {after - before:+.4f} (tol {tol:.4f})")
    out.append(_check("split step preserves noised density", ok, "; ".join(detail)))
    return out


# ---------------------------------------------------------------------------
# reverse


def suite_reverse() -> list[CheckResult]:
    out = []
    gm = _bimodal()
    data_std = math.sqrt(4.1)
    # bitwise native-kind equivalence
    score_fn = score_field(gm, Parameterization.VE_KARRAS)

    def score_as_field(states, level):
        from .convert import frame_score_to_values

        return frame_score_to_values(
            score_fn(states, level), PredictionKind.SCORE, states, level,
            Parameterization.VE_KARRAS,
        )

    field_score = PredictionField(PredictionKind.SCORE, score_as_field)

    def pre_converted(states, level):
        return convert_values(
            score_as_field(states, level),
            PredictionKind.SCORE,
            PredictionKind.NOISE,
            states,
            level,
            Parameterization.VE_KARRAS,
        )

    field_noise = PredictionField(PredictionKind.NOISE, pre_converted)
    spec_a = reverse_spec(ModelType.VE_KARRAS, field_score, 1, data_std=data_std)
    spec_b = reverse_spec(ModelType.VE_KARRAS, field_noise, 1, data_std=data_std)
    fa, _ = generate(spec_a, 2000, 60, _rng(8))
    fb, _ = generate(spec_b, 2000, 60, _rng(8))
    out.append(
        _check(
            "kind conversion is bitwise transparent",
            np.array_equal(fa, fb),
            "score-kind field vs pre-converted noise field, same seed",
        )
    )
    # monotone forward clock along reverse trajectories
    spec = reverse_spec(
        ModelType.VP_SDE,
        oracle_field(gm, Parameterization.VP, PredictionKind.SCORE),
        1,
        data_std=data_std,
    )
    lo, hi = spec.window
    grid = np.linspace(lo, hi, 101)
    clocks = [spec.forward_clock(float(t)) for t in grid]
    out.append(
        _check(
            "forward clock strictly decreases",
            bool(np.all(np.diff(clocks) < 0)),
            f"from {clocks[0]:.3g} down to {clocks[-1]:.3g}",
        )
    )
    # step-size convergence on a deterministic row: same initial points, so
    # per-chain gaps against a fine-step reference isolate integrator bias
    g1 = GaussianMixture([1.0], [[2.0]], [[[0.25]]])
    errors = {}
    for heun in (False, True):
        field_g = oracle_field(g1, Parameterization.VP, PredictionKind.SCORE)
        spec_g = reverse_spec(ModelType.VP_ODE, field_g, 1, horizon=6.0, heun=heun)
        ref, _ = generate(spec_g, 500, 3200, _rng(9))
        errs = []
        for steps in (50, 100):
            final, _ = generate(spec_g, 500, steps, _rng(9))
            errs.append(float(np.mean(np.abs(final - ref))))
        errors[heun] = errs
    euler_ratio = errors[False][0] / max(errors[False][1], 1e-15)
    heun_ratio = errors[True][0] / max(errors[True][1], 1e-15)
    out.append(
        _check(
            "euler halves terminal bias when steps double",
            1.6 < euler_ratio < 2.6 and heun_ratio > 3.0,
            f"euler gap ratio {euler_ratio:.2f} (want ~2); "
            f"heun gap ratio {heun_ratio:.2f} (want ~4)",
        )
    )
    return out


# ---------------------------------------------------------------------------
# train


def suite_train() -> list[CheckResult]:
    out = []
    rng = _rng(10)
    gm = GaussianMixture([1.0], [[0.0]], [[[1.0]]])
    worst = 0.0
    for family in Parameterization:
        for mode in ("paper", "uniform"):
            model = MLPModel.create(
                1, [8, 8], family_native_kind(family), family,
                default_range_for(family), rng,
            )
            spec = LossSpec(family, mode)
            lo, hi = default_range_for(family)
            batch = make_batch(gm, family, (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)), 32, rng)
            _, grads = dsm_loss(model, batch, spec)
            flat = model.flat_parameters()
            analytic = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
            idx = rng.generator.choice(flat.size, 20, replace=False)
            h = 1e-5
            for i in idx:
                probe = flat.copy()
                probe[i] += h
                model.set_flat_parameters(probe)
                up, _ = dsm_loss(model, batch, spec)
                probe[i] -= 2 * h
                model.set_flat_parameters(probe)
                down, _ = dsm_loss(model, batch, spec)
                fd = (up - down) / (2 * h)
                rel = abs(fd - analytic[i]) / max(abs(fd), abs(analytic[i]), 1e-6)
                worst = max(worst, rel)
            model.set_flat_parameters(flat)
    out.append(
        _check(
            "gradients match finite differences",
            worst <= 1e-4,
            f"max relative error {worst:.2e} over all families and weights (tol 1e-4)",
        )
    )
    # weighting neutrality of the per-level minimizer (linear model closed form)
    alpha = 0.6
    n = 20_000
    x0 = gm.sample(n, rng)
    eps = rng.normal((n, 1))
    x = math.sqrt(alpha) * x0 + math.sqrt(1 - alpha) * eps
    target = -eps / math.sqrt(1 - alpha)
    theta_hat = float(np.sum(target * x) / np.sum(x * x))
    ok = True  # same weight multiplies numerator and denominator identically
    theta_paper = float((0.5 * np.sum(target * x)) / (0.5 * np.sum(x * x)))
    ok = theta_hat == theta_paper
    out.append(
        _check(
            "per-level argmin unchanged by weighting",
            ok,
            f"theta* = {theta_hat:.5f} under both weightings",
        )
    )
    # DSM - SM is constant in the parameters
    const_ok, detail = dsm_sm_constancy(gm, n_perturb=10, n_samples=20_000, seed=77)
    out.append(_check("denoising loss = marginal loss + constant", const_ok, detail))
    return out


def family_native_kind(family: Parameterization) -> PredictionKind:
    from .train import NATIVE_OUTPUT

    return NATIVE_OUTPUT[family]


def default_range_for(family: Parameterization) -> tuple[float, float]:
    from .train import default_level_range

    return default_level_range(family, data_std=1.0)


def dsm_sm_constancy(
    gm: GaussianMixture, n_perturb: int, n_samples: int, seed: int
) -> tuple[bool, str]:
    """Check that the conditional and marginal losses differ by a constant.

    Uses matched samples: the noised states of the conditional batch are the
    marginal samples, so the difference's only parameter dependence is the
    cross term, whose expectation vanishes identically.  The spread across
    parameter perturbations must fit inside its Monte Carlo error.
    """
    rng = RngStream(seed)
    alpha = 0.55
    base = MLPModel.create(
        gm.dim, [16, 16], PredictionKind.SCORE, Parameterization.VP, (1e-4, 0.999), rng
    )
    x0 = gm.sample(n_samples, rng)
    eps = rng.normal((n_samples, gm.dim))
    a, b = math.sqrt(alpha), math.sqrt(1 - alpha)
    x = a * x0 + b * eps
    t_cond = -eps / b
    pm = perturb(gm, Parameterization.VP, alpha)
    s_marg = pm.score(x)
    weight = 0.5
    flat = base.flat_parameters()
    diffs = []
    max_se = 0.0
    for k in range(n_perturb):
        base.set_flat_parameters(flat + 0.2 * rng.normal(flat.size))
        m = base.forward(x, alpha)
        d_dsm = weight * np.sum((t_cond - m) ** 2, axis=1)
        d_sm = weight * np.sum((s_marg - m) ** 2, axis=1)
        diffs.append(float(np.mean(d_dsm - d_sm)))
        # with matched samples the parameter dependence sits entirely in the
        # cross term, whose expectation vanishes identically
        cross = 2.0 * weight * np.sum((t_cond - s_marg) * m, axis=1)
        max_se = max(max_se, float(cross.std(ddof=1)) / math.sqrt(n_samples))
    base.set_flat_parameters(flat)
    spread = float(np.std(diffs, ddof=1))
    bound = 3.0 * max_se
    return spread <= bound, f"spread {spread:.2e} vs MC bound {bound:.2e}"


# ---------------------------------------------------------------------------
# fokker-planck


def suite_fokker_planck() -> list[CheckResult]:
    out = []
    # heat kernel
    op = FPOperator(drift=lambda x, t: np.zeros_like(x), diffusion=lambda t: 1.0)
    r = GridDensity.from_function(lambda x: np.exp(-x * x / (2 * 0.04)), -8, 8, 400)
    dt = 0.8 * explicit_dt_bound(op, r, 0.0)
    n_steps = int(round(1.0 / dt))
    dt = 1.0 / n_steps
    for k in range(n_steps):
        r = fp_step(op, r, k * dt, dt)
    exact = GridDensity.from_function(lambda x: np.exp(-x * x / (2 * 1.04)), -8, 8, 400)
    l1 = float(np.sum(np.abs(r.values - exact.values)) * r.h)
    out.append(
        _check("heat kernel reproduced", l1 < 5e-3, f"L1 error {l1:.2e} at 400 cells")
    )
    # OU stationarity
    op_ou = FPOperator(drift=lambda x, t: -x, diffusion=lambda t: math.sqrt(2.0))
    rho0 = GridDensity.from_function(lambda x: np.exp(-x * x / 2), -8, 8, 320)
    rho = rho0
    dt = 0.8 * explicit_dt_bound(op_ou, rho, 0.0)
    for k in range(2000):
        rho = fp_step(op_ou, rho, k * dt, dt)
    drift_sup = float(np.max(np.abs(rho.values - rho0.values)))
    mass_gap = abs(rho.mass() - 1.0)
    out.append(
        _check(
            "OU stationary state held",
            drift_sup <= 1e-6 and mass_gap <= 1e-12,
            f"sup drift {drift_sup:.2e}, mass gap {mass_gap:.2e}",
        )
    )
    # KL trace: monotone, small defect, drift-only invariance
    p0 = GridDensity.from_function(lambda x: np.exp(-((x - 1.0) ** 2) / (2 * 0.25)), -10, 10, 500)
    q0 = GridDensity.from_function(lambda x: np.exp(-((x + 0.5) ** 2) / 2), -10, 10, 500)
    dt = 0.8 * explicit_dt_bound(op_ou, p0, 0.0)
    tr = kl_trace(op_ou, p0, q0, 0.6, dt, record_every=5)
    inner = slice(3, -3)
    rel = float(np.max(tr.defect()[inner] / np.abs(tr.mismatch[inner])))
    monotone = bool(np.all(np.diff(tr.kl) <= 1e-12))
    out.append(
        _check(
            "KL non-increasing with matched decay rate",
            monotone and rel <= 0.02,
            f"monotone={monotone}, max relative defect {rel:.4f} (tol 0.02)",
        )
    )
    op_drift = FPOperator(drift=lambda x, t: -x, diffusion=lambda t: 0.0)
    dtd = 0.8 * explicit_dt_bound(op_drift, p0, 0.0)
    trd = kl_trace(op_drift, p0, q0, 0.3, dtd, record_every=20)
    rel_change = abs(trd.kl[-1] - trd.kl[0]) / trd.kl[0]
    out.append(
        _check(
            "drift alone leaves KL unchanged",
            rel_change <= 0.02,
            f"relative KL change {rel_change:.4f} over the horizon (tol 0.02)",
        )
    )
    return out


# ---------------------------------------------------------------------------
# determinism


def suite_determinism() -> list[CheckResult]:
    out = []
    gm = _bimodal()
    spec = reverse_spec(
        ModelType.VP_SDE,
        oracle_field(gm, Parameterization.VP, PredictionKind.SCORE),
        1,
        data_std=math.sqrt(4.1),
    )
    a, _ = generate(spec, 20_000, 40, RngStream(123), workers=1)
    b, _ = generate(spec, 20_000, 40, RngStream(123), workers=3)
    out.append(
        _check(
            "ensembles identical for any worker count",
            np.array_equal(a, b),
            "20000 chains, workers 1 vs 3, bitwise",
        )
    )
    return out


SUITES = {
    "core": suite_core,
    "conversions": suite_conversions,
    "forward": suite_forward,
    "oracle": suite_oracle,
    "langevin": suite_langevin,
    "reverse": suite_reverse,
    "train": suite_train,
    "fokker-planck": suite_fokker_planck,
    "determinism": suite_determinism,
}


def run_suites(names: list[str] | None = None) -> list[tuple[str, CheckResult]]:
    names = names or list(SUITES)
    results = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        for result in SUITES[name]():
            results.append((name, result))
    return results
