"""Stage-by-stage orchestration of a run directory.

Stages communicate only through files in the run directory, so each can be
invoked on its own from the command line:

``generate`` writes ``data/``; ``sensitivity`` screens eigenvalues and picks
``K``; ``optimize`` fits the fractional model and the MAP point; ``sample``
runs the chain; ``diagnose`` writes KL, summaries, correlations and
posterior-predictive statistics. Every stage updates ``manifest.json``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import plotting
from .artifacts import (Manifest, read_chain, read_json, read_matrix, write_chain, write_json,
                        write_matrix, write_table)
from .bayes import (NoiseModel, ObservationSet, Posterior, PriorSpec, read_observations,
                    shrinkage_intensity, write_observations)
from .config import RunConfig
from .diagnostics import (correlation_matrix, eigenvalue_summary, kl_report, posterior_predictive,
                          posterior_summary)
from .highfidelity import GrfConfig, Grid2D, HifiConfig, run_ensemble
from .operator import (OperatorSpectrum, SpectrumParams, parameter_names, params_from_spectrum,
                       spectrum_from_json, spectrum_to_json)
from .sampler import DramConfig, optimize_frade_mle, optimize_map, run_dram
from .sensitivity import screen_eigenvalues, select_inferred_set
from .spectral import (FourierGrid, FradeParams, InitialCondition, ObservationOperator, excited_modes,
                       frade_eigenvalues, transform_initial_condition)

__all__ = [
    "StageError",
    "STAGES",
    "RunContext",
    "stage_generate",
    "stage_sensitivity",
    "stage_optimize",
    "stage_sample",
    "stage_diagnose",
    "run_pipeline",
    "observation_points",
]

log = logging.getLogger(__name__)

STAGES = ("generate", "sensitivity", "optimize", "sample", "diagnose")
SEED_STREAMS = ("data", "ensemble", "sensitivity", "sampler")


class StageError(RuntimeError):
    """A failure tagged with the stage that raised it; ``exit_code`` is stage specific."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = 3 + STAGES.index(stage)


def observation_points(config: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Evenly spaced points: ``[0, L)`` for spatial series, ``[0, t_max]`` for time series."""
    d, m = config.data, config.model
    if d.series_kind == "spatial":
        x = np.arange(d.n_obs) * (m.length / d.n_obs)
        return x, np.full(d.n_obs, d.t_obs)
    t = np.linspace(0.0, d.t_max, d.n_obs)
    return np.full(d.n_obs, d.x_obs), t


@dataclass
class RunContext:
    config: RunConfig
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "data").mkdir(exist_ok=True)

    @cached_property
    def seeds(self) -> dict[str, int]:
        children = np.random.SeedSequence(self.config.seed).spawn(len(SEED_STREAMS))
        return {name: int(c.generate_state(1)[0]) for name, c in zip(SEED_STREAMS, children)}

    @cached_property
    def grid(self) -> FourierGrid:
        return FourierGrid(self.config.model.length, self.config.model.n_points)

    @cached_property
    def initial(self):
        m = self.config.model
        return transform_initial_condition(InitialCondition(m.ic_center, m.ic_width), self.grid)

    @cached_property
    def n_modes(self) -> int:
        return excited_modes(self.initial)

    @property
    def u_mean(self) -> float:
        return self.config.model.u_mean

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def manifest(self) -> Manifest:
        man = Manifest(self.root)
        man.set_config(self.config.to_dict())
        for name, seed in self.seeds.items():
            man.record_seed(name, seed)
        man.record_seed("master", self.config.seed)
        return man

    def prior(self, K: int) -> PriorSpec:
        p = self.config.prior
        return PriorSpec(self.grid, K, self.u_mean, p.decay_factor, p.nu_max)

    def truth_spectrum(self) -> np.ndarray:
        m = self.config.model
        return frade_eigenvalues(FradeParams(m.alpha, m.nu, m.u_mean), self.grid)

    def noise(self) -> NoiseModel:
        if self.config.case == "frade":
            d = self.config.data
            sigma = d.likelihood_sigma if d.likelihood_sigma is not None else d.sigma
            if sigma <= 0:
                raise ValueError("noiseless data needs data.likelihood_sigma > 0 for inference")
            return NoiseModel("iid_gaussian", sigma)
        meta = read_json(self.path("data", "ensemble.json"))
        cov = read_matrix(self.path("data", "covariance.csv"))
        return NoiseModel.from_ensemble(cov, meta["n_members"], self.config.hifi.variance_floor,
                                        meta["shrinkage"])

    def observations(self) -> ObservationSet:
        path = self.path("data", "observations.csv")
        if not path.exists():
            raise FileNotFoundError(f"{path} is missing; run the generate stage first")
        kind = "spatial" if self.config.case == "hifi" else self.config.data.series_kind
        return read_observations(path, self.noise(), kind)

    def forward(self, obs: ObservationSet) -> ObservationOperator:
        return obs.operator(self.initial, self.u_mean, self.n_modes)

    def read_spectrum(self, name: str) -> OperatorSpectrum:
        return spectrum_from_json(self.path(name).read_text())

    def write_spectrum(self, name: str, mu, manifest: Manifest):
        path = self.path(name)
        path.write_text(spectrum_to_json(OperatorSpectrum(np.asarray(mu, dtype=complex), self.grid)) + "\n")
        manifest.add_artifact(path)


def _stage(name):
    def wrap(fn):
        def run(ctx: RunContext, *args, **kwargs):
            start = time.perf_counter()
            try:
                info = fn(ctx, *args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                log.exception("stage %s failed", name)
                raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
            log.info("stage %s finished in %.1f s", name, time.perf_counter() - start)
            return info
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


# ---------------------------------------------------------------- generate

@_stage("generate")
def stage_generate(ctx: RunContext) -> dict:
    """Write observation data (and, for hifi, ensemble mean and covariance files)."""
    man = ctx.manifest()
    if ctx.config.case == "frade":
        info = _generate_frade(ctx, man)
    else:
        info = _generate_hifi(ctx, man)
    plotting.plot_observations(read_observations(ctx.path("data", "observations.csv")),
                               ctx.path("data", "observations.png"))
    man.add_figure(ctx.path("data", "observations.png"))
    man.record_stage("generate", info)
    man.save()
    return info


def _generate_frade(ctx: RunContext, man: Manifest) -> dict:
    d = ctx.config.data
    x, t = observation_points(ctx.config)
    mu = ctx.truth_spectrum()
    clean = ObservationOperator(ctx.initial, x, t, ctx.u_mean)(mu)
    rng = np.random.default_rng(ctx.seeds["data"])
    values = clean + d.sigma * rng.standard_normal(clean.size) if d.sigma > 0 else clean
    obs = ObservationSet(x, t, values, NoiseModel(), d.series_kind)
    write_observations(obs, ctx.path("data", "observations.csv"))
    man.add_artifact(ctx.path("data", "observations.csv"))
    ctx.write_spectrum("data/truth_spectrum.json", mu, man)
    return {"n_obs": obs.n, "series_kind": d.series_kind, "sigma": d.sigma}


def _hifi_config(ctx: RunContext) -> HifiConfig:
    h, m = ctx.config.hifi, ctx.config.model
    grid = Grid2D(h.n_x, h.n_y, m.length, h.length_y)
    return HifiConfig(GrfConfig(h.sigma2, h.ell_x, h.ell_y, grid), m.u_mean, m.nu_p,
                      m.ic_center, m.ic_width, h.safety)


def _resolve_shrinkage(setting, members, n_obs) -> float:
    if setting == "none":
        return 0.0
    if setting == "auto":
        return shrinkage_intensity(members) if members.shape[0] <= n_obs else 0.0
    value = float(setting)
    if not 0.0 <= value <= 1.0:
        raise ValueError("hifi.shrinkage must be 'auto', 'none' or a number in [0, 1]")
    return value


def _generate_hifi(ctx: RunContext, man: Manifest) -> dict:
    h = ctx.config.hifi
    hc = _hifi_config(ctx)
    times = [h.t_obs, h.t_extrap]
    stats = run_ensemble(h.n_members, hc, times, ctx.seeds["ensemble"], h.n_workers)
    files = {}
    for label, t in (("", h.t_obs), ("validation_", h.t_extrap)):
        s = stats[float(t)]
        write_table(ctx.path("data", f"{label}mean.csv"), ["x", "value"], zip(s.x, s.mean))
        write_matrix(ctx.path("data", f"{label}covariance.csv"), s.covariance)
        files[float(t)] = s
        man.add_artifact(ctx.path("data", f"{label}mean.csv"))
        man.add_artifact(ctx.path("data", f"{label}covariance.csv"))
    cal = stats[float(h.t_obs)]
    obs = ObservationSet(cal.x, h.t_obs, cal.mean, NoiseModel(), "spatial")
    write_observations(obs, ctx.path("data", "observations.csv"))
    man.add_artifact(ctx.path("data", "observations.csv"))
    shrink = {t: _resolve_shrinkage(h.shrinkage, s.members, s.x.size) for t, s in stats.items()}
    meta = {
        "n_members": cal.n_members,
        "t_obs": h.t_obs,
        "t_extrap": h.t_extrap,
        "shrinkage": shrink[float(h.t_obs)],
        "validation_shrinkage": shrink[float(h.t_extrap)],
        "member_seeds": cal.seeds,
        "failed_seeds": cal.failed,
        "peclet": hc.peclet,
    }
    write_json(ctx.path("data", "ensemble.json"), meta)
    man.add_artifact(ctx.path("data", "ensemble.json"))
    return {"n_members": cal.n_members, "n_failed": len(cal.failed), "shrinkage": meta["shrinkage"]}


# ---------------------------------------------------------------- sensitivity

def _fit_frade(ctx: RunContext, obs: ObservationSet, man: Manifest) -> tuple[FradeParams, np.ndarray]:
    """Stage-one fit; cached in ``frade_fit.json`` so later stages reuse it."""
    path = ctx.path("frade_fit.json")
    if path.exists():
        fit = read_json(path)
        params = FradeParams(fit["alpha"], fit["nu"], ctx.u_mean)
    else:
        m = ctx.config.model
        params, res = optimize_frade_mle(obs, ctx.forward(obs), ctx.u_mean, start=(m.alpha, m.nu))
        write_json(path, {"alpha": params.alpha, "nu": params.nu, "log_likelihood": res.value,
                          "converged": res.converged, "n_evaluations": res.n_evaluations})
        man.add_artifact(path)
    return params, frade_eigenvalues(params, ctx.grid)


@_stage("sensitivity")
def stage_sensitivity(ctx: RunContext) -> dict:
    """Screen modes ``1..n_modes-1`` and select the inferred head ``K``.

    Synthetic runs screen around the known fractional spectrum; ensemble
    runs, which have no reference spectrum, screen around the stage-one fit.
    """
    s = ctx.config.sensitivity
    man = ctx.manifest()
    obs = ctx.observations()
    forward = ctx.forward(obs)
    if ctx.config.case == "frade":
        base = ctx.truth_spectrum()
    else:
        _, base = _fit_frade(ctx, obs, man)
    prior = ctx.prior(ctx.n_modes - 1)
    result = screen_eigenvalues(forward, base, prior, s.n_base, ctx.seeds["sensitivity"],
                                s.threshold, s.mass, s.aggregation)
    K, sensitive = select_inferred_set(result)
    if s.K is not None:
        K = s.K
    write_table(ctx.path("sensitivity.csv"), ["k", "param", "S_T_max", "sensitive"], result.rows())
    man.add_artifact(ctx.path("sensitivity.csv"))
    info = {"K": K, "sensitive_set": [int(k) for k in sensitive], "n_screened": prior.K,
            "aggregation": s.aggregation, "threshold": s.threshold, "n_base": s.n_base}
    write_json(ctx.path("selection.json"), info)
    man.add_artifact(ctx.path("selection.json"))
    plotting.plot_sensitivity(result, ctx.path("sensitivity.png"))
    man.add_figure(ctx.path("sensitivity.png"))
    man.record_stage("sensitivity", info)
    man.save()
    return info


def _selected_K(ctx: RunContext) -> int:
    path = ctx.path("selection.json")
    if path.exists():
        return int(read_json(path)["K"])
    if ctx.config.sensitivity.K is not None:
        return ctx.config.sensitivity.K
    raise FileNotFoundError("selection.json is missing; run the sensitivity stage or set sensitivity.K")


def _posterior(ctx: RunContext, obs: ObservationSet, tail, K: int) -> Posterior:
    theta0 = params_from_spectrum(tail, K, ctx.grid, ctx.u_mean)
    template = SpectrumParams(theta0, np.asarray(tail, dtype=complex), ctx.grid, ctx.u_mean)
    return Posterior(obs, template, ctx.prior(K), ctx.initial, ctx.n_modes)


# ---------------------------------------------------------------- optimize

@_stage("optimize")
def stage_optimize(ctx: RunContext) -> dict:
    """Fractional-model MLE for the fixed tail, then the MAP point of the head."""
    man = ctx.manifest()
    obs = ctx.observations()
    K = _selected_K(ctx)
    params, tail = _fit_frade(ctx, obs, man)
    ctx.write_spectrum("fixed_tail.json", tail, man)
    post = _posterior(ctx, obs, tail, K)
    theta0 = post.template.theta
    fit = optimize_map(post, theta0)
    write_json(ctx.path("map.json"), {
        "names": parameter_names(K),
        "theta": fit.x, "log_posterior": fit.value, "log_posterior_seed": post(theta0),
        "converged": fit.converged, "n_evaluations": fit.n_evaluations, "K": K,
    })
    man.add_artifact(ctx.path("map.json"))
    info = {"alpha": params.alpha, "nu": params.nu, "K": K, "map_log_posterior": fit.value,
            "map_converged": fit.converged}
    man.record_stage("optimize", info)
    man.save()
    return info


# ---------------------------------------------------------------- sample

def _dram_config(ctx: RunContext) -> DramConfig:
    s = ctx.config.sampler
    return DramConfig(s.n_steps, s.burn_in, s.adapt_start, s.adapt_interval, s.initial_proposal_scale,
                      s.dr_scale, s.epsilon, ctx.seeds["sampler"])


@_stage("sample")
def stage_sample(ctx: RunContext) -> dict:
    """DRAM chain over the head, started at the MAP point."""
    man = ctx.manifest()
    obs = ctx.observations()
    fit = read_json(ctx.path("map.json"))
    K = int(fit["K"])
    tail = ctx.read_spectrum("fixed_tail.json").mu
    post = _posterior(ctx, obs, tail, K)
    chain = run_dram(post, np.array(fit["theta"]), _dram_config(ctx))
    write_chain(ctx.path("chain.csv"), chain)
    man.add_artifact(ctx.path("chain.csv"))
    man.add_artifact(ctx.path("chain.json"))
    plotting.plot_traces(chain, ctx.path("traces.png"))
    man.add_figure(ctx.path("traces.png"))
    info = {"n_steps": chain.n_steps, "burn_in": chain.burn_in, "acceptance_rate": chain.acceptance_rate,
            "first_stage_acceptance": chain.first_stage_acceptance, "n_failed": chain.n_failed}
    man.record_stage("sample", info)
    man.save()
    return info


# ---------------------------------------------------------------- diagnose

def _predictive_rows(pred, reference=None, ref_std=None):
    for i, t in enumerate(pred.times):
        for j, x in enumerate(pred.locations):
            row = [t, x, pred.mean[i, j], pred.std[i, j], pred.lower[i, j], pred.upper[i, j]]
            if reference is not None:
                row.append(reference[i][j])
                row.append(ref_std[i][j] if ref_std is not None else 0.0)
            yield row


def _coverage(pred_mean, pred_std, data):
    z = np.abs(pred_mean - data) / pred_std
    return {"fraction_within_3std": float(np.mean(z < 3.0)), "rms_normalized_misfit": float(np.sqrt(np.mean(z**2)))}


@_stage("diagnose")
def stage_diagnose(ctx: RunContext) -> dict:
    """KL divergences, summaries, correlations and posterior-predictive statistics."""
    d = ctx.config.diagnostics
    man = ctx.manifest()
    obs = ctx.observations()
    chain = read_chain(ctx.path("chain.csv"))
    K = chain.K
    prior = ctx.prior(K)
    tail = ctx.read_spectrum("fixed_tail.json").mu
    info: dict = {"K": K}

    kl = kl_report(chain, prior, d.n_kl_samples)
    write_table(ctx.path("kl.csv"), ["k", "param", "kl", "post_mean", "post_std"], kl.rows())
    plotting.plot_kl(kl, ctx.path("kl.png"))
    info["kl_max"] = float(kl.kl.max())

    summ = posterior_summary(chain)
    write_table(ctx.path("summary.csv"), ["param", "mean", "std", "q025", "q975", "q005", "q995"],
                ([n, summ.mean[i], summ.std[i], *summ.ci95[i], *summ.ci99[i]] for i, n in enumerate(summ.names)))

    eig = eigenvalue_summary(chain, ctx.grid, ctx.u_mean)
    truth = ctx.truth_spectrum()[1:] if ctx.config.case == "frade" else None
    rows = []
    for k in range(K):
        row = [k + 1, eig.real.mean[k], eig.real.std[k], *eig.real.ci99[k],
               eig.imag.mean[k], eig.imag.std[k], *eig.imag.ci99[k],
               eig.mapped_mean[k].real, eig.mapped_mean[k].imag]
        rows.append(row)
    write_table(ctx.path("eigenvalues.csv"),
                ["k", "re_mean", "re_std", "re_q005", "re_q995", "im_mean", "im_std", "im_q005", "im_q995",
                 "re_at_mean_theta", "im_at_mean_theta"], rows)
    plotting.plot_eigenvalues(eig, ctx.path("eigenvalues.png"), truth)
    if truth is not None:
        in_re, in_im = eig.contains(truth[:K], 99)
        info["truth_in_99"] = {"real": in_re.tolist(), "imag": in_im.tolist()}

    corr = correlation_matrix(chain)
    write_table(ctx.path("correlation.csv"), ["param", *corr.names],
                ([n, *corr.matrix[i]] for i, n in enumerate(corr.names)))
    plotting.correlation_svg(corr, ctx.path("correlation.svg"))
    info["mean_abs_correlation"] = corr.mean_abs_offdiag

    info.update(_predictive(ctx, chain, tail, obs, man))

    for name in ("kl.csv", "summary.csv", "eigenvalues.csv", "correlation.csv", "correlation.svg"):
        man.add_artifact(ctx.path(name))
    for name in ("kl.png", "eigenvalues.png"):
        man.add_figure(ctx.path(name))
    write_json(ctx.path("diagnostics.json"), info)
    man.add_artifact(ctx.path("diagnostics.json"))
    man.record_stage("diagnose", info)
    man.save()
    return info


def _predictive(ctx: RunContext, chain, tail, obs: ObservationSet, man: Manifest) -> dict:
    d = ctx.config.diagnostics
    x = ctx.grid.x
    info = {}
    if ctx.config.case == "hifi":
        h = ctx.config.hifi
        meta = read_json(ctx.path("data", "ensemble.json"))
        times = [h.t_obs, h.t_extrap]
        pred = posterior_predictive(chain, tail, ctx.initial, ctx.u_mean, times, x, d.n_predictive, ctx.n_modes)
        refs, stds = [], []
        for label, key in (("", "shrinkage"), ("validation_", "validation_shrinkage")):
            _, rows = _read_mean(ctx.path("data", f"{label}mean.csv"))
            cov = read_matrix(ctx.path("data", f"{label}covariance.csv"))
            noise = NoiseModel.from_ensemble(cov, meta["n_members"], h.variance_floor, meta[key])
            refs.append(rows)
            stds.append(noise.pointwise_std(rows.size))
        info["calibration"] = _coverage(pred.mean[0], pred.std[0], refs[0])
        info["extrapolation"] = _coverage(pred.mean[1], pred.std[1], refs[1])
        fit = read_json(ctx.path("frade_fit.json"))
        frade = ObservationOperator(ctx.initial, x, np.full(x.size, h.t_obs), ctx.u_mean, ctx.n_modes)(
            frade_eigenvalues(FradeParams(fit["alpha"], fit["nu"], ctx.u_mean), ctx.grid))
        peak = int(np.argmax(refs[0]))
        info["frade_peak_misfit_in_predictive_std"] = float(abs(frade[peak] - refs[0][peak]) / pred.std[0, peak])
        write_table(ctx.path("predictive.csv"), ["t", "x", "mean", "std", "lower", "upper", "data", "data_std"],
                    _predictive_rows(pred, refs, stds))
        plotting.plot_predictive(pred, ctx.path("predictive.png"), [(x, r) for r in refs])
    else:
        truth = ctx.truth_spectrum()
        times = sorted({*(float(t) for t in d.predictive_times),
                        *([ctx.config.data.t_obs] if obs.series_kind == "spatial" else [])})
        pred = posterior_predictive(chain, tail, ctx.initial, ctx.u_mean, times, x, d.n_predictive, ctx.n_modes)
        X, T = np.meshgrid(x, times)
        ref = ObservationOperator(ctx.initial, X.ravel(), T.ravel(), ctx.u_mean)(truth).reshape(X.shape)
        write_table(ctx.path("predictive.csv"), ["t", "x", "mean", "std", "lower", "upper", "data", "data_std"],
                    _predictive_rows(pred, ref))
        plotting.plot_predictive(pred, ctx.path("predictive.png"), [(x, r) for r in ref])
        info["min_lower_envelope"] = {f"{t:g}": float(pred.lower[i].min()) for i, t in enumerate(times)}
        if obs.series_kind == "time":
            tt = np.linspace(0.0, 2 * ctx.config.data.t_max, 101)
            series = posterior_predictive(chain, tail, ctx.initial, ctx.u_mean, tt, [ctx.config.data.x_obs],
                                          d.n_predictive, ctx.n_modes)
            write_table(ctx.path("predictive_series.csv"), ["t", "x", "mean", "std", "lower", "upper"],
                        ([t, ctx.config.data.x_obs, series.mean[i, 0], series.std[i, 0], series.lower[i, 0],
                          series.upper[i, 0]] for i, t in enumerate(tt)))
            man.add_artifact(ctx.path("predictive_series.csv"))
    man.add_artifact(ctx.path("predictive.csv"))
    man.add_figure(ctx.path("predictive.png"))
    return info


def _read_mean(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


STAGE_FUNCTIONS = {
    "generate": stage_generate,
    "sensitivity": stage_sensitivity,
    "optimize": stage_optimize,
    "sample": stage_sample,
    "diagnose": stage_diagnose,
}


def run_pipeline(config: RunConfig, root=None, stages=STAGES) -> dict:
    """Run ``stages`` in order; a failing stage raises :class:`StageError`."""
    ctx = RunContext(config, root if root is not None else config.out)
    results = {}
    for name in stages:
        results[name] = STAGE_FUNCTIONS[name](ctx)
    man = Manifest(ctx.root)
    results["numeric_hash"] = man.data.get("numeric_hash")
    return results
