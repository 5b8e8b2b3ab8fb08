"""Centralized benchmark, Monte Carlo evaluation and scenario sweeps."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import bcd, noiseless, robust, somp
from .channel import assemble_channel, draw_clusters, perturb_csi
from .model import SystemConfig, crandn, make_observation_model, psd_sqrt

log = logging.getLogger(__name__)

DESIGNS = ("noiseless", "digital", "hybrid", "robust", "robust-hybrid",
           "agnostic", "agnostic-hybrid")
CSI_DESIGNS = ("robust", "robust-hybrid", "agnostic", "agnostic-hybrid")
SWEEP_AXES = ("snr_ob_db", "snr_fc_db", "n_rf_node", "n_rf_fc", "n_nodes", "q", "sigma2_csi")
INT_AXES = ("n_rf_node", "n_rf_fc", "n_nodes", "q")
NOISE_PROFILES = ("homogeneous", "heterogeneous")
HETEROGENEOUS_DB = np.arange(-10, 10)


def centralized_benchmark(C):
    """``Tr[(I_q + C^H C)^-1]``: MSE with every observation available at the fusion center."""
    q = C.shape[1]
    return float(np.real(np.trace(np.linalg.inv(np.eye(q) + C.conj().T @ C))))


def scenario_benchmark(model):
    """Centralized benchmark for general ``R_n`` (observations whitened first)."""
    C_white, _ = noiseless.whitened_observations(model)
    return centralized_benchmark(np.vstack(C_white))


def monte_carlo_mse(transceiver, channel, model, trials, rng, sigma2_csi=0.0, batch=2048):
    """Simulate ``theta_hat = A y`` over the coherent MAC and average ``||theta_hat - theta||^2``.

    ``transceiver`` needs ``A`` and ``P_list`` (digital or hybrid). With
    ``sigma2_csi > 0`` each trial sees a fresh channel ``H_n + dH_n``,
    ``dH_n ~ CN(0, sigma2_csi)``, around the given ``channel``.
    Returns ``(mean, standard error)``.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    H_list = channel.H if hasattr(channel, "H") else channel
    A, P_list = transceiver.A, transceiver.P_list
    L_theta = psd_sqrt(model.R_theta)
    L_obs = [psd_sqrt(R) for R in model.R_list]
    L_w = psd_sqrt(model.R_w)
    q, n_rx = model.q, H_list[0].shape[0]
    errs = np.empty(trials)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        theta = crandn(rng, (b, q)) @ L_theta.T
        y = crandn(rng, (b, n_rx)) @ L_w.T
        for n, (H, P, C) in enumerate(zip(H_list, P_list, model.C_list)):
            x = theta @ C.T + crandn(rng, (b, C.shape[0])) @ L_obs[n].T
            s = x @ P.T
            if sigma2_csi > 0:
                Ht = H + crandn(rng, (b,) + H.shape, sigma2_csi)
                y += np.einsum("bij,bj->bi", Ht, s)
            else:
                y += s @ H.T
        errs[done:done + b] = np.sum(np.abs(y @ A.T - theta) ** 2, axis=1)
        done += b
    return float(errs.mean()), float(errs.std(ddof=1) / np.sqrt(trials))


@dataclass
class Scenario:
    config: SystemConfig
    design: str = "digital"
    sweep_axis: str = "snr_fc_db"
    sweep_values: tuple = (10.0,)
    noise_profile: str = "homogeneous"
    scenario_id: str = "scenario"
    realizations: int = 1

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {DESIGNS}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}; choose from {SWEEP_AXES}")
        if self.noise_profile not in NOISE_PROFILES:
            raise ValueError(f"unknown noise profile {self.noise_profile!r}")
        self.sweep_values = tuple(self.sweep_values)
        if not self.sweep_values:
            raise ValueError("sweep grid is empty")
        if self.sweep_axis == "snr_ob_db" and self.noise_profile == "heterogeneous":
            raise ValueError("snr_ob_db cannot be swept with heterogeneous observation noise")
        if self.sweep_axis == "sigma2_csi" and self.design not in CSI_DESIGNS:
            raise ValueError(f"design {self.design!r} does not use sigma2_csi")
        if self.design == "noiseless" and self.sweep_axis in ("snr_fc_db", "n_rf_fc"):
            raise ValueError(f"noiseless design cannot sweep {self.sweep_axis}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")


@dataclass
class ResultRow:
    scenario_id: str
    design: str
    sweep_axis: str
    sweep_value: float
    trials: int
    mse_analytic: float = float("nan")
    mse_mc: float = float("nan")
    mc_stderr: float = float("nan")
    benchmark: float = float("nan")
    wall_time_ms: float = float("nan")
    seed: int = 0
    error: str = ""


CSV_COLUMNS = [f.name for f in fields(ResultRow)]


def _scalar_or_error(values, name):
    if len(set(values)) != 1:
        raise ValueError(f"cannot change n_nodes with per-node {name} values")
    return values[0]


def config_at(config, axis, value):
    """Copy of ``config`` with one sweep axis set to ``value``."""
    if axis == "snr_ob_db":
        return replace(config, sigma2_obs=10.0 ** (-value / 10.0))
    if axis == "snr_fc_db":
        return replace(config, sigma2_fc=10.0 ** (-value / 10.0))
    if axis == "sigma2_csi":
        return replace(config, sigma2_csi=float(value))
    if axis == "n_nodes":
        return replace(config, n_nodes=int(value),
                       rho=_scalar_or_error(config.rho, "rho"),
                       sigma2_obs=_scalar_or_error(config.sigma2_obs, "sigma2_obs"))
    return replace(config, **{axis: int(value)})


def point_seed(seed, index):
    """Per-grid-point seed mixed from the scenario seed and the point index."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@dataclass
class PointResult:
    mse_analytic: float
    mse_mc: float
    mc_stderr: float
    benchmark: float
    extras: dict = field(default_factory=dict)


def draw_scenario(config, rng, noise_profile="homogeneous"):
    """Per-node noise levels (heterogeneous profile), observation model and channel."""
    if noise_profile == "heterogeneous":
        db = rng.choice(HETEROGENEOUS_DB, size=config.n_nodes)
        config = replace(config, sigma2_obs=10.0 ** (db / 10.0))
    model = make_observation_model(config, rng)
    clusters = draw_clusters(config, rng)
    return config, model, clusters, assemble_channel(clusters, config)


def point_rngs(seed, index, realizations):
    """Generators ``(draw, csi, init, mc)`` for each realization of grid point ``index``.

    The draw, CSI-error and initialization streams depend only on the
    scenario seed and the realization, so every grid point of a sweep sees
    the same channels and starting points (common random numbers). The
    Monte Carlo stream comes from the per-point seed.
    """
    mc_seed = point_seed(seed, index)
    for r in range(realizations):
        shared = np.random.SeedSequence([seed, r]).spawn(3)
        mc = np.random.SeedSequence([mc_seed, r])
        yield [np.random.default_rng(s) for s in shared] + [np.random.default_rng(mc)]


def benchmark_at(scenario, index, value):
    """Centralized benchmark of a grid point, from the same draws :func:`run_scenario` uses."""
    config = config_at(scenario.config, scenario.sweep_axis, value)
    vals = []
    for rng_draw, *_ in point_rngs(config.seed, index, scenario.realizations):
        vals.append(scenario_benchmark(draw_scenario(config, rng_draw, scenario.noise_profile)[1]))
    return float(np.mean(vals))


def evaluate_design(design, config, rng_draw, rng_csi, rng_init, rng_mc, noise_profile="homogeneous",
                    trials=None):
    """Draw one scenario realization, design the transceiver and score it."""
    if design == "noiseless":
        config = replace(config, n_rf_fc=config.n_rf_node)
    trials = config.trials if trials is None else trials
    config, model, clusters, channel = draw_scenario(config, rng_draw, noise_profile)
    benchmark = scenario_benchmark(model)

    if design == "noiseless":
        model0 = noiseless.noiseless_model(model)
        tx, E = noiseless.noiseless_design(clusters, channel.H, model0, config)
        analytic = float(np.real(np.trace(E)))
        mc = monte_carlo_mse(tx, channel.H, model0, trials, rng_mc)
        return PointResult(analytic, *mc, benchmark)

    if design in ("digital", "hybrid"):
        tx, trace = bcd.bcd_design(channel.H, model, config, rng_init)
        if design == "hybrid":
            tx = somp.hybridize(tx.P_list, channel, channel.H, model,
                                config.n_rf_node, config.n_rf_fc)
        analytic = bcd.mse_analytic(tx.A, tx.P_list, channel.H, model)
        mc = monte_carlo_mse(tx, channel.H, model, trials, rng_mc)
        return PointResult(analytic, *mc, benchmark, {"bcd_iterations": trace.iterations})

    csi = perturb_csi(channel, config.sigma2_csi, rng_csi)
    ctx = robust.RobustContext(csi.H_hat, config.sigma2_csi, model)
    if design.startswith("robust"):
        tx, trace = robust.robust_bcd_design(ctx, config, rng_init)
        design_sigma2 = config.sigma2_csi
    else:
        tx, trace = robust.agnostic_bcd_design(ctx, config, rng_init)
        design_sigma2 = 0.0
    if design.endswith("hybrid"):
        tx = somp.hybridize(tx.P_list, channel, csi.H_hat, model,
                            config.n_rf_node, config.n_rf_fc, design_sigma2)
    analytic = robust.robust_mse(tx.A, tx.P_list, ctx)
    mc = monte_carlo_mse(tx, csi.H_hat, model, trials, rng_mc, sigma2_csi=config.sigma2_csi)
    return PointResult(analytic, *mc, benchmark, {"bcd_iterations": trace.iterations})


def run_point(scenario, index, value, trials=None):
    config = config_at(scenario.config, scenario.sweep_axis, value)
    seed = point_seed(config.seed, index)
    results = []
    for rngs in point_rngs(config.seed, index, scenario.realizations):
        results.append(evaluate_design(scenario.design, config, *rngs,
                                       noise_profile=scenario.noise_profile, trials=trials))
    R = len(results)
    return seed, PointResult(
        float(np.mean([r.mse_analytic for r in results])),
        float(np.mean([r.mse_mc for r in results])),
        float(np.sqrt(np.sum([r.mc_stderr ** 2 for r in results])) / R),
        float(np.mean([r.benchmark for r in results])),
    )


def run_scenario(scenario, trials=None):
    """One result row per grid point; failures are recorded in the row's ``error`` field."""
    rows = []
    for index, value in enumerate(scenario.sweep_values):
        row = ResultRow(scenario.scenario_id, scenario.design, scenario.sweep_axis, value,
                        trials if trials is not None else scenario.config.trials)
        start = time.perf_counter()
        try:
            row.seed, res = run_point(scenario, index, value, trials)
            row.mse_analytic, row.mse_mc = res.mse_analytic, res.mse_mc
            row.mc_stderr, row.benchmark = res.mc_stderr, res.benchmark
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            row.seed = point_seed(scenario.config.seed, index)
            row.error = f"{type(exc).__name__}: {exc}"
            log.warning("%s point %s=%s failed: %s", scenario.scenario_id,
                        scenario.sweep_axis, value, row.error)
        row.wall_time_ms = 1e3 * (time.perf_counter() - start)
        rows.append(row)
    return rows


def run_sweep(scenario, outer_axes, trials=None):
    """Cartesian sweep: ``outer_axes`` is a list of ``(axis, values)`` fixed per inner sweep."""
    if not outer_axes:
        return run_scenario(scenario, trials)
    (axis, values), rest = outer_axes[0], outer_axes[1:]
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    rows = []
    for v in values:
        sub = replace(scenario, config=config_at(scenario.config, axis, v),
                      scenario_id=f"{scenario.scenario_id}[{axis}={_fmt(v)}]")
        rows.extend(run_sweep(sub, rest, trials))
    return rows


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) or float(v).is_integer():
        return str(int(v)) if abs(v) < 2 ** 53 else repr(float(v))
    return repr(float(v))


def _cell(v, name, timing):
    if name == "wall_time_ms" and not timing:
        return ""
    if isinstance(v, float) and np.isnan(v):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, timing=False):
    """CSV text with a fixed column order. Wall times are blank unless ``timing``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        w.writerow([_cell(d[c], c, timing) for c in CSV_COLUMNS])
    return buf.getvalue()


def scenario_to_dict(scenario):
    d = asdict(scenario)
    d["sweep_values"] = list(scenario.sweep_values)
    d["config"]["rho"] = list(scenario.config.rho)
    d["config"]["sigma2_obs"] = list(scenario.config.sigma2_obs)
    return d
