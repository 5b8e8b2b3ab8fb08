"""Seeded invariant suite behind ``hybrid-lde validate``.

Each check draws small random instances from a fixed seed and compares a
module's output against an independent computation (explicit loops,
eigendecompositions, Monte Carlo, finite differences). Every design MSE
evaluated along the way is also compared against the centralized
benchmark, which no linear transceiver can beat.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import bcd, bench, noiseless, robust, somp
from .channel import assemble_channel, channel_sum_form, draw_clusters, perturb_csi
from .model import (SystemConfig, crandn, make_observation_model, observe, stack_model,
                    transmit_power)

log = logging.getLogger(__name__)

FLOOR_SLACK = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    floor_records: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        out = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<34} {c.seconds:6.2f}s  {c.detail}"
               for c in self.checks]
        n_fail = sum(not c.passed for c in self.checks)
        out.append(f"{len(self.checks) - n_fail}/{len(self.checks)} checks passed")
        return out


class _Floor:
    """Collects ``(label, mse, benchmark)`` for every evaluated design."""

    def __init__(self):
        self.records = []

    def add(self, label, mse, model):
        self.records.append((label, float(mse), bench.scenario_benchmark(model)))


def _scenario(config, seed):
    rng = np.random.default_rng(seed)
    model = make_observation_model(config, rng)
    clusters = draw_clusters(config, rng)
    return model, clusters, assemble_channel(clusters, config), rng


def lagrangian_gradient(A, P_list, lambdas, H_list, model, step=1e-6):
    """Largest central-difference partial of ``MSE + sum_n lam_n (power_n - rho_n)``.

    Derivatives are taken along the real and imaginary parts of every entry
    of ``A`` and of each ``P_n``.
    """
    def lagrangian(A_, P_):
        value = bcd.mse_analytic(A_, P_, H_list, model)
        for n, (P, lam) in enumerate(zip(P_, lambdas)):
            value += lam * transmit_power(P, model.C_list[n], model.R_theta, model.R_list[n])
        return value

    worst = 0.0
    blocks = [None] + list(range(len(P_list)))
    for n in blocks:
        M = A if n is None else P_list[n]
        for idx in np.ndindex(M.shape):
            for direction in (1.0, 1j):
                vals = []
                for sign in (1.0, -1.0):
                    Mp = M.copy()
                    Mp[idx] += sign * step * direction
                    if n is None:
                        vals.append(lagrangian(Mp, P_list))
                    else:
                        vals.append(lagrangian(A, P_list[:n] + [Mp] + P_list[n + 1:]))
                worst = max(worst, abs(vals[0] - vals[1]) / (2 * step))
    return worst


def dual_power_grid(system, grid):
    """Transmit power of the node precoder at every dual value in ``grid`` (vectorized)."""
    d = system.eigvals[None, :] + np.asarray(grid)[:, None]
    safe = np.where(d > 0, d, 1.0)
    return np.sum(np.where(d > 0, system.z / safe ** 2, 0.0), axis=1)


# -- model-core -------------------------------------------------------------

def check_stacking(floor):
    rng = np.random.default_rng(11)
    C = [crandn(rng, (2, 3)) for _ in range(4)]
    H = [crandn(rng, (6, 5)) for _ in range(4)]
    P = [crandn(rng, (5, 2)) for _ in range(4)]
    st = stack_model(C, H, P)
    loop = sum(H[n] @ P[n] @ C[n] for n in range(4))
    err = np.max(np.abs(st.H @ st.P @ st.C - loop))
    return err < 1e-12, f"|H P C - sum_n H_n P_n C_n| = {err:.1e}"


def check_power_unitary_invariance(floor):
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        C, P = crandn(rng, (3, 4)), crandn(rng, (6, 3))
        U = np.linalg.qr(crandn(rng, (6, 6)))[0]
        base = transmit_power(P, C, np.eye(4), 0.5 * np.eye(3))
        worst = max(worst, abs(transmit_power(U @ P, C, np.eye(4), 0.5 * np.eye(3)) - base))
    return worst < 1e-10, f"max change {worst:.1e}"


def check_observation_statistics(floor):
    config = SystemConfig(n_nodes=2, q=2, n_obs=3, sigma2_obs=[0.5, 2.0])
    model = make_observation_model(config, np.random.default_rng(13))
    rng = np.random.default_rng(14)
    theta = crandn(rng, 2)
    a = observe(model, 1, theta, np.random.default_rng(5))
    b = observe(model, 1, theta, np.random.default_rng(5))
    noise = np.array([observe(model, 1, theta, rng) - model.C_list[1] @ theta
                      for _ in range(20000)])
    cov = noise.T @ noise.conj() / len(noise)
    err = np.max(np.abs(cov - model.R_list[1]))
    ok = np.array_equal(a, b) and err < 0.1
    return ok, f"reproducible={np.array_equal(a, b)}, sample-cov error {err:.3f}"


# -- channel ----------------------------------------------------------------

def check_channel_forms(floor):
    config = SystemConfig(n_nodes=4, n_tx=6, n_rx=8, n_clusters=4)
    clusters = draw_clusters(config, np.random.default_rng(21))
    ch = assemble_channel(clusters, config)
    err = max(np.max(np.abs(ch.H[n] - channel_sum_form(clusters, config, n))) for n in range(4))
    modulus = np.abs(ch.A_FC) * np.sqrt(config.n_rx)
    rank_ok = all(np.linalg.matrix_rank(H) <= config.n_clusters for H in ch.H)
    ok = err < 1e-12 and np.allclose(modulus, 1.0) and rank_ok
    return ok, f"compact vs sum form {err:.1e}, constant modulus, rank <= K"


def check_channel_determinism(floor):
    config = SystemConfig(n_nodes=3)
    a = draw_clusters(config, np.random.default_rng(22))
    b = draw_clusters(config, np.random.default_rng(22))
    ok = all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("alphas", "aoa", "aod"))
    return ok, "same seed, same clusters"


# -- noiseless-design -------------------------------------------------------

def check_noiseless_law(floor):
    rng = np.random.default_rng(31)
    worst_flat = 0.0
    monotone = True
    for _ in range(20):
        C = crandn(rng, (12, 4))
        mses = [noiseless.noiseless_mse(C, r, 4) for r in range(1, 7)]
        monotone &= all(b <= a + 1e-12 for a, b in zip(mses, mses[1:]))
        worst_flat = max(worst_flat, max(abs(m - bench.centralized_benchmark(C)) for m in mses[3:]))
    return monotone and worst_flat < 1e-8, f"non-increasing, saturation gap {worst_flat:.1e}"


def check_noiseless_pipeline(floor):
    worst = 0.0
    for seed in range(5):
        config = SystemConfig(n_nodes=5, n_tx=5, n_rx=5, n_clusters=5, q=3,
                              n_rf_node=3, n_rf_fc=3, sigma2_obs=0.5)
        model, clusters, ch, _ = _scenario(config, 300 + seed)
        model0 = noiseless.noiseless_model(model)
        _, E = noiseless.noiseless_design(clusters, ch.H, model0, config)
        C_white, _ = noiseless.whitened_observations(model)
        law = noiseless.noiseless_mse(np.vstack(C_white), 3, 3)
        mse = float(np.real(np.trace(E)))
        floor.add(f"noiseless seed {seed}", mse, model)
        worst = max(worst, abs(mse - law))
    return worst < 1e-6, f"Tr(E) vs closed form {worst:.1e}"


# -- digital-bcd ------------------------------------------------------------

def check_bcd_descent(floor):
    worst = -np.inf
    for seed in range(4):
        config = SystemConfig(n_nodes=10, sigma2_fc=10 ** (-seed / 2))
        model, _, ch, rng = _scenario(config, 400 + seed)
        tx, trace = bcd.bcd_design(ch.H, model, config, rng)
        worst = max(worst, np.max(np.diff(trace.mse_per_iter)))
        floor.add(f"digital seed {seed}", bcd.mse_analytic(tx.A, tx.P_list, ch.H, model), model)
    return worst <= 1e-9, f"largest per-iteration increase {worst:.1e}"


def check_combiner_optimal(floor):
    config = SystemConfig(n_nodes=4)
    model, _, ch, rng = _scenario(config, 41)
    P = bcd.random_precoders(model, config.n_tx, config.rho, rng)
    A = bcd.update_combiner(P, ch.H, model)
    base = bcd.mse_analytic(A, P, ch.H, model)
    better = sum(bcd.mse_analytic(A + 1e-3 * crandn(rng, A.shape), P, ch.H, model) < base - 1e-13
                 for _ in range(50))
    return better == 0, f"{better}/50 perturbations improved the combiner"


def check_dual_bisection(floor):
    worst_power = 0.0
    worst_grid = 0.0
    for seed in range(5):
        config = SystemConfig(n_nodes=3, rho=0.05)
        model, _, ch, rng = _scenario(config, 420 + seed)
        P = bcd.random_precoders(model, config.n_tx, config.rho, rng)
        A = bcd.update_combiner(P, ch.H, model)
        system = bcd._precoder_system(0, A, P, ch.H, model)
        lam = bcd.solve_dual(0, A, P, ch.H, model, 0.05)
        power = transmit_power(system.precoder(lam), model.C_list[0], model.R_theta, model.R_list[0])
        worst_power = max(worst_power, abs(power - 0.05) / 0.05)
        grid = np.linspace(0.0, 4 * lam, 10 ** 5 + 1)
        gap = np.abs(dual_power_grid(system, grid) - 0.05)
        worst_grid = max(worst_grid, abs(grid[np.argmin(gap)] - lam) / (grid[1] - grid[0]))
    return worst_power < 1e-8 and worst_grid <= 1.0, \
        f"power rel. error {worst_power:.1e}, |lam - grid| {worst_grid:.2f} grid steps"


def check_kkt(floor):
    config = SystemConfig(n_nodes=3, sigma2_fc=10.0, bcd={"i_max": 2000, "epsilon": 1e-12})
    model, _, ch, rng = _scenario(config, 43)
    tx, _ = bcd.bcd_design(ch.H, model, config, rng)
    A = bcd.update_combiner(tx.P_list, ch.H, model)
    power = [transmit_power(P, model.C_list[n], model.R_theta, model.R_list[n])
             for n, P in enumerate(tx.P_list)]
    slack = max(abs(lam * (p - r)) for lam, p, r in zip(tx.lambdas, power, config.rho))
    grad = lagrangian_gradient(A, tx.P_list, tx.lambdas, ch.H, model)
    ok = (max(p - r for p, r in zip(power, config.rho)) <= 1e-6 and min(tx.lambdas) >= 0
          and slack < 1e-6 and grad < 1e-4)
    return ok, f"comp. slackness {slack:.1e}, gradient {grad:.1e}"


# -- robust-design ----------------------------------------------------------

def check_robust_degeneracy(floor):
    config = SystemConfig(n_nodes=5, bcd={"i_max": 10})
    model, _, ch, _ = _scenario(config, 51)
    ctx = robust.RobustContext(ch.H, 0.0, model)
    tx_r, tr_r = robust.robust_bcd_design(ctx, config, np.random.default_rng(9))
    tx_d, tr_d = bcd.bcd_design(ch.H, model, config, np.random.default_rng(9))
    same = tr_r.mse_per_iter == tr_d.mse_per_iter and np.array_equal(tx_r.A, tx_d.A)
    return same, "sigma2_csi = 0 reproduces the perfect-CSI trace exactly"


def check_expectation_identity(floor):
    rng = np.random.default_rng(52)
    worst = 0.0
    for _ in range(2):
        H_hat, H_other, K = crandn(rng, (4, 3)), crandn(rng, (4, 3)), crandn(rng, (3, 2))
        s2 = rng.uniform(0.05, 0.5)
        mc, se = robust.lemma1_lhs_mc(H_hat, s2, K, 20000, rng, return_stderr=True)
        worst = max(worst, np.linalg.norm(mc - robust.lemma1_rhs(H_hat, s2, K)) / se)
        mc, se = robust.lemma1_lhs_mc(H_hat, s2, K, 20000, rng, H_other, return_stderr=True)
        worst = max(worst, np.linalg.norm(mc - robust.lemma1_rhs(H_hat, s2, K, H_other)) / se)
    return worst < 3.0, f"worst deviation {worst:.2f} stderr"


def check_robust_dominance(floor):
    wins = 0
    total = 0
    for seed in range(4):
        config = SystemConfig(n_nodes=8, sigma2_csi=0.05)
        model, _, ch, rng = _scenario(config, 530 + seed)
        csi = perturb_csi(ch, config.sigma2_csi, rng)
        ctx = robust.RobustContext(csi.H_hat, config.sigma2_csi, model)
        tx_r, _ = robust.robust_bcd_design(ctx, config, np.random.default_rng(seed))
        tx_a, _ = robust.agnostic_bcd_design(ctx, config, np.random.default_rng(seed))
        m_r = robust.robust_mse(tx_r.A, tx_r.P_list, ctx)
        m_a = robust.robust_mse(tx_a.A, tx_a.P_list, ctx)
        floor.add(f"robust seed {seed}", m_r, model)
        floor.add(f"agnostic seed {seed}", m_a, model)
        wins += m_r <= m_a
        total += 1
    return wins >= total - 1, f"robust <= agnostic on {wins}/{total} seeds"


# -- hybrid-somp ------------------------------------------------------------

def check_somp_exact(floor):
    config = SystemConfig(n_nodes=5)
    model, _, ch, rng = _scenario(config, 61)
    tx, _ = bcd.bcd_design(ch.H, model, config, rng)
    worst = 0.0
    for P, A_s in zip(tx.P_list, ch.A_s):
        rf, bb = somp.hybrid_precoder(P, A_s, config.n_clusters)
        worst = max(worst, np.linalg.norm(P - rf @ bb) / np.linalg.norm(P))
    hyb = somp.hybridize(tx.P_list, ch, ch.H, model, config.n_rf_node, config.n_rf_fc)
    floor.add("hybrid n_rf = K", bcd.mse_analytic(hyb.A, hyb.P_list, ch.H, model), model)
    return worst < 1e-8, f"relative residual {worst:.1e}"


def check_somp_greedy(floor):
    """A one-column SOMP pick is the best single column (exhaustive search)."""
    rng = np.random.default_rng(62)
    agree = 0
    for _ in range(10):
        D = np.linalg.qr(crandn(rng, (6, 6)))[0]
        T = crandn(rng, (6, 2))
        best = min(range(6), key=lambda k: np.linalg.norm(
            T - D[:, [k]] @ np.linalg.lstsq(D[:, [k]], T, rcond=None)[0]))
        agree += somp.somp_factorize(T, D, 1).columns == [best]
    D = np.linalg.qr(crandn(rng, (6, 6)))[0]
    T = D[:, [1, 4]] @ crandn(rng, (2, 3))
    res = somp.somp_factorize(T, D, 2)
    exact = sorted(res.columns) == [1, 4] and res.residual_norm < 1e-10
    return agree == 10 and exact, f"best single column {agree}/10, exact support recovery {exact}"


# -- bench ------------------------------------------------------------------

def check_benchmark_oracle(floor):
    rng = np.random.default_rng(71)
    worst = 0.0
    for _ in range(10):
        C = crandn(rng, (8, 3))
        lam = np.linalg.eigvalsh(C.conj().T @ C)
        worst = max(worst, abs(bench.centralized_benchmark(C) - np.sum(1 / (1 + lam))))
    ok = worst < 1e-10 and bench.centralized_benchmark(np.zeros((4, 3))) == 3.0
    return ok, f"eigen oracle {worst:.1e}"


def check_monte_carlo(floor):
    worst = 0.0
    for seed, design in enumerate(("digital", "hybrid", "noiseless", "robust")):
        config = SystemConfig(n_nodes=6, n_rf_node=3, n_rf_fc=3, sigma2_csi=0.05, seed=seed)
        rngs = [np.random.default_rng(720 + 4 * seed + i) for i in range(4)]
        res = bench.evaluate_design(design, config, *rngs, trials=10000)
        floor.records.append((f"{design} (run)", res.mse_analytic, res.benchmark))
        worst = max(worst, abs(res.mse_mc - res.mse_analytic) / res.mc_stderr)
    return worst < 5.0, f"worst |MC - analytic| {worst:.2f} stderr"


def check_determinism(floor):
    config = SystemConfig(n_nodes=4, trials=500, seed=3)
    sc = bench.Scenario(config, "hybrid", "n_rf_node", (2, 4), scenario_id="det")
    a = bench.rows_to_csv(bench.run_scenario(sc))
    b = bench.rows_to_csv(bench.run_scenario(sc))
    return a == b, "byte-identical CSV"


CHECKS = [
    ("model: stacking", check_stacking),
    ("model: power unitary invariance", check_power_unitary_invariance),
    ("model: observation statistics", check_observation_statistics),
    ("channel: compact vs sum form", check_channel_forms),
    ("channel: determinism", check_channel_determinism),
    ("noiseless: piecewise law", check_noiseless_law),
    ("noiseless: end-to-end pipeline", check_noiseless_pipeline),
    ("bcd: monotone descent", check_bcd_descent),
    ("bcd: combiner optimality", check_combiner_optimal),
    ("bcd: dual bisection", check_dual_bisection),
    ("bcd: KKT conditions", check_kkt),
    ("robust: zero-error degeneracy", check_robust_degeneracy),
    ("robust: expectation identity", check_expectation_identity),
    ("robust: dominance over agnostic", check_robust_dominance),
    ("somp: exact at n_rf = K", check_somp_exact),
    ("somp: greedy selection", check_somp_greedy),
    ("bench: benchmark oracle", check_benchmark_oracle),
    ("bench: Monte Carlo agreement", check_monte_carlo),
    ("bench: determinism", check_determinism),
]


def _run_check(name, fn, floor):
    start = time.perf_counter()
    try:
        ok, detail = fn(floor)
    except Exception as exc:        # a crashing check is a failed check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - start)


def validate(checks=None):
    """Run the invariant suite and the centralized-floor check over everything it evaluated."""
    floor = _Floor()
    report = ValidationReport()
    for name, fn in (CHECKS if checks is None else checks):
        report.checks.append(_run_check(name, fn, floor))
        log.info("%s: %s", name, "pass" if report.checks[-1].passed else "FAIL")
    report.floor_records = floor.records
    if floor.records:
        gaps = [(mse - b, label) for label, mse, b in floor.records]
        gap, label = min(gaps)
        report.checks.append(CheckResult(
            "bench: centralized floor", gap >= -FLOOR_SLACK,
            f"{len(gaps)} designs, smallest MSE - benchmark {gap:.2e} ({label})"))
    return report
