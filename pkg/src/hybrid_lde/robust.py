"""Transceiver design under Gaussian channel-estimation error.

The true channel is ``H_n = H_hat_n + dH_n`` with i.i.d. ``CN(0, sigma2_csi)``
error entries, independent across nodes. Averaging the MSE over the
error uses

    E[H K K^H H^H]     = H_hat K K^H H_hat^H + sigma2_csi Tr(K K^H) I
    E[H_n K K^H H_j^H] = H_hat_n K K^H H_hat_j^H        (n != j)

which adds ``sigma2_csi * sum_n Tr[P_n S_n P_n^H] * A A^H`` to the MSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bcd
from .model import ObservationModel, crandn


@dataclass
class RobustContext:
    H_hat_list: list
    sigma2_csi: float
    model: ObservationModel

    def __post_init__(self):
        if self.sigma2_csi < 0:
            raise ValueError("sigma2_csi must be >= 0")


def robust_mse(A, P_list, ctx):
    """MSE averaged over the channel error, given the estimates in ``ctx``."""
    return bcd.mse_analytic(A, P_list, ctx.H_hat_list, ctx.model, ctx.sigma2_csi)


def robust_update_combiner(P_list, ctx):
    return bcd.update_combiner(P_list, ctx.H_hat_list, ctx.model, ctx.sigma2_csi)


def robust_update_precoder(n, A, P_list, lambda_n, ctx):
    return bcd.update_precoder(n, A, P_list, lambda_n, ctx.H_hat_list, ctx.model, ctx.sigma2_csi)


def robust_solve_dual(n, A, P_list, ctx, rho_n):
    return bcd.solve_dual(n, A, P_list, ctx.H_hat_list, ctx.model, rho_n, ctx.sigma2_csi)


def robust_received_covariance(P_list, ctx):
    return bcd.received_covariance(P_list, ctx.H_hat_list, ctx.model, ctx.sigma2_csi)


def robust_bcd_design(ctx, config, init_rng):
    """BCD on the averaged MSE; power budgets are unchanged by the channel error."""
    return bcd.run_bcd(ctx.H_hat_list, ctx.model, config.rho, config.bcd.i_max,
                       config.bcd.epsilon, init_rng, sigma2_csi=ctx.sigma2_csi)


def agnostic_bcd_design(ctx, config, init_rng):
    """Design that treats the estimates as exact (ignores ``sigma2_csi``)."""
    return bcd.run_bcd(ctx.H_hat_list, ctx.model, config.rho, config.bcd.i_max,
                       config.bcd.epsilon, init_rng)


def lemma1_rhs(H_hat, sigma2_csi, K_mat, H_hat_other=None):
    """Closed-form expectation of ``H K K^H H^H`` (or ``H_n K K^H H_j^H`` with independent errors)."""
    KK = K_mat @ K_mat.conj().T
    if H_hat_other is not None:
        return H_hat @ KK @ H_hat_other.conj().T
    return H_hat @ KK @ H_hat.conj().T + sigma2_csi * np.real(np.trace(KK)) * np.eye(H_hat.shape[0])


def lemma1_lhs_mc(H_hat, sigma2_csi, K_mat, trials, rng, H_hat_other=None, return_stderr=False,
                  batch=4096):
    """Sample mean of ``H K K^H H^H`` over ``trials`` error draws.

    With ``H_hat_other`` the second factor uses an independent error draw
    around that estimate. ``return_stderr`` also gives the Frobenius norm of
    the entrywise standard error of the mean.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    second = H_hat if H_hat_other is None else H_hat_other
    total = np.zeros((H_hat.shape[0], second.shape[0]), dtype=complex)
    total_sq = np.zeros(total.shape)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        H1 = H_hat + crandn(rng, (b,) + H_hat.shape, sigma2_csi)
        if H_hat_other is None:
            H2 = H1
        else:
            H2 = second + crandn(rng, (b,) + second.shape, sigma2_csi)
        M1 = H1 @ K_mat
        M2 = H2 @ K_mat
        samples = M1 @ np.conj(np.swapaxes(M2, -1, -2))
        total += samples.sum(axis=0)
        total_sq += (np.abs(samples) ** 2).sum(axis=0)
        done += b
    mean = total / trials
    if not return_stderr:
        return mean
    var = np.clip(total_sq / trials - np.abs(mean) ** 2, 0.0, None) * trials / max(trials - 1, 1)
    return mean, float(np.sqrt(np.sum(var / trials)))
