"""Hybrid transceiver for a noiseless fusion center.

RF stages take the dominant array-response vectors (largest path gains).
The baseband precoders then shape the effective channel so that its row
space matches the dominant left singular vectors of the stacked
observation matrix, which attains

    MSE = (q - r) + sum_{k<=r} 1 / (1 + lambda_k(C C^H))   for r < q
    MSE = sum_{k<=q} 1 / (1 + lambda_k(C C^H))             for r >= q

with ``r`` RF chains and ``lambda_k`` sorted in decreasing order. No RF
chains beyond ``q`` help.

Throughout this module ``R_theta = I`` and ``R_n = I``; scenarios with
``R_n = s_n^2 I`` are handled by whitening (see :func:`noiseless_design`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import array_response_matrix
from .model import ObservationModel
from .somp import HybridTransceiver

PINV_RTOL = 1e-10


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass
class RfSelection:
    node_columns: list
    fc_columns: list
    P_RF: list
    A_RF: np.ndarray


def _top_indices(scores, count):
    if count > len(scores):
        raise ValueError(f"requested {count} RF chains but only {len(scores)} clusters exist")
    order = np.argsort(-np.asarray(scores), kind="stable")
    return [int(i) for i in order[:count]]


def select_rf_precoder(clusters, n, n_rf_node, n_tx):
    """Columns of ``A_s,n`` with the ``n_rf_node`` largest ``|alpha_k,n|``, strongest first."""
    cols = _top_indices(np.abs(clusters.alphas[n]), n_rf_node)
    A_s = array_response_matrix(clusters.aod[n], n_tx, clusters.d_over_lambda_tx)
    return cols, A_s[:, cols]


def select_rf_combiner(clusters, n_rf_fc, n_rx):
    """Columns of ``A_FC`` ranked by the per-cluster gain sum ``sum_n |alpha_k,n|``."""
    cols = _top_indices(np.abs(clusters.alphas).sum(axis=0), n_rf_fc)
    A_FC = array_response_matrix(clusters.aoa, n_rx, clusters.d_over_lambda_rx)
    return cols, A_FC[:, cols]


def select_rf(clusters, config):
    node_cols, P_RF = [], []
    for n in range(clusters.n_nodes):
        cols, rf = select_rf_precoder(clusters, n, config.n_rf_node, config.n_tx)
        node_cols.append(cols)
        P_RF.append(rf)
    fc_cols, A_RF = select_rf_combiner(clusters, config.n_rf_fc, config.n_rx)
    return RfSelection(node_cols, fc_cols, P_RF, A_RF)


def optimal_effective_channel(C, r):
    """``H_opt = U_C[:, :r]^H``: unit singular values, right singular vectors matched to ``C``."""
    if r > C.shape[0]:
        raise ValueError(f"{r} RF chains exceed the {C.shape[0]} stacked observations")
    U_C = np.linalg.svd(C, full_matrices=True)[0]
    return U_C[:, :r].conj().T


def design_bb_precoders(H_list, rf, C, n_obs):
    """Baseband precoders ``P_BB,n = pinv(A_RF^H H_n P_RF,n) H_opt[:, node n]``."""
    r = rf.A_RF.shape[1]
    if any(P.shape[1] != r for P in rf.P_RF):
        raise ValueError("noiseless design needs the same RF chain count at the nodes and the FC")
    H_opt = optimal_effective_channel(C, r)
    P_BB = []
    for n, (H, P_RF) in enumerate(zip(H_list, rf.P_RF)):
        H_bar = rf.A_RF.conj().T @ H @ P_RF
        s = np.linalg.svd(H_bar, compute_uv=False)
        if s[0] == 0 or s[-1] < PINV_RTOL * s[0]:
            raise RankDeficientError(f"node {n}: effective channel is rank deficient")
        P_BB.append(np.linalg.pinv(H_bar, rcond=PINV_RTOL) @ H_opt[:, n * n_obs:(n + 1) * n_obs])
    return P_BB


def lmmse_after_rf(A_RF, P_list, H_list, model):
    """LMMSE baseband combiner on ``z = A_RF^H y`` and its error covariance.

    Returns ``(A_BB, E)`` with ``A_BB^H = R_theta G^H Cov(z)^+``.
    """
    G = sum(A_RF.conj().T @ H @ P @ C for H, P, C in zip(H_list, P_list, model.C_list))
    cov = G @ model.R_theta @ G.conj().T + A_RF.conj().T @ model.R_w @ A_RF
    for H, P, Rn in zip(H_list, P_list, model.R_list):
        M = A_RF.conj().T @ H @ P
        cov = cov + M @ Rn @ M.conj().T
    cov = (cov + cov.conj().T) / 2
    A_BB_H = model.R_theta @ G.conj().T @ np.linalg.pinv(cov, rcond=PINV_RTOL, hermitian=True)
    E = model.R_theta - A_BB_H @ G @ model.R_theta
    return A_BB_H.conj().T, (E + E.conj().T) / 2


def noiseless_mse(C, n_rf_node, q):
    """Attained MSE as a function of the number of RF chains."""
    if n_rf_node < 1:
        raise ValueError("n_rf_node must be >= 1")
    lam = np.sort(np.linalg.eigvalsh(C @ C.conj().T))[::-1]
    lam = np.concatenate([np.clip(lam, 0.0, None), np.zeros(max(q - lam.size, 0))])
    r = min(n_rf_node, q)
    return float((q - r) + np.sum(1.0 / (1.0 + lam[:r])))


def whitened_observations(model):
    """``C_n`` scaled by ``R_n^(-1/2)`` so the observation noise becomes white with unit variance."""
    if not np.allclose(model.R_theta, np.eye(model.q)):
        raise ValueError("noiseless design assumes R_theta = I")
    W = []
    for n, R in enumerate(model.R_list):
        w, U = np.linalg.eigh(R)
        if w.min() <= 0:
            raise ValueError(f"node {n}: observation noise covariance must be positive definite")
        W.append((U / np.sqrt(w)) @ U.conj().T)
    return [Wn @ C for Wn, C in zip(W, model.C_list)], W


def noiseless_design(clusters, H_list, model, config):
    """End-to-end noiseless-FC design returning the hybrid transceiver and its error covariance.

    ``model.R_w`` should be zero. The baseband precoders are designed for the
    whitened observations and mapped back, ``P_BB,n <- P_BB,n R_n^(-1/2)``.
    """
    rf = select_rf(clusters, config)
    C_white, W = whitened_observations(model)
    P_BB = design_bb_precoders(H_list, rf, np.vstack(C_white), config.n_obs)
    P_BB = [bb @ Wn for bb, Wn in zip(P_BB, W)]
    P_list = [r @ b for r, b in zip(rf.P_RF, P_BB)]
    A_BB, E = lmmse_after_rf(rf.A_RF, P_list, H_list, model)
    return HybridTransceiver(rf.P_RF, P_BB, rf.A_RF, A_BB), E


def noiseless_model(model):
    """Copy of ``model`` with the fusion-center noise removed."""
    return ObservationModel(model.C_list, model.R_list, model.R_theta, np.zeros_like(model.R_w))
