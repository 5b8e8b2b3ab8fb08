"""Hybrid (RF + baseband) factorization of fully-digital transceivers.

The MMSE precoder of node ``n`` lies in the column space of its transmit
array-response matrix ``A_s,n``, and the MMSE combiner (as ``A^H``) lies in
the column space of ``A_FC``. Both are therefore factored by simultaneous
orthogonal matching pursuit (SOMP) over those dictionaries, whose entries
already have the constant modulus the phase-shifter network requires.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bcd
from .bcd import SingularSystemError
from .model import psd_sqrt

received_covariance = bcd.received_covariance

RANK_RTOL = 1e-10


@dataclass
class SompResult:
    columns: list
    coeffs: np.ndarray
    residual_norm: float
    residual_history: list = field(default_factory=list)


def somp_factorize(target, dictionary, k, weight=None, rescale=False):
    """Greedy ``k``-column approximation ``target ~ dictionary[:, cols] @ coeffs``.

    Each step picks the column with the largest row energy of
    ``Dict^H R`` (``R`` the normalized residual; ties go to the lowest
    index), refits all selected coefficients by least squares and updates
    the residual. With ``weight`` the fit minimizes
    ``||W^(1/2) (target - Dict[:, cols] coeffs)||_F``. ``rescale`` applies a
    final scaling so that ``||Dict[:, cols] coeffs||_F = ||target||_F``.
    """
    n_atoms = dictionary.shape[1]
    if k > n_atoms:
        raise ValueError(f"k={k} exceeds the {n_atoms} dictionary columns")
    if k < 1:
        raise ValueError("k must be >= 1")
    if weight is None:
        D_w, T_w = dictionary, target
    else:
        W_half = psd_sqrt(weight)
        D_w, T_w = W_half @ dictionary, W_half @ target

    selected = []
    history = []
    residual = T_w
    coeffs = np.zeros((0, target.shape[1]), dtype=complex)
    for _ in range(k):
        psi = D_w.conj().T @ residual
        energy = np.sum(np.abs(psi) ** 2, axis=1)
        energy[selected] = -np.inf
        selected.append(int(np.argmax(energy)))
        D_sel = D_w[:, selected]
        s = np.linalg.svd(D_sel, compute_uv=False)
        if s[-1] <= RANK_RTOL * s[0]:
            raise SingularSystemError(
                f"selected columns {selected} are linearly dependent (duplicate angles?)")
        coeffs = np.linalg.lstsq(D_sel, T_w, rcond=None)[0]
        r = T_w - D_sel @ coeffs
        r_norm = np.linalg.norm(r)
        history.append(float(r_norm))
        residual = r / r_norm if r_norm > 0 else r

    if rescale:
        approx_norm = np.linalg.norm(dictionary[:, selected] @ coeffs)
        if approx_norm > 0:
            coeffs = coeffs * (np.linalg.norm(target) / approx_norm)
    final = np.linalg.norm(T_w - D_w[:, selected] @ coeffs)
    return SompResult(selected, coeffs, float(final), history)


@dataclass
class HybridTransceiver:
    P_RF_list: list
    P_BB_list: list
    A_RF: np.ndarray
    A_BB: np.ndarray

    @property
    def P_list(self):
        return [rf @ bb for rf, bb in zip(self.P_RF_list, self.P_BB_list)]

    @property
    def A(self):
        """Equivalent fully-digital combiner ``A_BB^H A_RF^H``."""
        return self.A_BB.conj().T @ self.A_RF.conj().T


def hybrid_precoder(P_n, A_s_n, n_rf_node):
    res = somp_factorize(P_n, A_s_n, n_rf_node, rescale=True)
    return A_s_n[:, res.columns], res.coeffs


def hybrid_combiner(A, A_FC, n_rf_fc, R_yy):
    """Factor ``A^H ~ A_RF A_BB`` minimizing ``||R_yy^(1/2) (A^H - A_RF A_BB)||_F``."""
    res = somp_factorize(A.conj().T, A_FC, n_rf_fc, weight=R_yy)
    return A_FC[:, res.columns], res.coeffs


def hybridize(P_list, channel, H_list, model, n_rf_node, n_rf_fc, sigma2_csi=0.0):
    """Factor digital precoders, then factor the MMSE combiner matched to the hybrid precoders.

    ``H_list`` is the channel the design sees (estimates under CSI error);
    ``channel`` supplies the array-response dictionaries.
    """
    P_RF, P_BB = [], []
    for P, A_s in zip(P_list, channel.A_s):
        rf, bb = hybrid_precoder(P, A_s, n_rf_node)
        P_RF.append(rf)
        P_BB.append(bb)
    P_hyb = [rf @ bb for rf, bb in zip(P_RF, P_BB)]
    A = bcd.update_combiner(P_hyb, H_list, model, sigma2_csi)
    R_yy = bcd.received_covariance(P_hyb, H_list, model, sigma2_csi)
    A_RF, A_BB = hybrid_combiner(A, channel.A_FC, n_rf_fc, R_yy)
    return HybridTransceiver(P_RF, P_BB, A_RF, A_BB)
