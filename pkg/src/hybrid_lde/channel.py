"""Clustered mmWave channel between the nodes and the fusion center.

Each node channel is ``H_n = A_FC D_n A_s,n^H`` with uniform-linear-array
responses in the columns of ``A_FC`` (shared arrival angles) and
``A_s,n`` (per-node departure angles), and
``D_n = sqrt(N_r N_t / K) diag(alpha_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import crandn


@dataclass
class ClusterSet:
    alphas: np.ndarray          # (N, K) complex path gains
    aoa: np.ndarray             # (K,) shared arrival angles
    aod: np.ndarray             # (N, K) departure angles
    d_over_lambda_rx: float = 0.5
    d_over_lambda_tx: float = 0.5

    @property
    def n_nodes(self):
        return self.alphas.shape[0]

    @property
    def n_clusters(self):
        return self.alphas.shape[1]


@dataclass
class ChannelRealization:
    A_FC: np.ndarray
    A_s: list
    D: list
    H: list


@dataclass
class CsiRealization:
    """Channel estimates, their errors and the realized true channels ``H = H_hat + Delta``."""

    H_hat: list
    Delta: list
    sigma2_csi: float
    H: list


def array_response(angle, count, spacing_ratio=0.5):
    """Unit-norm ULA response: entry ``m`` is ``exp(-j m 2 pi d/lambda cos(angle)) / sqrt(count)``."""
    m = np.arange(count)
    return np.exp(-1j * m * 2.0 * np.pi * spacing_ratio * np.cos(angle)) / np.sqrt(count)


def array_response_matrix(angles, count, spacing_ratio=0.5):
    return np.column_stack([array_response(a, count, spacing_ratio) for a in np.atleast_1d(angles)])


def draw_clusters(config, rng):
    """Gains ``alpha ~ CN(0, 1)``; AoAs and AoDs uniform on ``[0, pi]``."""
    N, K = config.n_nodes, config.n_clusters
    alphas = crandn(rng, (N, K))
    aoa = rng.uniform(0.0, np.pi, K)
    aod = rng.uniform(0.0, np.pi, (N, K))
    return ClusterSet(alphas, aoa, aod, config.d_over_lambda_rx, config.d_over_lambda_tx)


def assemble_channel(clusters, config):
    N_r, N_t, K = config.n_rx, config.n_tx, clusters.n_clusters
    gain = np.sqrt(N_r * N_t / K)
    A_FC = array_response_matrix(clusters.aoa, N_r, clusters.d_over_lambda_rx)
    A_s, D, H = [], [], []
    for n in range(clusters.n_nodes):
        A = array_response_matrix(clusters.aod[n], N_t, clusters.d_over_lambda_tx)
        Dn = gain * np.diag(clusters.alphas[n])
        A_s.append(A)
        D.append(Dn)
        H.append(A_FC @ Dn @ A.conj().T)
    return ChannelRealization(A_FC, A_s, D, H)


def channel_sum_form(clusters, config, n):
    """``H_n`` built term by term from the cluster sum (cross-check for the factored form)."""
    N_r, N_t, K = config.n_rx, config.n_tx, clusters.n_clusters
    H = np.zeros((N_r, N_t), dtype=complex)
    for k in range(K):
        a_fc = array_response(clusters.aoa[k], N_r, clusters.d_over_lambda_rx)
        a_s = array_response(clusters.aod[n, k], N_t, clusters.d_over_lambda_tx)
        H += clusters.alphas[n, k] * np.outer(a_fc, a_s.conj())
    return np.sqrt(N_r * N_t / K) * H


def perturb_csi(channel, sigma2_csi, rng):
    """Split each true channel into an estimate and an i.i.d. ``CN(0, sigma2_csi)`` error.

    ``Delta`` stores the error actually applied after rounding, ``H - H_hat``,
    and ``H`` the sum ``H_hat + Delta``, so ``H_hat + Delta == H`` holds
    bit for bit. ``H`` equals the input exactly wherever an error component
    is no larger than the channel component, and to the last bit elsewhere.
    """
    if sigma2_csi < 0:
        raise ValueError("sigma2_csi must be >= 0")
    H_list = channel.H if isinstance(channel, ChannelRealization) else channel
    H_hat = [H - crandn(rng, H.shape, sigma2_csi) for H in H_list]
    Delta = [H - Hh for H, Hh in zip(H_list, H_hat)]
    return CsiRealization(H_hat, Delta, sigma2_csi, [Hh + d for Hh, d in zip(H_hat, Delta)])


# Text fixture format: a header line "# N_r N_t N", then for each node a
# line "H <n>" followed by N_r rows of 2*N_t floats (re im pairs, row-major).

def dump_channels(H_list, fh):
    N_r, N_t = H_list[0].shape
    fh.write(f"# {N_r} {N_t} {len(H_list)}\n")
    for n, H in enumerate(H_list):
        fh.write(f"H {n}\n")
        for row in H:
            pairs = np.column_stack([row.real, row.imag]).ravel()
            fh.write(" ".join(repr(float(v)) for v in pairs) + "\n")


def load_channels(fh):
    header = fh.readline().split()
    if not header or header[0] != "#":
        raise ValueError("missing channel fixture header")
    N_r, N_t, N = (int(v) for v in header[1:4])
    H_list = []
    for n in range(N):
        tag = fh.readline().split()
        if tag != ["H", str(n)]:
            raise ValueError(f"expected block 'H {n}', got {tag}")
        rows = []
        for _ in range(N_r):
            vals = np.array([float(v) for v in fh.readline().split()])
            if vals.size != 2 * N_t:
                raise ValueError(f"node {n}: row has {vals.size} values, expected {2 * N_t}")
            rows.append(vals[0::2] + 1j * vals[1::2])
        H_list.append(np.array(rows))
    return H_list
