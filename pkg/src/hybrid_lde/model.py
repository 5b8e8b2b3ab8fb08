"""Scenario configuration and the linear observation model.

Every node ``n`` observes ``x_n = C_n theta + v_n`` and sends ``P_n x_n``
over a coherent multiple-access channel, so the fusion center receives

    y = sum_n H_n P_n x_n + w.

Node indices are 0-based everywhere in this package.

Complex Gaussian convention: ``CN(0, S)`` has real and imaginary parts
each distributed as ``N(0, S/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSD_FLOOR = -1e-10
HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when matrix shapes do not agree with the scenario."""


@dataclass(frozen=True)
class BcdSettings:
    i_max: int = 40
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, powers and noise levels of one scenario.

    ``rho`` and ``sigma2_obs`` hold one entry per node; a scalar is
    broadcast to all nodes.
    """

    n_nodes: int = 20
    n_tx: int = 5
    n_rx: int = 10
    q: int = 3
    n_obs: int = 2
    n_clusters: int = 5
    n_rf_node: int = 5
    n_rf_fc: int = 5
    rho: tuple = 1.0
    sigma2_obs: tuple = 1.0
    sigma2_fc: float = 0.1
    sigma2_csi: float = 0.0
    seed: int = 0
    trials: int = 10_000
    bcd: BcdSettings = field(default_factory=BcdSettings)
    d_over_lambda_rx: float = 0.5
    d_over_lambda_tx: float = 0.5

    def __post_init__(self):
        for name in ("n_nodes", "n_tx", "n_rx", "q", "n_obs", "n_clusters",
                     "n_rf_node", "n_rf_fc", "trials"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_rf_node > self.n_tx:
            raise ValueError(f"n_rf_node={self.n_rf_node} exceeds n_tx={self.n_tx}")
        if self.n_rf_fc > self.n_rx:
            raise ValueError(f"n_rf_fc={self.n_rf_fc} exceeds n_rx={self.n_rx}")
        object.__setattr__(self, "rho", _per_node(self.rho, self.n_nodes, "rho"))
        object.__setattr__(self, "sigma2_obs",
                           _per_node(self.sigma2_obs, self.n_nodes, "sigma2_obs"))
        if any(r <= 0 for r in self.rho):
            raise ValueError("all power budgets rho must be > 0")
        if any(s < 0 for s in self.sigma2_obs):
            raise ValueError("sigma2_obs must be >= 0")
        if self.sigma2_fc < 0 or self.sigma2_csi < 0:
            raise ValueError("noise variances must be >= 0")
        if isinstance(self.bcd, dict):
            object.__setattr__(self, "bcd", BcdSettings(**self.bcd))


def _per_node(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"{name} has {arr.size} entries, expected {n}")
    return tuple(float(v) for v in arr)


@dataclass
class ObservationModel:
    C_list: list
    R_list: list
    R_theta: np.ndarray
    R_w: np.ndarray

    def __post_init__(self):
        if len(self.C_list) != len(self.R_list):
            raise DimensionError("C_list and R_list differ in length")
        q = self.R_theta.shape[0]
        check_covariance(self.R_theta, "R_theta")
        check_covariance(self.R_w, "R_w")
        for n, (C, R) in enumerate(zip(self.C_list, self.R_list)):
            if C.shape[1] != q:
                raise DimensionError(f"node {n}: C_n has {C.shape[1]} columns, expected q={q}")
            if R.shape != (C.shape[0], C.shape[0]):
                raise DimensionError(f"node {n}: R_n shape {R.shape} does not match l={C.shape[0]}")
            check_covariance(R, f"R_n (node {n})")

    @property
    def n_nodes(self):
        return len(self.C_list)

    @property
    def q(self):
        return self.R_theta.shape[0]

    def signal_covariance(self, n):
        """Covariance ``C_n R_theta C_n^H + R_n`` of the node-``n`` observation."""
        C = self.C_list[n]
        return C @ self.R_theta @ C.conj().T + self.R_list[n]


@dataclass
class StackedModel:
    C: np.ndarray
    H: np.ndarray
    P: np.ndarray


def check_covariance(S, name="matrix"):
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {S.shape}")
    if S.size and np.max(np.abs(S - S.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(S))):
        raise ValueError(f"{name} is not Hermitian")
    if S.size and np.linalg.eigvalsh((S + S.conj().T) / 2).min() < PSD_FLOOR:
        raise ValueError(f"{name} is not positive semidefinite")


def crandn(rng, shape, var=1.0):
    """Draw i.i.d. ``CN(0, var)`` entries."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def psd_sqrt(S):
    """Hermitian square root, with round-off negative eigenvalues clamped to 0."""
    w, U = np.linalg.eigh((S + S.conj().T) / 2)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def make_observation_model(config, rng):
    """Draw ``C_n`` with i.i.d. CN(0, 1) entries and build the covariances.

    ``R_n = sigma2_obs[n] I``, ``R_theta = I`` and ``R_w = sigma2_fc I``.
    """
    C_list = [crandn(rng, (config.n_obs, config.q)) for _ in range(config.n_nodes)]
    R_list = [s2 * np.eye(config.n_obs) for s2 in config.sigma2_obs]
    return ObservationModel(C_list, R_list, np.eye(config.q), config.sigma2_fc * np.eye(config.n_rx))


def block_diag(blocks):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=np.result_type(*blocks))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def stack_model(C_list, H_list, P_list):
    """Stack per-node matrices into ``C`` (vertical), ``H`` (horizontal) and block-diagonal ``P``."""
    N = len(C_list)
    if len(H_list) != N or len(P_list) != N:
        raise DimensionError(
            f"list lengths differ: {len(C_list)} C, {len(H_list)} H, {len(P_list)} P")
    q = C_list[0].shape[1]
    n_rx = H_list[0].shape[0]
    for n, (C, H, P) in enumerate(zip(C_list, H_list, P_list)):
        if C.shape[1] != q:
            raise DimensionError(f"node {n}: C_n has {C.shape[1]} columns, expected {q}")
        if H.shape[0] != n_rx:
            raise DimensionError(f"node {n}: H_n has {H.shape[0]} rows, expected {n_rx}")
        if H.shape[1] != P.shape[0]:
            raise DimensionError(
                f"node {n}: H_n has {H.shape[1]} columns but P_n has {P.shape[0]} rows")
        if P.shape[1] != C.shape[0]:
            raise DimensionError(
                f"node {n}: P_n has {P.shape[1]} columns but C_n has {C.shape[0]} rows")
    return StackedModel(np.vstack(C_list), np.hstack(H_list), block_diag(P_list))


def observe(model, n, theta, rng):
    """One noisy observation ``C_n theta + v_n`` with ``v_n ~ CN(0, R_n)``."""
    C = model.C_list[n]
    theta = np.asarray(theta)
    if theta.shape != (C.shape[1],):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({C.shape[1]},)")
    noise = psd_sqrt(model.R_list[n]) @ crandn(rng, C.shape[0])
    return C @ theta + noise


def transmit_power(P_n, C_n, R_theta, R_n):
    """Average transmit power ``Tr[P_n (C_n R_theta C_n^H + R_n) P_n^H]``."""
    S = C_n @ R_theta @ C_n.conj().T + R_n
    return max(float(np.real(np.trace(P_n @ S @ P_n.conj().T))), 0.0)
