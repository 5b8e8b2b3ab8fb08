"""Fully-digital MMSE transceiver design by block coordinate descent.

The combiner ``A`` (``q x N_r``, estimate ``A y``) and the per-node
precoders ``P_n`` (``N_t x l``) are updated in turn; every update is an
exact block minimization of the MSE, so the objective never increases.
Each precoder carries its own power budget, enforced through a dual
variable found by bisection.

All functions take an optional ``sigma2_csi``. With a nonzero value they
work on the MSE averaged over a Gaussian channel error of that variance
(see :mod:`hybrid_lde.robust`); at zero they reduce exactly to the
perfect-CSI expressions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import crandn, transmit_power

log = logging.getLogger(__name__)

IMAG_TOL = 1e-6
IMAG_DISCARD = 1e-9


class SingularSystemError(np.linalg.LinAlgError):
    pass


class NumericalConsistencyError(ArithmeticError):
    pass


@dataclass
class DigitalTransceiver:
    P_list: list
    A: np.ndarray
    lambdas: np.ndarray


@dataclass
class BcdTrace:
    mse_per_iter: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _herm(M):
    return M.conj().T


def effective_gain(P_list, H_list, model):
    """``G = sum_n H_n P_n C_n``, the end-to-end map from theta to y."""
    return sum(H @ P @ C for H, P, C in zip(H_list, P_list, model.C_list))


def total_power(P_list, model):
    return sum(transmit_power(P, model.C_list[n], model.R_theta, model.R_list[n])
               for n, P in enumerate(P_list))


def received_covariance(P_list, H_list, model, sigma2_csi=0.0):
    """Covariance of the received vector ``y``.

    ``sum_n sum_j H_n P_n C_n R_theta C_j^H P_j^H H_j^H
    + sum_n H_n P_n R_n P_n^H H_n^H + R_w``, plus the average channel-error
    contribution ``sigma2_csi * sum_n Tr[P_n S_n P_n^H] I`` when requested.
    """
    G = effective_gain(P_list, H_list, model)
    R = G @ model.R_theta @ _herm(G) + model.R_w
    for H, P, Rn in zip(H_list, P_list, model.R_list):
        HP = H @ P
        R = R + HP @ Rn @ _herm(HP)
    R = R + (sigma2_csi * total_power(P_list, model)) * np.eye(R.shape[0])
    return (R + _herm(R)) / 2


def _real_trace(M, what):
    t = np.trace(M)
    scale = max(1.0, abs(t.real))
    if abs(t.imag) > IMAG_TOL * scale:
        raise NumericalConsistencyError(f"{what} has imaginary residue {t.imag:.3e}")
    return float(t.real)


def mse_analytic(A, P_list, H_list, model, sigma2_csi=0.0):
    """Exact MSE ``E||A y - theta||^2`` of a linear transceiver."""
    G = effective_gain(P_list, H_list, model)
    R_yy = received_covariance(P_list, H_list, model, sigma2_csi)
    AG = A @ G @ model.R_theta
    M = A @ R_yy @ _herm(A) - AG - _herm(AG) + model.R_theta
    return max(_real_trace(M, "MSE"), 0.0)


def update_combiner(P_list, H_list, model, sigma2_csi=0.0):
    """MMSE combiner ``R_theta G^H R_yy^-1`` for fixed precoders."""
    G = effective_gain(P_list, H_list, model)
    R_yy = received_covariance(P_list, H_list, model, sigma2_csi)
    if np.linalg.cond(R_yy) > 1e13:
        raise SingularSystemError("received covariance is singular; R_w must be positive definite")
    return _herm(np.linalg.solve(R_yy, G @ model.R_theta))


@dataclass
class _PrecoderSystem:
    """Per-node precoder family ``P(lam) = (X + lam I)^-1 Y`` in the eigenbasis of ``X``."""

    eigvals: np.ndarray
    U: np.ndarray
    UY: np.ndarray          # U^H Y with null-space rows of X zeroed
    null: np.ndarray
    z: np.ndarray           # diag(U^H Y S Y^H U)

    def precoder(self, lam):
        d = self.eigvals + lam
        inv = np.zeros_like(d)
        ok = d > 0
        inv[ok] = 1.0 / d[ok]
        return self.U @ (inv[:, None] * self.UY)

    def power(self, lam):
        d = self.eigvals + lam
        ok = d > 0
        return float(np.sum(self.z[ok] / d[ok] ** 2))


def _precoder_system(n, A, P_list, H_list, model, sigma2_csi=0.0):
    H_n = H_list[n]
    C_n = model.C_list[n]
    S_n = model.signal_covariance(n)
    if np.linalg.cond(S_n) > 1e13:
        raise SingularSystemError(
            f"node {n}: observation covariance C_n R_theta C_n^H + R_n is singular")
    AH = A @ H_n
    X = _herm(AH) @ AH + (sigma2_csi * float(np.real(np.trace(_herm(A) @ A)))) * np.eye(H_n.shape[1])
    others = sum((H_list[j] @ P_list[j] @ model.C_list[j]
                  for j in range(len(P_list)) if j != n),
                 np.zeros((H_n.shape[0], model.q), dtype=complex))
    rhs = _herm(AH) @ (model.R_theta - A @ others @ model.R_theta) @ _herm(C_n)
    Y = np.linalg.solve(S_n.T, rhs.T).T     # rhs @ S_n^-1
    w, U = np.linalg.eigh((X + _herm(X)) / 2)
    null = w <= 1e-12 * max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    w = np.where(null, 0.0, w)
    UY = _herm(U) @ Y
    UY[null] = 0.0
    z = np.real(np.einsum("ij,jk,ik->i", UY, S_n, UY.conj()))
    return _PrecoderSystem(w, U, UY, null, np.clip(z, 0.0, None))


def update_precoder(n, A, P_list, lambda_n, H_list, model, sigma2_csi=0.0):
    """MMSE precoder of node ``n`` for a fixed dual variable, all other blocks fixed.

    At ``lambda_n = 0`` a singular ``X`` is inverted on its range (minimum-power
    minimizer).
    """
    if lambda_n < 0:
        raise ValueError("lambda_n must be >= 0")
    return _precoder_system(n, A, P_list, H_list, model, sigma2_csi).precoder(lambda_n)


def _bisect_dual(system, rho_n, rtol=1e-8, max_iter=100):
    if system.power(0.0) <= rho_n:
        return 0.0
    lo = 0.0
    hi = np.sqrt(np.sum(system.z) / rho_n)
    while system.power(hi) >= rho_n:
        hi *= 2.0
    lam = hi
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        p = system.power(lam)
        if abs(p - rho_n) <= rtol * rho_n:
            break
        if p > rho_n:
            lo = lam
        else:
            hi = lam
    return lam


def solve_dual(n, A, P_list, H_list, model, rho_n, sigma2_csi=0.0):
    """Dual variable of node ``n``'s power constraint.

    Zero when the unconstrained precoder fits in the budget, otherwise the
    root of ``sum_k z_kk / (x_k + lam)^2 = rho_n`` found by bisection.
    """
    if rho_n <= 0:
        raise ValueError("rho_n must be > 0")
    return _bisect_dual(_precoder_system(n, A, P_list, H_list, model, sigma2_csi), rho_n)


def random_precoders(model, n_tx, rho, rng):
    """i.i.d. CN(0, 1) precoders scaled to meet each budget with equality."""
    P_list = []
    for n in range(model.n_nodes):
        P = crandn(rng, (n_tx, model.C_list[n].shape[0]))
        p = transmit_power(P, model.C_list[n], model.R_theta, model.R_list[n])
        P_list.append(P * np.sqrt(rho[n] / p))
    return P_list


def run_bcd(H_list, model, rho, i_max=40, epsilon=1e-4, init_rng=None,
            P_init=None, sigma2_csi=0.0):
    """Alternate combiner and per-node precoder updates until the MSE settles.

    Stops when the relative MSE change over one iteration falls below
    ``epsilon`` or after ``i_max`` iterations. ``mse_per_iter[0]`` is the
    MSE of the initial precoders with their MMSE combiner; entry ``i`` is
    the MSE after iteration ``i``.
    """
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (model.n_nodes,))
    if P_init is None:
        if init_rng is None:
            init_rng = np.random.default_rng()
        P_init = random_precoders(model, H_list[0].shape[1], rho, init_rng)
    P_list = [P.copy() for P in P_init]
    lambdas = np.zeros(model.n_nodes)
    trace = BcdTrace()
    A = None
    for it in range(i_max):
        A = update_combiner(P_list, H_list, model, sigma2_csi)
        if it == 0:
            trace.mse_per_iter.append(mse_analytic(A, P_list, H_list, model, sigma2_csi))
        for n in range(model.n_nodes):
            system = _precoder_system(n, A, P_list, H_list, model, sigma2_csi)
            lambdas[n] = _bisect_dual(system, rho[n])
            P_list[n] = system.precoder(lambdas[n])
        mse = mse_analytic(A, P_list, H_list, model, sigma2_csi)
        prev = trace.mse_per_iter[-1]
        trace.mse_per_iter.append(mse)
        trace.iterations = it + 1
        if abs(prev - mse) <= epsilon * max(abs(prev), np.finfo(float).tiny):
            trace.converged = True
            break
    log.debug("BCD stopped after %d iterations, MSE %.6g", trace.iterations, trace.mse_per_iter[-1])
    return DigitalTransceiver(P_list, A, lambdas.copy()), trace


def bcd_design(H_list, model, config, init_rng):
    """Perfect-CSI fully-digital design for the budgets and BCD settings in ``config``."""
    return run_bcd(H_list, model, config.rho, config.bcd.i_max, config.bcd.epsilon, init_rng)
