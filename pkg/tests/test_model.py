import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_lde.model import (BcdSettings, DimensionError, ObservationModel, SystemConfig,
                              check_covariance, crandn, make_observation_model, observe,
                              stack_model, transmit_power)


def test_config_broadcasts_scalars_per_node():
    cfg = SystemConfig(n_nodes=3, rho=2.0, sigma2_obs=[0.1, 0.2, 0.3])
    assert cfg.rho == (2.0, 2.0, 2.0)
    assert cfg.sigma2_obs == (0.1, 0.2, 0.3)


def test_config_accepts_bcd_mapping():
    assert SystemConfig(bcd={"i_max": 7}).bcd == BcdSettings(i_max=7)


@pytest.mark.parametrize("kwargs", [
    {"n_nodes": 0}, {"q": 0}, {"n_rf_node": 6, "n_tx": 5}, {"n_rf_fc": 11, "n_rx": 10},
    {"rho": 0.0}, {"sigma2_obs": -1.0}, {"sigma2_fc": -0.1}, {"sigma2_csi": -1e-3},
    {"n_nodes": 2, "rho": [1.0, 1.0, 1.0]}, {"bcd": {"i_max": 0}},
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        SystemConfig(**kwargs)


def test_check_covariance_rejects_non_hermitian_and_indefinite():
    with pytest.raises(ValueError, match="Hermitian"):
        check_covariance(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive semidefinite"):
        check_covariance(np.diag([1.0, -1e-6]))
    check_covariance(np.diag([1.0, -1e-11]))        # round-off floor


def test_observation_model_names_bad_node():
    with pytest.raises(DimensionError, match="node 1"):
        ObservationModel([np.ones((2, 3)), np.ones((2, 2))], [np.eye(2)] * 2, np.eye(3), np.eye(4))


def test_crandn_variance_convention():
    z = crandn(np.random.default_rng(0), 200000, var=2.0)
    assert abs(np.mean(z.real ** 2) - 1.0) < 0.02
    assert abs(np.mean(z.imag ** 2) - 1.0) < 0.02
    assert abs(np.mean(np.abs(z) ** 2) - 2.0) < 0.03


# -- stack_model ------------------------------------------------------------

def test_stack_single_node_is_identity():
    rng = np.random.default_rng(1)
    C, H, P = crandn(rng, (2, 3)), crandn(rng, (4, 5)), crandn(rng, (5, 2))
    st_ = stack_model([C], [H], [P])
    assert np.array_equal(st_.C, C) and np.array_equal(st_.H, H) and np.array_equal(st_.P, P)


def test_stack_block_placement():
    st_ = stack_model([np.zeros((2, 2)), np.eye(2)], [np.ones((3, 2))] * 2, [np.eye(2)] * 2)
    assert np.array_equal(st_.C, np.vstack([np.zeros((2, 2)), np.eye(2)]))


def test_stack_matches_index_loop_oracle():
    rng = np.random.default_rng(2)
    N, l, q, Nt, Nr = 3, 2, 3, 4, 5
    C = [crandn(rng, (l, q)) for _ in range(N)]
    H = [crandn(rng, (Nr, Nt)) for _ in range(N)]
    P = [crandn(rng, (Nt, l)) for _ in range(N)]
    st_ = stack_model(C, H, P)
    for n in range(N):
        for i in range(l):
            for j in range(q):
                assert st_.C[n * l + i, j] == C[n][i, j]
        for i in range(Nr):
            for j in range(Nt):
                assert st_.H[i, n * Nt + j] == H[n][i, j]
    for a in range(N * Nt):
        for b in range(N * l):
            n, m = a // Nt, b // l
            expected = P[n][a % Nt, b % l] if n == m else 0.0
            assert st_.P[a, b] == expected


def test_stack_names_offending_node():
    good = (np.ones((2, 3)), np.ones((4, 5)), np.ones((5, 2)))
    with pytest.raises(DimensionError, match="node 1"):
        stack_model([good[0]] * 2, [good[1]] * 2, [good[2], np.ones((4, 2))])
    with pytest.raises(DimensionError, match="lengths"):
        stack_model([good[0]], [good[1]] * 2, [good[2]])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_stack_block_extraction_roundtrip(N, l, q, seed):
    rng = np.random.default_rng(seed)
    C = [crandn(rng, (l, q)) for _ in range(N)]
    H = [crandn(rng, (3, 2)) for _ in range(N)]
    P = [crandn(rng, (2, l)) for _ in range(N)]
    st_ = stack_model(C, H, P)
    for n in range(N):
        assert np.array_equal(st_.C[n * l:(n + 1) * l], C[n])
        assert np.array_equal(st_.H[:, n * 2:(n + 1) * 2], H[n])
        assert np.array_equal(st_.P[n * 2:(n + 1) * 2, n * l:(n + 1) * l], P[n])


# -- observe ----------------------------------------------------------------

def _model(C, R, q):
    return ObservationModel([C], [R], np.eye(q), np.eye(1))


def test_observe_noiseless_returns_column():
    C = crandn(np.random.default_rng(3), (3, 2))
    x = observe(_model(C, np.zeros((3, 3)), 2), 0, np.array([1.0, 0.0]), np.random.default_rng(0))
    assert np.array_equal(x, C[:, 0])


def test_observe_pure_noise_sample_covariance():
    rng = np.random.default_rng(4)
    A = crandn(rng, (3, 3))
    R = A @ A.conj().T + 0.5 * np.eye(3)
    m = _model(np.zeros((3, 2)), R, 2)
    draws = np.array([observe(m, 0, np.zeros(2), rng) for _ in range(100000)])
    S = draws.T @ draws.conj() / len(draws)
    assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.05


def test_observe_zero_mean():
    rng = np.random.default_rng(5)
    m = _model(crandn(rng, (2, 2)), np.eye(2), 2)
    draws = np.array([observe(m, 0, np.zeros(2), rng) for _ in range(10000)])
    stderr = np.sqrt(1.0 / len(draws))           # each entry has E|v|^2 = 1
    assert np.all(np.abs(draws.mean(axis=0)) < 3 * stderr)


def test_observe_is_reproducible_and_checks_theta():
    m = _model(np.eye(2), np.eye(2), 2)
    a = observe(m, 0, np.ones(2), np.random.default_rng(7))
    b = observe(m, 0, np.ones(2), np.random.default_rng(7))
    assert np.array_equal(a, b)
    with pytest.raises(DimensionError):
        observe(m, 0, np.ones(3), np.random.default_rng(7))


def test_make_observation_model_shapes():
    cfg = SystemConfig(n_nodes=3, q=4, n_obs=2, n_rx=6, sigma2_obs=[1, 2, 3], sigma2_fc=0.5)
    m = make_observation_model(cfg, np.random.default_rng(0))
    assert [C.shape for C in m.C_list] == [(2, 4)] * 3
    assert np.array_equal(m.R_list[2], 3 * np.eye(2))
    assert np.array_equal(m.R_w, 0.5 * np.eye(6))
    assert m.n_nodes == 3 and m.q == 4


# -- transmit_power ---------------------------------------------------------

def test_power_zero_precoder():
    assert transmit_power(np.zeros((4, 2)), np.ones((2, 3)), np.eye(3), np.eye(2)) == 0.0


def test_power_identity_precoder_pure_noise():
    assert transmit_power(np.eye(3), np.zeros((3, 2)), np.eye(2), 0.7 * np.eye(3)) == pytest.approx(2.1)


def test_power_matches_monte_carlo():
    rng = np.random.default_rng(8)
    C, P = crandn(rng, (2, 3)), crandn(rng, (4, 2))
    R = np.diag([0.3, 1.2])
    m = ObservationModel([C], [R], np.eye(3), np.eye(1))
    samples = []
    for _ in range(10000):
        theta = crandn(rng, 3)
        samples.append(np.sum(np.abs(P @ observe(m, 0, theta, rng)) ** 2))
    samples = np.array(samples)
    stderr = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - transmit_power(P, C, np.eye(3), R)) < 3 * stderr


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_power_unitary_invariance(nt, l, seed):
    rng = np.random.default_rng(seed)
    C, P = crandn(rng, (l, 2)), crandn(rng, (nt, l))
    U = np.linalg.qr(crandn(rng, (nt, nt)))[0]
    base = transmit_power(P, C, np.eye(2), np.eye(l))
    assert abs(transmit_power(U @ P, C, np.eye(2), np.eye(l)) - base) < 1e-10 * max(1.0, base)
