import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_lde import bcd
from hybrid_lde.bcd import SingularSystemError
from hybrid_lde.channel import array_response_matrix
from hybrid_lde.model import SystemConfig, crandn, psd_sqrt
from hybrid_lde.somp import hybrid_combiner, hybrid_precoder, hybridize, somp_factorize

from conftest import draw


def ula(rng, count, atoms):
    return array_response_matrix(rng.uniform(0, np.pi, atoms), count)


def test_single_atom_recovered_exactly():
    D = ula(np.random.default_rng(0), 6, 4)
    res = somp_factorize(3 * D[:, [2]], D, 1)
    assert res.columns == [2]
    assert res.coeffs[0, 0] == pytest.approx(3.0, abs=1e-12)
    assert res.residual_norm < 1e-12


def test_full_dictionary_spans_target():
    rng = np.random.default_rng(1)
    D = ula(rng, 6, 4)
    T = D @ crandn(rng, (4, 3))
    res = somp_factorize(T, D, 4)
    assert sorted(res.columns) == [0, 1, 2, 3]
    assert res.residual_norm < 1e-9 * np.linalg.norm(T)


def test_two_column_selection_against_exhaustive_search():
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(50):
        D = ula(rng, 5, 3)
        T = crandn(rng, (5, 2))
        res = somp_factorize(T, D, 2)
        best = min(np.linalg.norm(T - D[:, list(s)] @ np.linalg.lstsq(D[:, list(s)], T, rcond=None)[0])
                   for s in itertools.combinations(range(3), 2))
        assert res.residual_norm >= best - 1e-12
        hits += abs(res.residual_norm - best) < 1e-10
    assert hits >= 25


def test_zero_target():
    D = ula(np.random.default_rng(3), 4, 3)
    res = somp_factorize(np.zeros((4, 2), complex), D, 2)
    assert np.all(res.coeffs == 0)
    assert res.residual_norm == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_columns_distinct_and_residual_non_increasing(seed, k):
    rng = np.random.default_rng(seed)
    D = ula(rng, 8, 6)
    res = somp_factorize(crandn(rng, (8, 3)), D, k)
    assert len(set(res.columns)) == k
    assert np.all(np.diff(res.residual_history) <= 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 5))
def test_precoder_factor_preserves_frobenius_norm(seed, k):
    rng = np.random.default_rng(seed)
    A_s = ula(rng, 5, 5)
    P = crandn(rng, (5, 2))
    rf, bb = hybrid_precoder(P, A_s, k)
    assert rf.shape == (5, k) and bb.shape == (k, 2)
    assert np.linalg.norm(rf @ bb) == pytest.approx(np.linalg.norm(P), rel=1e-9)
    assert np.allclose(np.abs(rf), 1 / np.sqrt(5), rtol=0, atol=1e-15)


def test_identity_weight_matches_unweighted():
    rng = np.random.default_rng(4)
    D, T = ula(rng, 6, 5), crandn(rng, (6, 2))
    a = somp_factorize(T, D, 3)
    b = somp_factorize(T, D, 3, weight=np.eye(6))
    assert a.columns == b.columns
    assert np.allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-14)


def test_errors():
    D = ula(np.random.default_rng(5), 4, 3)
    with pytest.raises(ValueError):
        somp_factorize(np.ones((4, 1)), D, 4)
    with pytest.raises(ValueError):
        somp_factorize(np.ones((4, 1)), D, 0)
    dup = np.column_stack([D[:, 0], D[:, 0], D[:, 1]])
    with pytest.raises(SingularSystemError):
        somp_factorize(D[:, [0]] + D[:, [1]], dup, 3)


# -- full hybrid design -------------------------------------------------------

@pytest.fixture(scope="module")
def converged():
    config = SystemConfig(n_nodes=6, n_tx=5, n_rx=8, n_clusters=5)
    model, _, ch, rng = draw(config, 11)
    tx, _ = bcd.bcd_design(ch.H, model, config, rng)
    return config, model, ch, tx


def matched_mse(P_list, H_list, model):
    return bcd.mse_analytic(bcd.update_combiner(P_list, H_list, model), P_list, H_list, model)


def test_combiner_full_dictionary_is_exact(converged):
    config, model, ch, tx = converged
    R_yy = bcd.received_covariance(tx.P_list, ch.H, model)
    rf, bb = hybrid_combiner(tx.A, ch.A_FC, config.n_clusters, R_yy)
    W = psd_sqrt(R_yy)
    assert np.linalg.norm(W @ (tx.A.conj().T - rf @ bb)) < 1e-8


def test_full_rf_chains_reproduce_digital(converged):
    config, model, ch, tx = converged
    hyb = hybridize(tx.P_list, ch, ch.H, model, config.n_clusters, config.n_clusters)
    digital = matched_mse(tx.P_list, ch.H, model)
    assert bcd.mse_analytic(hyb.A, hyb.P_list, ch.H, model) == pytest.approx(digital, rel=1e-6)


def test_hybrid_bounded_by_digital_and_trivial(converged):
    config, model, ch, tx = converged
    digital = matched_mse(tx.P_list, ch.H, model)
    for k in range(1, config.n_clusters + 1):
        hyb = hybridize(tx.P_list, ch, ch.H, model, k, k)
        m = bcd.mse_analytic(hyb.A, hyb.P_list, ch.H, model)
        assert digital - 1e-9 <= m <= config.q
        assert all(np.allclose(np.abs(rf), 1 / np.sqrt(config.n_tx)) for rf in hyb.P_RF_list)
        assert np.allclose(np.abs(hyb.A_RF), 1 / np.sqrt(config.n_rx))


def test_more_rf_chains_help_on_average():
    config = SystemConfig(n_nodes=6, n_tx=5, n_rx=8, n_clusters=5)
    totals = np.zeros(3)
    for seed in range(5):
        model, _, ch, rng = draw(config, 100 + seed)
        tx, _ = bcd.bcd_design(ch.H, model, config, rng)
        for i, k in enumerate((1, 3, 5)):
            hyb = hybridize(tx.P_list, ch, ch.H, model, k, k)
            totals[i] += bcd.mse_analytic(hyb.A, hyb.P_list, ch.H, model)
    assert totals[0] > totals[1] > totals[2]
