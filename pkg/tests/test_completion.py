import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringcal.completion import (
    CompletionOptions,
    estimate_sampling_rate,
    objective,
    objective_gradient,
    optspace_complete,
    rank_q_projection,
    solve_core,
    trim,
)
from ringcal.errors import InvalidParameter, UnreliableRowsWarning
from ringcal.geometry import generate_ring_layout, pairwise_distance_matrix
from ringcal.observation import synthesize_observation
from ringcal.pipeline import complete_observation


def low_rank(n, q, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, q)) @ rng.standard_normal((q, n))


def orthonormal(n, q, rng):
    return np.linalg.qr(rng.standard_normal((n, q)))[0]


def test_sampling_rate_estimates():
    assert estimate_sampling_rate(np.ones((10, 10), bool)) == 1.0
    assert estimate_sampling_rate(np.zeros((10, 10), bool)) == 0.0
    E = np.random.default_rng(1).random((200, 200)) < 0.95
    np.fill_diagonal(E, False)
    assert abs(estimate_sampling_rate(E) - 0.95) < 0.02


def test_trim_leaves_uniform_masks_alone():
    unchanged = 0
    for seed in range(100):
        E = np.random.default_rng(seed).random((200, 200)) < 0.95
        M = np.ones((200, 200))
        _, Et = trim(M, E, seed)
        unchanged += np.array_equal(Et, E)
    assert unchanged >= 99
    full = np.ones((10, 10), bool)
    _, Et = trim(np.ones((10, 10)), full, 0)
    assert np.array_equal(Et, full)


def test_trim_caps_a_dense_row():
    n = 100
    rng = np.random.default_rng(3)
    E = np.zeros((n, n), bool)
    for i in range(n):
        E[i, rng.choice(n, 9, replace=False)] = True
    E[0, :] = True
    mean = E.sum(axis=1).mean()
    Mt, Et = trim(np.ones((n, n)), E, 0)
    assert Et[0].sum() == math.ceil(2 * mean)
    assert np.all(Mt[~Et] == 0)


def test_rank_q_projection_exact_and_full_rank():
    M = low_rank(30, 3, 0)
    full = np.ones_like(M, dtype=bool)
    P = rank_q_projection(M, full, 3, 1.0)
    assert np.linalg.norm(P - M) / np.linalg.norm(M) < 1e-10
    A = np.random.default_rng(0).standard_normal((12, 12))
    np.testing.assert_allclose(rank_q_projection(A, np.ones((12, 12), bool), 12, 1.0), A, atol=1e-12)


def test_rank_one_projection_under_half_sampling():
    rng = np.random.default_rng(11)
    n = 500
    u, v = rng.random(n) + 0.5, rng.random(n) + 0.5
    M = np.outer(u, v)
    E = rng.random((n, n)) < 0.5
    P = rank_q_projection(M, E, 1, E.mean())
    assert np.linalg.norm(P - M) / np.linalg.norm(M) < 0.1


def test_projection_rejects_bad_arguments():
    with pytest.raises(InvalidParameter):
        rank_q_projection(np.eye(3), np.ones((3, 3), bool), 4, 1.0)
    with pytest.raises(InvalidParameter):
        rank_q_projection(np.eye(3), np.ones((3, 3), bool), 1, 0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    n, q = 20, 2
    X, Y = rng.standard_normal((n, q)), rng.standard_normal((n, q))
    S = rng.standard_normal((q, q))
    M = rng.standard_normal((n, n))
    W = (rng.random((n, n)) < 0.7).astype(float)
    gX, gY = objective_gradient(X, S, Y, M, W)
    h = 1e-6
    fdX, fdY = np.zeros_like(X), np.zeros_like(Y)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        fdX[idx] = (objective(X + E, S, Y, M, W) - objective(X - E, S, Y, M, W)) / (2 * h)
        fdY[idx] = (objective(X, S, Y + E, M, W) - objective(X, S, Y - E, M, W)) / (2 * h)
    assert np.linalg.norm(gX - fdX) <= 1e-5 * np.linalg.norm(gX)
    assert np.linalg.norm(gY - fdY) <= 1e-5 * np.linalg.norm(gY)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_core_solve_is_stationary(seed):
    rng = np.random.default_rng(seed)
    n, q = 30, 3
    X, Y = orthonormal(n, q, rng), orthonormal(n, q, rng)
    M = rng.standard_normal((n, n))
    W = (rng.random((n, n)) < 0.8).astype(float)
    S = solve_core(X, Y, M, W)
    f0 = objective(X, S, Y, M, W)
    for _ in range(20):
        dS = rng.standard_normal((q, q))
        assert objective(X, S + 1e-6 * dS, Y, M, W) >= f0 - 1e-14 * max(f0, 1.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.floats(0.5, 1.0), noise=st.floats(0, 0.1))
def test_cost_never_increases_and_factors_stay_orthonormal(seed, p, noise):
    rng = np.random.default_rng(seed)
    n = 40
    M = low_rank(n, 3, seed) + noise * rng.standard_normal((n, n))
    E = rng.random((n, n)) < p
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optspace_complete(M, E, CompletionOptions(rank=3, max_iters=100))
    tr = np.asarray(res.cost_trace)
    assert np.all(np.diff(tr) <= 1e-12 * np.abs(tr[:-1]) + 1e-300)
    for F in (res.X, res.Y):
        assert np.linalg.norm(F.T @ F - np.eye(3)) < 1e-10


def test_exact_recovery_of_random_rank_four():
    good = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        M = low_rank(100, 4, seed)
        E = rng.random((100, 100)) < 0.9
        res = optspace_complete(M, E, CompletionOptions(rank=4))
        good += np.linalg.norm(res.Db_hat - M) / np.linalg.norm(M) < 1e-6
    assert good >= 48


def test_full_mask_exact_squared_distances():
    lay = generate_ring_layout(60, 0.1, 0.01, 4)
    D = pairwise_distance_matrix(lay)
    Db = D * D
    res = optspace_complete(Db, np.ones_like(Db, bool))
    assert np.linalg.norm(res.Db_hat - Db) / np.linalg.norm(Db) < 1e-8
    assert res.converged


def test_ring_completion_with_structured_gaps():
    lay = generate_ring_layout(200, 0.10, 0.01, 7)
    obs = synthesize_observation(lay, 1.0, 0.95, seed=7)
    D = pairwise_distance_matrix(lay)
    # the plain descent stalls near a saddle; the refresh pass escapes it
    Db_hat, _ = complete_observation(obs, opts=CompletionOptions(refresh=True))
    assert np.linalg.norm(D * D - Db_hat) / 200 < 1e-6
    Db_plain, _ = complete_observation(obs)
    assert np.linalg.norm(D * D - Db_plain) / 200 < 1e-4


def test_refresh_option_reaches_exact_completion():
    lay = generate_ring_layout(200, 0.10, 0.002, 1)
    obs = synthesize_observation(lay, 1.0, 0.95, seed=1)
    D = pairwise_distance_matrix(lay)
    Db_hat, res = complete_observation(obs, opts=CompletionOptions(refresh=True))
    assert np.linalg.norm(D * D - Db_hat) / 200 < 1e-10


def test_empty_row_is_flagged():
    M = low_rank(30, 2, 0)
    E = np.random.default_rng(0).random((30, 30)) < 0.8
    E[5, :] = False
    with pytest.warns(UnreliableRowsWarning):
        res = optspace_complete(M, E, CompletionOptions(rank=2))
    assert 5 in res.unreliable_rows
    assert np.all(np.isfinite(res.Db_hat))


def test_input_validation():
    with pytest.raises(InvalidParameter):
        optspace_complete(np.eye(4), np.zeros((4, 4), bool))
    with pytest.raises(InvalidParameter):
        optspace_complete(np.eye(4), np.ones((3, 3), bool))
    with pytest.raises(InvalidParameter):
        optspace_complete(np.eye(3), np.ones((3, 3), bool), CompletionOptions(rank=4))


def test_trimmed_run_and_custom_start():
    M = low_rank(50, 2, 3)
    E = np.random.default_rng(3).random((50, 50)) < 0.8
    res = optspace_complete(M, E, CompletionOptions(rank=2, trimming=True, p_hat=0.8))
    assert np.linalg.norm(res.Db_hat - M) / np.linalg.norm(M) < 1e-6
    rng = np.random.default_rng(0)
    res = optspace_complete(M, E, CompletionOptions(rank=2), init=(rng.standard_normal((50, 2)),
                                                                    rng.standard_normal((50, 2))))
    assert np.all(np.isfinite(res.Db_hat))
