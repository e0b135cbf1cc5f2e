import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import features_direct, predict_direct
from wavecast.hankel import compute_filter_bank
from wavecast.pseudo_lds import (
    CausalityError,
    Dims,
    FeatureMap,
    FeatureVector,
    PseudoLDS,
    SeriesHistory,
    composite_norm,
    compute_features,
    design_matrix,
    exponent_for,
    gradient,
    loss,
    mixed_norm_2q,
    predict,
    predict_sequence,
    regularizer,
    regularizer_exponents,
    regularizer_gradient,
)


def random_theta(rng, dims, mode="scalar"):
    return PseudoLDS.from_vector(rng.normal(size=dims.size(mode)), dims, mode)


def random_history(rng, t, n, m):
    return SeriesHistory.from_arrays(rng.normal(size=(t, n)), rng.normal(size=(max(t - 1, 0), m)))


def zero_fv(dims):
    W, k, n, m, tau = dims.W, dims.k, dims.n, dims.m, dims.tau
    return FeatureVector(np.zeros((W, k, n)), np.zeros((W, k, n)), np.zeros((tau, n)), np.zeros((tau, m)))


# ---------------------------------------------------------------- features

def test_zero_history_gives_zero_features():
    bank = compute_filter_bank(20, 3)
    hist = SeriesHistory.from_arrays(np.zeros((15, 2)), np.zeros((14, 1)))
    fv = compute_features(hist, bank, Dims(4, 3, 2, 1, 2), lag_offset=1)
    assert not np.any(fv.cos) and not np.any(fv.sin)


def test_W1_sin_vanishes_and_cos_is_plain_convolution():
    bank = compute_filter_bank(10, 2)
    x = np.random.default_rng(1).normal(size=(8, 1))
    hist = SeriesHistory.from_arrays(x, np.zeros((7, 1)))
    fv = compute_features(hist, bank, Dims(1, 2, 1, 1, 1), lag_offset=0)
    assert not np.any(fv.sin)
    t = 8
    for h in range(2):
        conv = sum(bank.scaled_filters[h, u - 1] * x[t - u - 1, 0] for u in range(1, t))
        assert fv.cos[0, h, 0] == pytest.approx(conv, abs=1e-14)


def test_hand_expanded_small_case():
    # n=1, k=1, W=2, T=3, x=(1,2,3), L=0: at t=3 the window is x_2, x_1
    bank = compute_filter_bank(3, 1)
    psi = bank.scaled_filters[0]
    hist = SeriesHistory.from_arrays(np.array([[1.0], [2.0], [3.0]]), np.zeros((2, 1)))
    fv = compute_features(hist, bank, Dims(2, 1, 1, 1, 1), lag_offset=0)
    # p=0: psi(1) x_2 + psi(2) x_1 ; p=1: cos(pi u) = (-1)^u
    assert fv.cos[0, 0, 0] == pytest.approx(psi[0] * 2 + psi[1] * 1, abs=1e-15)
    assert fv.cos[1, 0, 0] == pytest.approx(-psi[0] * 2 + psi[1] * 1, abs=1e-15)
    assert np.max(np.abs(fv.sin)) <= 1e-15
    C, S = features_direct([[1.0], [2.0], [3.0]], 3, bank.filters, bank.eigenvalues, 2, 0)
    assert np.allclose(fv.cos, C, atol=1e-15) and np.allclose(fv.sin, S, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 2), st.integers(0, 4), st.integers(1, 12),
       st.integers(0, 10_000))
def test_features_match_direct_oracle(W, k, n, L, t, seed):
    bank = compute_filter_bank(8, k)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(t, n))
    hist = SeriesHistory.from_arrays(x, rng.normal(size=(max(t - 1, 0), 1)))
    fv = FeatureMap(bank, W, 2, L).features(hist)
    C, S = features_direct(x.tolist(), t, bank.filters, bank.eigenvalues, W, L)
    assert np.allclose(fv.cos, C, atol=1e-12) and np.allclose(fv.sin, S, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 7), st.integers(1, 4), st.integers(1, 3), st.integers(0, 6), st.integers(0, 10_000))
def test_batch_and_online_paths_agree(W, tau, n, L, seed):
    rng = np.random.default_rng(seed)
    bank = compute_filter_bank(30, 4)
    T = 45
    x, y = rng.normal(size=(T, n)), rng.normal(size=(T, 2))
    fmap = FeatureMap(bank, W, tau, L)
    batch = fmap.batch_features(x, y)
    hist = SeriesHistory(n, 2)
    for t in range(T):
        hist.push_input(x[t])
        fv = fmap.features(hist)
        b = batch[t]
        for a, c in ((fv.cos, b.cos), (fv.sin, b.sin), (fv.x_lags, b.x_lags), (fv.y_lags, b.y_lags)):
            assert np.max(np.abs(a - c)) <= 1e-10
        hist.observe(y[t])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_features_linear_in_history(seed, c):
    rng = np.random.default_rng(seed)
    bank = compute_filter_bank(12, 3)
    fmap = FeatureMap(bank, 3, 2, 1)
    x1, x2 = rng.normal(size=(10, 2)), rng.normal(size=(10, 2))
    y1, y2 = rng.normal(size=(9, 1)), rng.normal(size=(9, 1))
    f = lambda x, y: fmap.features(SeriesHistory.from_arrays(x, y))
    lhs = f(x1 + c * x2, y1 + c * y2)
    a, b = f(x1, y1), f(x2, y2)
    for name in ("cos", "sin", "x_lags", "y_lags"):
        assert np.allclose(getattr(lhs, name), getattr(a, name) + c * getattr(b, name), atol=1e-12)


def test_feature_errors():
    bank = compute_filter_bank(10, 2)
    hist = SeriesHistory.from_arrays(np.zeros((3, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        compute_features(hist, bank, Dims(2, 3, 1, 1, 1))
    with pytest.raises(ValueError):
        compute_features(hist, bank, Dims(2, 2, 4, 1, 1))


# ---------------------------------------------------------------- history

def test_history_enforces_causality():
    h = SeriesHistory(1, 1)
    h.push_input([1.0])
    with pytest.raises(CausalityError):
        h.y(1)
    with pytest.raises(CausalityError):
        h.push_input([2.0])
    h.observe([5.0])
    assert h.y(1)[0] == 5.0 and h.y(0)[0] == 0.0
    h.push_input([2.0])
    with pytest.raises(CausalityError):
        h.y(2)
    with pytest.raises(CausalityError):
        h.x(3)
    assert h.outputs.shape == (1, 1)
    with pytest.raises(ValueError):
        h.outputs[0, 0] = 1.0


def test_history_lags_zero_padded():
    h = SeriesHistory.from_arrays(np.array([[1.0], [2.0]]), np.array([[7.0]]))
    assert h.input_lags(3).ravel().tolist() == [2.0, 1.0, 0.0]
    assert h.output_lags(3).ravel().tolist() == [7.0, 0.0, 0.0]


# ---------------------------------------------------------------- predict

def test_zero_theta_predicts_zero():
    dims = Dims(3, 2, 2, 2, 2)
    fv = compute_features(random_history(np.random.default_rng(0), 6, 2, 2), compute_filter_bank(8, 2), dims)
    assert predict(PseudoLDS.zeros(dims), fv).tolist() == [0.0, 0.0]


def test_previous_output_as_pseudo_lds():
    dims = Dims(2, 1, 1, 2, 3)
    theta = PseudoLDS.zeros(dims)
    theta = PseudoLDS(theta.M, theta.N, np.array([1.0, 0.0, 0.0]), theta.P)
    hist = random_history(np.random.default_rng(4), 5, 1, 2)
    fv = compute_features(hist, compute_filter_bank(8, 1), dims)
    assert np.array_equal(predict(theta, fv), hist.y(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["scalar", "matrix"]), st.integers(0, 2))
def test_predict_matches_direct_definition(seed, mode, L):
    rng = np.random.default_rng(seed)
    dims = Dims(2, 1, 1, 1, 1) if seed % 2 else Dims(3, 2, 2, 2, 2)
    bank = compute_filter_bank(6, dims.k)
    theta = random_theta(rng, dims, mode)
    t = 7
    x, y = rng.normal(size=(t, dims.n)), rng.normal(size=(t - 1, dims.m))
    fv = FeatureMap(bank, dims.W, dims.tau, L).features(SeriesHistory.from_arrays(x, y))
    ref = predict_direct(theta.M, theta.N, theta.beta, theta.P, x.tolist(), y.tolist(), t, bank.filters,
                         bank.eigenvalues, L)
    assert np.allclose(predict(theta, fv), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["scalar", "matrix"]), st.floats(-2, 2))
def test_predict_linear_in_parameters(seed, mode, c):
    rng = np.random.default_rng(seed)
    dims = Dims(3, 2, 2, 2, 3)
    a, b = random_theta(rng, dims, mode), random_theta(rng, dims, mode)
    fv = compute_features(random_history(rng, 9, 2, 2), compute_filter_bank(10, 2), dims)
    assert np.allclose(predict(a + b.scaled(c), fv), predict(a, fv) + c * predict(b, fv), atol=1e-11)


def test_design_matrix_consistent():
    rng = np.random.default_rng(3)
    dims = Dims(3, 2, 2, 3, 2)
    fv = compute_features(random_history(rng, 9, 2, 3), compute_filter_bank(10, 2), dims)
    for mode in ("scalar", "matrix"):
        th = random_theta(rng, dims, mode)
        assert np.allclose(design_matrix(fv, mode) @ th.to_vector(), predict(th, fv), atol=1e-12)


def test_predict_sequence_matches_online():
    rng = np.random.default_rng(8)
    dims = Dims(4, 3, 2, 2, 3)
    bank = compute_filter_bank(25, 3)
    fmap = FeatureMap(bank, 4, 3)
    th = random_theta(rng, dims, "matrix")
    x, y = rng.normal(size=(25, 2)), rng.normal(size=(25, 2))
    seq = predict_sequence(th, fmap, x, y)
    for t in range(1, 26):
        fv = fmap.features(SeriesHistory.from_arrays(x[:t], y[: t - 1]))
        assert np.allclose(seq[t - 1], predict(th, fv), atol=1e-11)


def test_shape_mismatch_raises():
    dims = Dims(2, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        predict(PseudoLDS.zeros(Dims(3, 1, 1, 1, 1)), zero_fv(dims))
    with pytest.raises(ValueError):
        PseudoLDS(np.zeros((2, 1, 1, 1)), np.zeros((2, 1, 1, 2)), np.zeros(1), np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        PseudoLDS(np.zeros((2, 1, 1, 1)), np.zeros((2, 1, 1, 1)), np.array([np.nan]), np.zeros((1, 1, 1)))


# ---------------------------------------------------------------- perturbation locality

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 10_000))
def test_single_output_perturbation_is_local(tau, u, seed):
    rng = np.random.default_rng(seed)
    dims = Dims(2, 2, 1, 2, tau)
    theta = PseudoLDS(np.zeros((2, 2, 2, 1)), np.zeros((2, 2, 2, 1)), rng.normal(size=tau), np.zeros((tau, 2, 1)))
    fmap = FeatureMap(compute_filter_bank(30, 2), 2, tau)
    T = u + tau + 5
    xi = rng.normal(size=2)
    y = np.zeros((T, 2))
    y[u - 1] = xi
    hist = SeriesHistory(1, 2)
    for t in range(1, T + 1):
        hist.push_input([0.0])
        yhat = predict(theta, fmap.features(hist))
        if u < t <= u + tau:
            assert abs(np.linalg.norm(yhat) - abs(theta.beta[t - u - 1]) * np.linalg.norm(xi)) <= 1e-12
        else:
            assert np.all(yhat == 0.0)
        hist.observe(y[t - 1])


# ---------------------------------------------------------------- norms

def test_composite_norm_examples():
    dims = Dims(1, 1, 2, 1, 2)
    z = PseudoLDS.zeros(dims)
    assert composite_norm(z) == 0.0
    th = PseudoLDS(z.M, z.N, np.array([1.0, -2.0]), np.array([[[3.0, 4.0]], [[0.0, 0.0]]]))
    assert composite_norm(th) == pytest.approx(8.0)


def test_composite_norm_matrix_beta():
    dims = Dims(1, 1, 1, 2, 2)
    z = PseudoLDS.zeros(dims, "matrix")
    beta = np.zeros((2, 2, 2))
    beta[0] = [[3.0, 0.0], [0.0, 4.0]]
    th = PseudoLDS(z.M, z.N, beta, z.P)
    assert composite_norm(th) == pytest.approx(5.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["scalar", "matrix"]))
def test_composite_norm_homogeneous(seed, mode):
    th = random_theta(np.random.default_rng(seed), Dims(3, 2, 2, 2, 3), mode)
    assert composite_norm(th.scaled(-2.0)) == pytest.approx(2.0 * composite_norm(th), rel=1e-13)


def test_mixed_norm_examples():
    M = np.zeros((3, 1, 1, 2))
    M[1, 0, 0] = [3.0, 4.0]
    for q in (1, 1.5, 2, 7, math.inf):
        assert mixed_norm_2q(M, q) == pytest.approx(5.0)
    R = np.random.default_rng(0).normal(size=(4, 2, 3, 2))
    assert mixed_norm_2q(R, 2) == pytest.approx(np.linalg.norm(R.ravel()))
    two = np.zeros((2, 1, 1, 1))
    two[0], two[1] = 3.0, 4.0
    assert mixed_norm_2q(two, 1) == pytest.approx(7.0)
    assert mixed_norm_2q(two, math.inf) == 4.0
    with pytest.raises(ValueError):
        mixed_norm_2q(two, 0.5)


def test_q1_matches_composite_component():
    rng = np.random.default_rng(2)
    dims = Dims(3, 2, 2, 2, 2)
    th = random_theta(rng, dims)
    expected = (mixed_norm_2q(th.M, 1) + mixed_norm_2q(th.N, 1) + np.sum(np.abs(th.beta))
                + np.linalg.norm(th.P.ravel()))
    assert composite_norm(th) == pytest.approx(expected, rel=1e-14)


# ---------------------------------------------------------------- regularizer

def test_exponent_formula():
    assert exponent_for(math.e ** 2) == pytest.approx(2.0)
    assert exponent_for(100) == pytest.approx(math.log(100) / (math.log(100) - 1))
    assert exponent_for(1) is None and exponent_for(2) is None


def test_regularizer_zero_and_fallback_flags():
    assert regularizer(PseudoLDS.zeros(Dims(8, 2, 1, 1, 4))) == 0.0
    assert regularizer_exponents(1, 1)[2] == ["q_fallback", "q_prime_fallback"]
    assert regularizer_exponents(2, 10)[2] == ["q_fallback"]
    q, qp, flags = regularizer_exponents(16, 10)
    assert flags == [] and q > 1 and qp > 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 20), st.integers(3, 12))
def test_regularizer_matches_hand_formula(seed, W, tau):
    rng = np.random.default_rng(seed)
    th = random_theta(rng, Dims(W, 2, 2, 1, tau))
    q = math.log(W) / (math.log(W) - 1)
    qp = math.log(tau) / (math.log(tau) - 1)
    blocks = lambda X: [math.sqrt(sum(v * v for v in X[p].ravel())) for p in range(X.shape[0])]
    mq = sum(b ** q for b in blocks(th.M)) ** (2 / q)
    nq = sum(b ** q for b in blocks(th.N)) ** (2 / q)
    bq = sum(abs(b) ** qp for b in th.beta) ** (2 / qp)
    ref = mq + nq + bq + float(np.sum(th.P ** 2))
    assert regularizer(th) == pytest.approx(ref, rel=1e-12)


def test_regularizer_vanishes_only_at_zero():
    th = PseudoLDS.zeros(Dims(4, 1, 1, 1, 3))
    beta = th.beta.copy()
    beta[1] = 1e-3
    th2 = PseudoLDS(th.M, th.N, beta, th.P)
    assert regularizer(th2) > 0 and composite_norm(th2) > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["scalar", "matrix"]))
def test_regularizer_gradient_finite_difference(seed, mode):
    rng = np.random.default_rng(seed)
    dims = Dims(5, 2, 1, 2, 4)
    th = random_theta(rng, dims, mode)
    g = regularizer_gradient(th).to_vector()
    v = th.to_vector()
    for i in rng.choice(v.size, 10, replace=False):
        e = np.zeros_like(v)
        e[i] = 1e-6
        fd = (regularizer(PseudoLDS.from_vector(v + e, dims, mode))
              - regularizer(PseudoLDS.from_vector(v - e, dims, mode))) / 2e-6
        assert fd == pytest.approx(g[i], rel=1e-5, abs=1e-7)


# ---------------------------------------------------------------- loss and gradient

def test_loss_examples():
    dims = Dims(1, 1, 1, 2, 1)
    fv = zero_fv(dims)
    th = PseudoLDS.zeros(dims)
    assert loss(th, fv, [0.0, 0.0]) == 0.0
    assert loss(th, fv, [3.0, 4.0]) == 25.0


def test_zero_residual_zero_gradient():
    rng = np.random.default_rng(0)
    dims = Dims(2, 2, 2, 2, 2)
    fv = compute_features(random_history(rng, 6, 2, 2), compute_filter_bank(8, 2), dims)
    th = random_theta(rng, dims)
    g = gradient(th, fv, predict(th, fv))
    assert not np.any(g.to_vector())


def test_gradient_linear_in_residual():
    rng = np.random.default_rng(1)
    dims = Dims(2, 2, 2, 2, 2)
    fv = compute_features(random_history(rng, 6, 2, 2), compute_filter_bank(8, 2), dims)
    th = random_theta(rng, dims)
    yhat = predict(th, fv)
    r = rng.normal(size=2)
    g1 = gradient(th, fv, yhat - r).to_vector()
    g2 = gradient(th, fv, yhat - 2 * r).to_vector()
    assert np.allclose(g2, 2 * g1, rtol=1e-12, atol=1e-14)


def fd_gradient_check(seed, mode, h=1e-6):
    rng = np.random.default_rng(seed)
    dims = Dims(int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    bank = compute_filter_bank(6, dims.k)
    hist = random_history(rng, 6, dims.n, dims.m)
    fv = FeatureMap(bank, dims.W, dims.tau).features(hist)
    th = random_theta(rng, dims, mode)
    y = rng.normal(size=dims.m)
    g = gradient(th, fv, y).to_vector()
    v = th.to_vector()
    worst = 0.0
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        fd = (loss(PseudoLDS.from_vector(v + e, dims, mode), fv, y)
              - loss(PseudoLDS.from_vector(v - e, dims, mode), fv, y)) / (2 * h)
        # relative error, with an absolute floor for coordinates whose gradient is ~0
        worst = max(worst, abs(fd - g[i]) / max(abs(g[i]), 1.0))
    return worst


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("mode", ["scalar", "matrix"])
def test_gradient_finite_differences(seed, mode):
    assert fd_gradient_check(seed, mode) <= 1e-5


# ---------------------------------------------------------------- serialization

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["scalar", "matrix"]))
def test_json_round_trip_bit_exact(seed, mode):
    rng = np.random.default_rng(seed)
    th = random_theta(rng, Dims(3, 2, 2, 2, 2), mode)
    th = th.scaled(10.0 ** rng.integers(-300, 300))
    back = PseudoLDS.from_json(th.to_json())
    assert np.array_equal(back.to_vector(), th.to_vector())
    assert back.beta_mode == mode


def test_vector_round_trip():
    dims = Dims(2, 3, 1, 2, 4)
    v = np.arange(dims.size("matrix"), dtype=float)
    assert np.array_equal(PseudoLDS.from_vector(v, dims, "matrix").to_vector(), v)
    with pytest.raises(ValueError):
        PseudoLDS.from_vector(v[:-1], dims, "matrix")
