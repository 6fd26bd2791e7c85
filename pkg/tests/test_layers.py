import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcpvit.ctensor import cprod, ctranspose
from tcpvit.errors import ShapeError
from tcpvit.layers import (
    HeadParams,
    TLayerNormParams,
    TLinearParams,
    gelu,
    gelu_grad,
    mhsa_hat,
    softmax_rows,
    t_attention,
    t_ffn,
    t_layernorm,
    t_linear,
    t_mhsa,
    t_softmax,
    to_hat,
)
from tcpvit.transform import dct3, get_plan, idct3


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def lin(rng, a, b, C, scale=0.5):
    return TLinearParams(scale * rng.standard_normal((a, b, C)), scale * rng.standard_normal((1, b, C)))


def heads(rng, d, H, C):
    dh = d // H
    return HeadParams(
        [lin(rng, d, dh, C) for _ in range(H)],
        [lin(rng, d, dh, C) for _ in range(H)],
        [lin(rng, d, dh, C) for _ in range(H)],
        lin(rng, d, d, C),
    )


def test_gelu_reference_values():
    assert gelu(0.0) == 0.0
    assert abs(gelu(1.0) - 0.8413447460685429) <= 1e-15
    assert abs(gelu(-1.0) + 0.15865525393145707) <= 1e-15
    x = np.linspace(-6, 6, 25)
    ref = [0.5 * v * (1 + math.erf(v / math.sqrt(2))) for v in x]
    np.testing.assert_allclose(gelu(x), ref, rtol=1e-15, atol=1e-15)


def test_gelu_grad_matches_difference():
    x = np.linspace(-4, 4, 41)
    h = 1e-6
    np.testing.assert_allclose(gelu_grad(x), (gelu(x + h) - gelu(x - h)) / (2 * h), atol=1e-9)


def test_softmax_stable_for_large_logits():
    s = np.array([[1000.0, 1000.0, -1000.0]])
    np.testing.assert_allclose(softmax_rows(s), [[0.5, 0.5, 0.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31))
def test_t_softmax_rows_sum_to_one_in_dct_domain(n, C, seed):
    S = 4 * np.random.default_rng(seed).standard_normal((n, n, C))
    pl = get_plan(C)
    A_hat = dct3(t_softmax(S, pl), pl)
    assert np.all(A_hat >= 0)
    assert np.max(np.abs(A_hat.sum(axis=1) - 1)) <= 1e-12


def test_t_softmax_needs_square():
    with pytest.raises(ShapeError):
        t_softmax(np.zeros((2, 3, 2)), get_plan(2))


def test_t_linear_is_cprod_plus_bias(rng):
    C = 3
    pl = get_plan(C)
    X = rng.standard_normal((5, 4, C))
    p = lin(rng, 4, 6, C)
    W_spatial = idct3(p.w, pl)
    b_spatial = idct3(p.b, pl)
    np.testing.assert_allclose(t_linear(X, p, pl), cprod(X, W_spatial, pl) + b_spatial, atol=1e-12)


def test_t_linear_shape_check(rng):
    with pytest.raises(ShapeError):
        t_linear(rng.standard_normal((5, 3, 2)), lin(rng, 4, 6, 2), get_plan(2))


def test_t_layernorm_normalizes_each_dct_row(rng):
    C = 4
    pl = get_plan(C)
    X = 3 + 2 * rng.standard_normal((6, 8, C))
    Y = dct3(t_layernorm(X, TLayerNormParams.default(8, C), pl), pl)
    np.testing.assert_allclose(Y.mean(axis=1), 0, atol=1e-12)
    sd = Y.std(axis=1)
    sigma = dct3(X, pl).std(axis=1)
    np.testing.assert_allclose(sd, sigma / (sigma + 1e-5), rtol=1e-12)


def test_t_layernorm_constant_rows_map_to_beta(rng):
    C = 2
    pl = get_plan(C)
    p = TLayerNormParams(rng.standard_normal((1, 3, C)), rng.standard_normal((1, 3, C)))
    Y = t_layernorm(np.ones((4, 3, C)), p, pl)
    np.testing.assert_allclose(dct3(Y, pl), np.broadcast_to(p.beta, (4, 3, C)), atol=1e-12)


@pytest.mark.parametrize("C", [1, 2, 3, 4])
def test_attention_fused_equals_literal(C, rng):
    pl = get_plan(C)
    Q, K, V = (rng.standard_normal((5, 2, C)) for _ in range(3))
    literal = cprod(t_softmax(cprod(Q, ctranspose(K, pl), pl) / np.sqrt(2), pl), V, pl)
    assert rel(t_attention(Q, K, V, pl), literal) <= 1e-12


@pytest.mark.parametrize("C", [1, 3, 4])
def test_mhsa_fused_equals_literal(C, rng):
    pl = get_plan(C)
    d, H = 6, 3
    hp = heads(rng, d, H, C)
    X = rng.standard_normal((5, d, C))
    outs = []
    for h in range(H):
        Q, K, V = (t_linear(X, getattr(hp, n)[h], pl) for n in ("wq", "wk", "wv"))
        outs.append(cprod(t_softmax(cprod(Q, ctranspose(K, pl), pl) / np.sqrt(d // H), pl), V, pl))
    literal = t_linear(np.concatenate(outs, axis=1), hp.wo, pl)
    assert rel(t_mhsa(X, hp, pl), literal) <= 1e-12


def test_key_bias_has_no_effect(rng):
    C = 3
    pl = get_plan(C)
    hp = heads(rng, 4, 2, C)
    X = rng.standard_normal((6, 4, C))
    base = t_mhsa(X, hp, pl)
    for p in hp.wk:
        p.b[...] = 10 * rng.standard_normal(p.b.shape)
    assert np.max(np.abs(t_mhsa(X, hp, pl) - base)) <= 1e-12


@pytest.mark.parametrize("C", [1, 3])
def test_ffn_fused_equals_literal(C, rng):
    pl = get_plan(C)
    X = rng.standard_normal((5, 4, C))
    p1, p2 = lin(rng, 4, 8, C), lin(rng, 8, 4, C)
    literal = t_linear(gelu(t_linear(X, p1, pl)), p2, pl)
    assert rel(t_ffn(X, p1, p2, pl), literal) <= 1e-12


def test_mhsa_batched_matches_single(rng):
    C = 2
    pl = get_plan(C)
    hp = heads(rng, 4, 2, C)
    Xs = rng.standard_normal((3, 5, 4, C))
    batched = mhsa_hat(np.stack([to_hat(x, pl) for x in Xs]), hp)
    for i, x in enumerate(Xs):
        np.testing.assert_allclose(batched[i], mhsa_hat(to_hat(x, pl), hp), atol=1e-13)


def test_c1_layers_are_standard(rng):
    pl = get_plan(1)
    X = rng.standard_normal((5, 4, 1))
    p = lin(rng, 4, 3, 1)
    np.testing.assert_allclose(t_linear(X, p, pl)[:, :, 0], X[:, :, 0] @ p.w[:, :, 0] + p.b[0, :, 0], atol=1e-14)
    S = rng.standard_normal((4, 4, 1))
    e = np.exp(S[:, :, 0] - S[:, :, 0].max(axis=1, keepdims=True))
    np.testing.assert_allclose(t_softmax(S, pl)[:, :, 0], e / e.sum(axis=1, keepdims=True), atol=1e-15)
