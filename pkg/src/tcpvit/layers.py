"""Tensorized transformer layers.

Two levels are provided:

* ``t_*`` functions take and return spatial ``(N, d, C)`` tensors and follow
  the layer definitions literally (transform in, slice-wise work, transform out).
* ``*_hat`` kernels work on DCT-domain activations laid out channel-major,
  ``(..., C, T, n)``, so that a batch of frontal slices is one ``matmul``.
  The encoder chains these without leaving the transform domain except
  around the GELU.

Weights and biases are stored in the DCT domain with shapes ``(d_in, d_out, C)``
and ``(1, d_out, C)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .ctensor import slices, unslices
from .errors import ConfigError, ShapeError
from .transform import DctPlan, as_tensor3, dct3, idct3, tube_transform

__all__ = [
    "TLinearParams",
    "TLayerNormParams",
    "HeadParams",
    "gelu",
    "gelu_grad",
    "t_linear",
    "t_softmax",
    "t_attention",
    "t_mhsa",
    "t_layernorm",
    "t_ffn",
]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass
class TLinearParams:
    w: np.ndarray  # (d_in, d_out, C), DCT domain
    b: np.ndarray  # (1, d_out, C), DCT domain

    @classmethod
    def zeros(cls, d_in: int, d_out: int, C: int) -> "TLinearParams":
        return cls(np.zeros((d_in, d_out, C)), np.zeros((1, d_out, C)))

    @property
    def d_in(self) -> int:
        return self.w.shape[0]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]


@dataclass
class TLayerNormParams:
    gamma: np.ndarray  # (1, d, C)
    beta: np.ndarray  # (1, d, C)
    eps: float = 1e-5

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("layer norm eps must be positive")

    @classmethod
    def default(cls, d: int, C: int, eps: float = 1e-5) -> "TLayerNormParams":
        return cls(np.ones((1, d, C)), np.zeros((1, d, C)), eps)


@dataclass
class HeadParams:
    wq: list[TLinearParams]
    wk: list[TLinearParams]
    wv: list[TLinearParams]
    wo: TLinearParams

    @property
    def num_heads(self) -> int:
        return len(self.wq)

    def stacked(self, which: str) -> TLinearParams:
        """Concatenate the per-head projections along the output axis."""
        ps = getattr(self, which)
        return TLinearParams(
            np.concatenate([p.w for p in ps], axis=1),
            np.concatenate([p.b for p in ps], axis=1),
        )


# --- element-wise --------------------------------------------------------


def gelu(x):
    """Exact GELU, ``x * Phi(x)`` with the normal CDF written through erf."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


# --- DCT-domain kernels (channel-major) ----------------------------------


def linear_hat(xh: np.ndarray, p: TLinearParams) -> np.ndarray:
    if xh.shape[-1] != p.d_in or xh.shape[-3] != p.w.shape[-1]:
        raise ShapeError(
            f"input {xh.shape} incompatible with weight {p.w.shape}"
        )
    return xh @ slices(p.w) + slices(p.b)


def softmax_rows(s: np.ndarray) -> np.ndarray:
    z = s - np.max(s, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def attention_hat(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled attention on DCT-domain slices; returns (output, attention weights)."""
    if q.shape != k.shape or q.shape != v.shape:
        raise ShapeError(f"q/k/v shapes differ: {q.shape}, {k.shape}, {v.shape}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    a = softmax_rows((q @ np.swapaxes(k, -1, -2)) * scale)
    return a @ v, a


def split_heads(x: np.ndarray, H: int) -> np.ndarray:
    """``(..., C, T, H*dh) -> (..., C, H, T, dh)``"""
    *lead, T, d = x.shape
    return np.swapaxes(x.reshape(*lead, T, H, d // H), -2, -3)


def merge_heads(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`split_heads` (mode-2 concatenation in head order)."""
    *lead, H, T, dh = x.shape
    return np.swapaxes(x, -2, -3).reshape(*lead, T, H * dh)


def key_projection(xh: np.ndarray, p: HeadParams) -> np.ndarray:
    """Keys without their bias.

    A key bias adds ``q . b`` to every entry of a score row, which the row-wise
    softmax cancels exactly, so it is never applied. It stays a parameter (and
    is counted) but has identically zero gradient.
    """
    return xh @ slices(p.stacked("wk").w)


def mhsa_hat(xh: np.ndarray, p: HeadParams) -> np.ndarray:
    H = p.num_heads
    if xh.shape[-1] % H:
        raise ConfigError(f"d={xh.shape[-1]} is not divisible by H={H}")
    q = split_heads(linear_hat(xh, p.stacked("wq")), H)
    k = split_heads(key_projection(xh, p), H)
    v = split_heads(linear_hat(xh, p.stacked("wv")), H)
    o, _ = attention_hat(q, k, v)
    return linear_hat(merge_heads(o), p.wo)


def layernorm_stats(xh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered input and population standard deviation per (token, slice)."""
    xc = xh - np.mean(xh, axis=-1, keepdims=True)
    sigma = np.sqrt(np.mean(xc * xc, axis=-1, keepdims=True))
    return xc, sigma


def layernorm_hat(xh: np.ndarray, p: TLayerNormParams) -> np.ndarray:
    if xh.shape[-1] != p.gamma.shape[1] or xh.shape[-3] != p.gamma.shape[2]:
        raise ShapeError(f"input {xh.shape} incompatible with LN params {p.gamma.shape}")
    xc, sigma = layernorm_stats(xh)
    return slices(p.gamma) * (xc / (sigma + p.eps)) + slices(p.beta)


def ffn_hat(xh: np.ndarray, p1: TLinearParams, p2: TLinearParams, plan: DctPlan) -> np.ndarray:
    h = tube_transform(linear_hat(xh, p1), plan, axis=-3, inverse=True)
    return linear_hat(tube_transform(gelu(h), plan, axis=-3), p2)


# --- spatial-domain definitions ------------------------------------------


def to_hat(X: np.ndarray, plan: DctPlan) -> np.ndarray:
    """Spatial ``(m, n, C)`` to channel-major DCT domain ``(C, m, n)``."""
    return slices(dct3(X, plan))


def from_hat(Xh: np.ndarray, plan: DctPlan) -> np.ndarray:
    return idct3(unslices(Xh), plan)


def t_linear(X, p: TLinearParams, plan: DctPlan) -> np.ndarray:
    """Tensor linear projection ``X *_c W`` plus a DCT-domain bias."""
    return from_hat(linear_hat(to_hat(as_tensor3(X), plan), p), plan)


def t_softmax(S, plan: DctPlan) -> np.ndarray:
    """Row-wise softmax of each DCT-domain slice, returned in the spatial domain.

    The normalized values live in the transform domain; ``dct3`` of the result
    recovers them, so each of its rows sums to one per slice.
    """
    S = as_tensor3(S, "S")
    if S.shape[0] != S.shape[1]:
        raise ShapeError(f"t_softmax expects N x N x C, got {S.shape}")
    return from_hat(softmax_rows(to_hat(S, plan)), plan)


def t_attention(Q, K, V, plan: DctPlan) -> np.ndarray:
    o, _ = attention_hat(to_hat(as_tensor3(Q), plan), to_hat(as_tensor3(K), plan), to_hat(as_tensor3(V), plan))
    return from_hat(o, plan)


def t_mhsa(X, p: HeadParams, plan: DctPlan) -> np.ndarray:
    return from_hat(mhsa_hat(to_hat(as_tensor3(X), plan), p), plan)


def t_layernorm(X, p: TLayerNormParams, plan: DctPlan) -> np.ndarray:
    """Normalize each (token, slice) row in the DCT domain.

    The denominator is ``sigma + eps`` with the population standard deviation,
    not the more common ``sqrt(var + eps)``.
    """
    return from_hat(layernorm_hat(to_hat(as_tensor3(X), plan), p), plan)


def t_ffn(X, p1: TLinearParams, p2: TLinearParams, plan: DctPlan) -> np.ndarray:
    return from_hat(ffn_hat(to_hat(as_tensor3(X), plan), p1, p2, plan), plan)
