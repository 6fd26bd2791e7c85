"""Hand-written reverse-mode gradients.

All layer backwards act on DCT-domain, channel-major arrays ``(..., C, T, n)``
and mirror the kernels in :mod:`tcpvit.layers`. Because the transform is
orthogonal, the gradient with respect to a DCT-domain quantity is the DCT of
the gradient with respect to its spatial counterpart, so the stored (DCT)
weights receive exactly ``X_hat^T dY_hat`` per slice.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .ctensor import slices, unslices
from .layers import HeadParams, TLayerNormParams, TLinearParams, gelu_grad, merge_heads, split_heads
from .model import EncoderParams, LayerParams, encoder_forward
from .tape import GradTape
from .transform import DctPlan, get_plan, tube_transform

__all__ = [
    "GradTape",
    "t_linear_backward",
    "softmax_backward",
    "layernorm_backward",
    "gelu_backward",
    "attention_backward",
    "mhsa_backward",
    "ffn_backward",
    "block_backward",
    "encoder_backward",
    "loss_and_grads",
    "cross_entropy",
]


def _sum_lead(x: np.ndarray, keep: int) -> np.ndarray:
    """Sum over all leading axes so that ``keep`` trailing axes remain."""
    extra = x.ndim - keep
    return x.sum(axis=tuple(range(extra))) if extra > 0 else x


def t_linear_backward(dy: np.ndarray, xh: np.ndarray, p: TLinearParams) -> tuple[np.ndarray, TLinearParams]:
    """Backward of ``linear_hat``: returns ``dx`` and the gradients for ``(w, b)``.

    Per DCT slice: ``dW = X^T dY``, ``dX = dY W^T``, ``db`` = column sums of ``dY``.
    """
    if dy.shape[:-1] != xh.shape[:-1] or dy.shape[-1] != p.d_out:
        raise ValueError(f"upstream {dy.shape} does not match input {xh.shape} / weight {p.w.shape}")
    w = slices(p.w)
    dx = dy @ np.swapaxes(w, -1, -2)
    dw = _sum_lead(np.swapaxes(xh, -1, -2) @ dy, 3)  # (C, d_in, d_out)
    db = _sum_lead(dy, 3).sum(axis=-2, keepdims=True)  # (C, 1, d_out)
    return dx, TLinearParams(unslices(dw), unslices(db))


def softmax_backward(da: np.ndarray, a: np.ndarray) -> np.ndarray:
    return a * (da - np.sum(da * a, axis=-1, keepdims=True))


def layernorm_backward(
    dy: np.ndarray, xn: np.ndarray, sigma: np.ndarray, p: TLayerNormParams
) -> tuple[np.ndarray, TLayerNormParams]:
    """Backward of ``gamma * (x - mu) / (sigma + eps) + beta`` on each row."""
    d = xn.shape[-1]
    gamma = slices(p.gamma)
    dgamma = _sum_lead(dy * xn, 3).sum(axis=-2, keepdims=True)
    dbeta = _sum_lead(dy, 3).sum(axis=-2, keepdims=True)
    dxn = dy * gamma
    denom = sigma + p.eps
    s = np.sum(dxn * xn, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(sigma > 0, xn * s / (d * np.where(sigma > 0, sigma, 1.0)), 0.0)
    dxc = dxn / denom - corr
    dx = dxc - np.mean(dxc, axis=-1, keepdims=True)
    return dx, TLayerNormParams(unslices(dgamma), unslices(dbeta), p.eps)


def gelu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * gelu_grad(x)


def attention_backward(do, q, k, v, a):
    """Backward of ``softmax(q k^T / sqrt(dh)) v``; returns ``(dq, dk, dv)``."""
    scale = 1.0 / np.sqrt(q.shape[-1])
    da = do @ np.swapaxes(v, -1, -2)
    dv = np.swapaxes(a, -1, -2) @ do
    ds = softmax_backward(da, a) * scale
    dq = ds @ k
    dk = np.swapaxes(ds, -1, -2) @ q
    return dq, dk, dv


def _split_linear(g: TLinearParams, H: int) -> list[TLinearParams]:
    return [TLinearParams(w, b) for w, b in zip(np.split(g.w, H, axis=1), np.split(g.b, H, axis=1))]


def mhsa_backward(dout: np.ndarray, cache: dict, p: HeadParams) -> tuple[np.ndarray, HeadParams]:
    """Backward of ``mhsa_hat``; ``cache`` holds ``u`` (input) and ``q, k, v, a, m``."""
    H = p.num_heads
    u = cache["u"]
    dm, g_wo = t_linear_backward(dout, cache["m"], p.wo)
    do = split_heads(dm, H)
    dq, dk, dv = attention_backward(do, cache["q"], cache["k"], cache["v"], cache["a"])
    du = np.zeros_like(u)
    grads = {}
    for name, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
        dx, g = t_linear_backward(merge_heads(dproj), u, p.stacked(name))
        du += dx
        if name == "wk":
            g.b[...] = 0.0  # key bias is never applied; see layers.key_projection
        grads[name] = _split_linear(g, H)
    return du, HeadParams(grads["wq"], grads["wk"], grads["wv"], g_wo)


def ffn_backward(
    dout: np.ndarray, cache: dict, p1: TLinearParams, p2: TLinearParams, plan: DctPlan
) -> tuple[np.ndarray, TLinearParams, TLinearParams]:
    """Backward of ``ffn_hat``; ``cache`` holds ``u2`` (input), ``h`` (spatial pre-GELU), ``gh``."""
    dgh, g2 = t_linear_backward(dout, cache["gh"], p2)
    dg = tube_transform(dgh, plan, axis=-3, inverse=True)
    dh = gelu_backward(dg, cache["h"])
    dh_hat = tube_transform(dh, plan, axis=-3)
    du2, g1 = t_linear_backward(dh_hat, cache["u2"], p1)
    return du2, g1, g2


def block_backward(dout: np.ndarray, cache: dict, lp: LayerParams, plan: DctPlan) -> tuple[np.ndarray, LayerParams]:
    du2, g_ff1, g_ff2 = ffn_backward(dout, cache, lp.ff1, lp.ff2, plan)
    dy_ln, g_ln2 = layernorm_backward(du2, *cache["ln2"], lp.ln2)
    dy = dout + dy_ln
    du, g_attn = mhsa_backward(dy, cache, lp.attn)
    dx_ln, g_ln1 = layernorm_backward(du, *cache["ln1"], lp.ln1)
    return dy + dx_ln, LayerParams(g_ln1, g_attn, g_ln2, g_ff1, g_ff2)


def encoder_backward(dlogits: np.ndarray, tape: GradTape, params: EncoderParams, config: ModelConfig) -> EncoderParams:
    """Gradients of ``sum(dlogits * logits)`` with respect to every parameter."""
    plan = get_plan(config.channels)
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if tape.inputs.get("single"):
        dlogits = dlogits[None]
    B = tape.inputs["batch"]
    C, d = config.channels, config.d

    feat = tape.head["feat"]
    g_head_w = feat.T @ dlogits
    g_head_b = dlogits.sum(axis=0)
    dfeat = dlogits @ params.head_w.T  # (B, d*C)
    dcls = tube_transform(np.swapaxes(dfeat.reshape(B, d, C), 1, 2), plan, axis=1)  # (B, C, d)
    dzh = np.zeros((B, C, config.tokens, d))
    dzh[:, :, 0, :] = dcls
    dxh, g_final = layernorm_backward(dzh, *tape.head["ln"], params.final_ln)

    g_layers = [None] * len(params.layers)
    for i in reversed(range(len(params.layers))):
        dxh, g_layers[i] = block_backward(dxh, tape.layers[i], params.layers[i], plan)

    dx0 = np.moveaxis(tube_transform(dxh, plan, axis=1, inverse=True), 1, -1)  # (B, T, d, C)
    grads = EncoderParams(
        cls=dx0[:, :1].sum(axis=0),
        pos=dx0.sum(axis=0),
        layers=g_layers,
        final_ln=g_final,
        head_w=g_head_w,
        head_b=g_head_b,
    )
    if config.variant == "std":
        du = dx0[:, 1:, :, 0]  # (B, N, d_eff)
        flat = tape.embed["flat"]
        grads.patch_w = np.einsum("bni,bnj->ij", flat, du)
        grads.patch_b = du.sum(axis=(0, 1))
    return grads


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to ``logits``.

    Accepts a single logit vector with an integer label, or a ``(B, K)`` batch
    with ``B`` labels.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    y = np.atleast_1d(np.asarray(labels))
    K = z.shape[1]
    if y.shape != (z.shape[0],):
        raise ValueError(f"expected {z.shape[0]} labels, got shape {y.shape}")
    if np.any(y < 0) or np.any(y >= K):
        raise ValueError(f"label out of range [0, {K})")
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - lse[:, None]
    rows = np.arange(len(y))
    loss = float(-logp[rows, y].mean())
    grad = np.exp(logp)
    grad[rows, y] -= 1.0
    grad /= len(y)
    return loss, grad[0] if single else grad


def loss_and_grads(images, labels, params: EncoderParams, config: ModelConfig) -> tuple[float, np.ndarray, EncoderParams]:
    """Mean batch loss, logits, and the parameter gradients."""
    tape = GradTape()
    logits = encoder_forward(images, params, config, tape)
    loss, dlogits = cross_entropy(logits, labels)
    return loss, logits, encoder_backward(dlogits, tape, params, config)


# --- finite-difference oracle ---------------------------------------------

FD_STEP = 1e-5
REL_FLOOR = 1e-8


def numerical_grads(objective, params: EncoderParams, h: float = FD_STEP) -> dict[str, np.ndarray]:
    """Central differences of ``objective()`` for every parameter entry.

    ``objective`` is re-evaluated after each in-place perturbation of
    ``params``; every entry is restored afterwards.
    """
    out = {}
    for name, arr in params.named_arrays().items():
        g = np.empty_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = objective()
            flat[i] = old - h
            fm = objective()
            flat[i] = old
            gflat[i] = (fp - fm) / (2.0 * h)
        out[name] = g
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||, 1e-8)`` over one parameter tensor."""
    diff = np.linalg.norm(analytic - numeric)
    return float(diff / max(np.linalg.norm(analytic), np.linalg.norm(numeric), REL_FLOOR))


def gradcheck_instance(config: ModelConfig, seed: int, batch: int = 2, spread: float = 0.3):
    """Random parameters and a random batch for a gradient check.

    Parameters are the seeded initialization plus ``spread``-scaled Gaussian
    noise, so biases, positions and the class token are not all zero.
    """
    from .model import init_params

    rng = np.random.default_rng(seed)
    params = init_params(config, seed).map(lambda a: a + spread * rng.standard_normal(a.shape))
    images = rng.standard_normal((batch, config.img_h, config.img_w, config.C))
    labels = rng.integers(0, config.num_classes, size=batch)
    return params, images, labels


def gradcheck(config: ModelConfig, seed: int = 0, batch: int = 2) -> dict[str, tuple[float, float]]:
    """Compare analytic and numerical gradients of the mean cross-entropy.

    Returns ``{name: (relative_error, max_abs_error)}`` for every parameter tensor.
    """
    params, images, labels = gradcheck_instance(config, seed, batch)
    _, _, grads = loss_and_grads(images, labels, params, config)
    numeric = numerical_grads(lambda: cross_entropy(encoder_forward(images, params, config), labels)[0], params)
    report = {}
    for name, g in grads.named_arrays().items():
        n = numeric[name]
        report[name] = (relative_error(g, n), float(np.max(np.abs(g - n))))
    return report
