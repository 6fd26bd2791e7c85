"""Patch tensorization, embeddings, encoder blocks and the classification head.

Both variants share one code path. The tensor variant keeps each patch as a
``P*P x C`` matrix and runs the encoder with tube length ``C``. The flattened
baseline projects each ``P*P*C`` patch vector with a learned matrix and runs the
same encoder with tube length 1, where every transform is the identity.

Activations inside the encoder stay in the DCT domain, laid out
``(B, C, T, d)``; they only cross to the spatial domain around the GELU and
when the class token is handed to the head.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from typing import Callable, Iterator

import numpy as np

from .config import ModelConfig
from .errors import ShapeError
from .layers import (
    HeadParams,
    TLayerNormParams,
    TLinearParams,
    attention_hat,
    gelu,
    key_projection,
    layernorm_stats,
    linear_hat,
    merge_heads,
    split_heads,
)
from .tape import GradTape
from .transform import DctPlan, get_plan, tube_transform

__all__ = [
    "LayerParams",
    "EncoderParams",
    "init_params",
    "patchify",
    "unpatchify",
    "embed",
    "block_forward",
    "encoder_forward",
    "predict",
]

INIT_STD = 0.02


@dataclass
class LayerParams:
    ln1: TLayerNormParams
    attn: HeadParams
    ln2: TLayerNormParams
    ff1: TLinearParams
    ff2: TLinearParams


@dataclass
class EncoderParams:
    cls: np.ndarray  # (1, d, C), spatial
    pos: np.ndarray  # (N+1, d, C), spatial
    layers: list[LayerParams]
    final_ln: TLayerNormParams
    head_w: np.ndarray  # (d*C, num_classes)
    head_b: np.ndarray  # (num_classes,)
    patch_w: np.ndarray | None = None  # (d_eff, d_eff), flattened baseline only
    patch_b: np.ndarray | None = None

    def named_arrays(self) -> dict[str, np.ndarray]:
        """All learnable arrays keyed by dotted path, in a fixed order.

        The arrays are the live objects, so in-place updates through this dict
        modify the parameters.
        """
        return dict(_walk(self, ""))

    def num_params(self) -> int:
        return sum(a.size for a in self.named_arrays().values())

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "EncoderParams":
        """Structural copy with ``fn`` applied to every array."""
        return _rebuild(self, fn)

    def zeros_like(self) -> "EncoderParams":
        return self.map(np.zeros_like)

    def copy(self) -> "EncoderParams":
        return self.map(np.copy)

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite every parameter in place from a name -> array mapping."""
        mine = self.named_arrays()
        missing = sorted(set(mine) - set(arrays))
        extra = sorted(set(arrays) - set(mine))
        if missing or extra:
            raise ShapeError(f"parameter names differ; missing={missing[:3]} extra={extra[:3]}")
        for name, dst in mine.items():
            src = np.asarray(arrays[name])
            if src.shape != dst.shape:
                raise ShapeError(f"{name}: expected shape {dst.shape}, got {src.shape}")
            dst[...] = src


def _walk(obj, prefix: str) -> Iterator[tuple[str, np.ndarray]]:
    if isinstance(obj, np.ndarray):
        yield prefix, obj
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            yield from _walk(item, f"{prefix}.{i}")
    elif is_dataclass(obj):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None or isinstance(value, float):
                continue
            yield from _walk(value, f"{prefix}.{f.name}" if prefix else f.name)


def _rebuild(obj, fn):
    if isinstance(obj, np.ndarray):
        return fn(obj)
    if isinstance(obj, list):
        return [_rebuild(item, fn) for item in obj]
    if is_dataclass(obj):
        kwargs = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            kwargs[f.name] = value if value is None or isinstance(value, float) else _rebuild(value, fn)
        return type(obj)(**kwargs)
    raise TypeError(f"cannot rebuild {type(obj).__name__}")


def _empty_params(config: ModelConfig) -> EncoderParams:
    C, d, H, dh, dff, T = config.channels, config.d, config.H, config.d_h, config.d_ff, config.tokens
    layers = [
        LayerParams(
            ln1=TLayerNormParams.default(d, C),
            attn=HeadParams(
                wq=[TLinearParams.zeros(d, dh, C) for _ in range(H)],
                wk=[TLinearParams.zeros(d, dh, C) for _ in range(H)],
                wv=[TLinearParams.zeros(d, dh, C) for _ in range(H)],
                wo=TLinearParams.zeros(d, d, C),
            ),
            ln2=TLayerNormParams.default(d, C),
            ff1=TLinearParams.zeros(d, dff, C),
            ff2=TLinearParams.zeros(dff, d, C),
        )
        for _ in range(config.L)
    ]
    params = EncoderParams(
        cls=np.zeros((1, d, C)),
        pos=np.zeros((T, d, C)),
        layers=layers,
        final_ln=TLayerNormParams.default(d, C),
        head_w=np.zeros((d * C, config.num_classes)),
        head_b=np.zeros(config.num_classes),
    )
    if config.variant == "std":
        params.patch_w = np.zeros((config.d_eff, config.d_eff))
        params.patch_b = np.zeros(config.d_eff)
    return params


def is_weight(name: str) -> bool:
    """Names of the matrices/tensors that get random initialization."""
    return name.endswith(".w") or name in ("head_w", "patch_w")


def truncated_normal(rng: np.random.Generator, shape, std: float, bound: float = 2.0) -> np.ndarray:
    """Normal(0, std) truncated to +-bound*std by resampling, in C order."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out * std


def init_params(config: ModelConfig, seed: int | None = None) -> EncoderParams:
    """Deterministic initialization.

    Weights are truncated-normal(0, 0.02) in their stored (DCT) domain, drawn in
    :meth:`EncoderParams.named_arrays` order from one generator seeded with
    ``seed`` (default ``config.seed``). Biases, ``cls`` and ``pos`` start at
    zero, layer norm scales at one.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = _empty_params(config)
    for name, arr in params.named_arrays().items():
        if is_weight(name):
            arr[...] = truncated_normal(rng, arr.shape, INIT_STD)
    return params


# --- patches and embeddings ---------------------------------------------


def patchify(image: np.ndarray, config: ModelConfig) -> np.ndarray:
    """``(..., H, W, C)`` image(s) to ``(..., N, P*P, C)`` patch tensors.

    Patches are taken row-major over the patch grid; pixels inside a patch are
    row-major along the second mode.
    """
    image = np.asarray(image, dtype=np.float64)
    want = (config.img_h, config.img_w, config.C)
    if image.shape[-3:] != want:
        raise ShapeError(f"expected image shape {want}, got {image.shape[-3:]}")
    P = config.P
    lead = image.shape[:-3]
    gh, gw = config.img_h // P, config.img_w // P
    x = image.reshape(*lead, gh, P, gw, P, config.C)
    n = len(lead)
    x = np.moveaxis(x, n + 2, n + 1)  # (..., gh, gw, P, P, C)
    return x.reshape(*lead, gh * gw, P * P, config.C)


def unpatchify(patches: np.ndarray, config: ModelConfig) -> np.ndarray:
    P = config.P
    lead = patches.shape[:-3]
    gh, gw = config.img_h // P, config.img_w // P
    x = patches.reshape(*lead, gh, gw, P, P, config.C)
    n = len(lead)
    x = np.moveaxis(x, n + 1, n + 2)
    return x.reshape(*lead, config.img_h, config.img_w, config.C)


def embed(patches: np.ndarray, params: EncoderParams, config: ModelConfig, cache: dict | None = None) -> np.ndarray:
    """Prepend the class token and add positions: ``(..., N, P*P, C) -> (..., N+1, d, C')``.

    For the flattened baseline each patch is first flattened to ``P*P*C``
    (channel index fastest) and projected by ``patch_w``; the result has tube
    length 1.
    """
    if patches.shape[-3:] != (config.N, config.P * config.P, config.C):
        raise ShapeError(f"patch tensor has shape {patches.shape[-3:]}")
    lead = patches.shape[:-3]
    if config.variant == "std":
        flat = patches.reshape(*lead, config.N, config.d_eff)
        if cache is not None:
            cache["flat"] = flat
        tokens = (flat @ params.patch_w + params.patch_b)[..., None]
    else:
        tokens = patches
    cls = np.broadcast_to(params.cls, lead + params.cls.shape)
    return np.concatenate([cls, tokens], axis=-3) + params.pos


# --- encoder --------------------------------------------------------------


def _ln(xh: np.ndarray, p: TLayerNormParams, cache: dict | None, key: str) -> np.ndarray:
    xc, sigma = layernorm_stats(xh)
    xn = xc / (sigma + p.eps)
    if cache is not None:
        cache[key] = (xn, sigma)
    g = np.moveaxis(p.gamma, -1, 0)
    b = np.moveaxis(p.beta, -1, 0)
    return g * xn + b


def block_forward_hat(xh: np.ndarray, lp: LayerParams, plan: DctPlan, cache: dict | None = None) -> np.ndarray:
    """One pre-norm block on DCT-domain activations ``(..., C, T, d)``.

    Residual additions happen in the DCT domain (they are linear).
    """
    H = lp.attn.num_heads
    u = _ln(xh, lp.ln1, cache, "ln1")
    q = split_heads(linear_hat(u, lp.attn.stacked("wq")), H)
    k = split_heads(key_projection(u, lp.attn), H)
    v = split_heads(linear_hat(u, lp.attn.stacked("wv")), H)
    o, a = attention_hat(q, k, v)
    m = merge_heads(o)
    y = xh + linear_hat(m, lp.attn.wo)

    u2 = _ln(y, lp.ln2, cache, "ln2")
    h = tube_transform(linear_hat(u2, lp.ff1), plan, axis=-3, inverse=True)
    gh = tube_transform(gelu(h), plan, axis=-3)
    out = y + linear_hat(gh, lp.ff2)
    if cache is not None:
        cache.update(u=u, q=q, k=k, v=v, a=a, m=m, u2=u2, h=h, gh=gh)
    return out


def block_forward(X: np.ndarray, lp: LayerParams, plan: DctPlan) -> np.ndarray:
    """Spatial-domain block: ``(T, d, C) -> (T, d, C)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ShapeError(f"block input must be (T, d, C), got {X.shape}")
    xh = tube_transform(np.moveaxis(X, -1, 0), plan, axis=0)
    out = block_forward_hat(xh, lp, plan)
    return np.ascontiguousarray(np.moveaxis(tube_transform(out, plan, axis=0, inverse=True), 0, -1))


def encoder_forward(
    images: np.ndarray,
    params: EncoderParams,
    config: ModelConfig,
    tape: GradTape | None = None,
) -> np.ndarray:
    """Logits for one image ``(H, W, C)`` or a batch ``(B, H, W, C)``.

    Pass a fresh :class:`GradTape` to record what the backward pass needs.
    """
    images = np.asarray(images, dtype=np.float64)
    single = images.ndim == 3
    if single:
        images = images[None]
    plan = get_plan(config.channels)
    B = images.shape[0]

    emb_cache = tape.embed if tape is not None else None
    x0 = embed(patchify(images, config), params, config, emb_cache)  # (B, T, d, C)
    xh = tube_transform(np.moveaxis(x0, -1, 1), plan, axis=1)  # (B, C, T, d)

    for lp in params.layers:
        cache = {} if tape is not None else None
        xh = block_forward_hat(xh, lp, plan, cache)
        if tape is not None:
            tape.layers.append(cache)

    head_cache = tape.head if tape is not None else None
    zh = _ln(xh, params.final_ln, head_cache, "ln")
    cls_spatial = tube_transform(zh[:, :, 0, :], plan, axis=1, inverse=True)  # (B, C, d)
    feat = np.swapaxes(cls_spatial, 1, 2).reshape(B, -1)  # row-major over (d, C)
    logits = feat @ params.head_w + params.head_b
    if tape is not None:
        tape.inputs.update(images=images, batch=B, single=single)
        head_cache["feat"] = feat
    return logits[0] if single else logits


def predict(images: np.ndarray, params: EncoderParams, config: ModelConfig, batch_size: int = 100) -> np.ndarray:
    """Logits for a large image array, evaluated in fixed-size chunks."""
    out = [encoder_forward(images[i : i + batch_size], params, config) for i in range(0, len(images), batch_size)]
    return np.concatenate(out, axis=0)
