"""Orthogonal DCT-II matrix and the mode-3 (tube) transform.

Tensors are plain ``float64`` arrays of shape ``(m, n, C)``; the last axis is
the tube. The transform is a direct ``C x C`` matrix product per tube, which is
exact and cheap for the small channel counts used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ChannelError, InvalidDimensionError, ShapeError

__all__ = ["DctPlan", "build_dct_plan", "get_plan", "dct3", "idct3", "as_tensor3"]


@dataclass(frozen=True, eq=False)
class DctPlan:
    """Precomputed DCT-II matrix ``forward`` (rows = frequency) and its transpose."""

    size: int
    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        if self.forward.shape != (self.size, self.size):
            raise ShapeError(f"forward matrix must be {self.size}x{self.size}")
        for m in (self.forward, self.inverse):
            m.setflags(write=False)


def dct_matrix(C: int) -> np.ndarray:
    j = np.arange(C)[:, None]
    k = np.arange(C)[None, :]
    phi = np.sqrt(2.0 / C) * np.cos(np.pi * (2 * k + 1) * j / (2 * C))
    phi[0, :] = np.sqrt(1.0 / C)
    return phi


def build_dct_plan(C: int) -> DctPlan:
    """Build the orthogonal DCT-II plan for tubes of length ``C``.

    >>> build_dct_plan(1).forward
    array([[1.]])
    """
    if isinstance(C, bool) or not isinstance(C, (int, np.integer)) or C < 1:
        raise InvalidDimensionError(f"DCT size must be a positive integer, got {C!r}")
    C = int(C)
    phi = dct_matrix(C)
    return DctPlan(size=C, forward=phi, inverse=np.ascontiguousarray(phi.T))


@lru_cache(maxsize=None)
def get_plan(C: int) -> DctPlan:
    """Cached :func:`build_dct_plan`; plans are immutable so sharing is safe."""
    return build_dct_plan(C)


def as_tensor3(x, name: str = "tensor") -> np.ndarray:
    """Validate and coerce ``x`` into a finite float64 third-order tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be third-order (m, n, C), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_plan(x: np.ndarray, plan: DctPlan) -> None:
    if x.shape[-1] != plan.size:
        raise ChannelError(
            f"tube length {x.shape[-1]} does not match plan size {plan.size}"
        )


def dct3(X, plan: DctPlan) -> np.ndarray:
    """Mode-3 DCT: every tube ``X[i, j, :]`` is mapped to ``forward @ tube``."""
    X = as_tensor3(X)
    _check_plan(X, plan)
    return X @ plan.inverse


def idct3(Xhat, plan: DctPlan) -> np.ndarray:
    """Inverse of :func:`dct3` (multiplies every tube by ``forward.T``)."""
    Xhat = as_tensor3(Xhat)
    _check_plan(Xhat, plan)
    return Xhat @ plan.forward


def tube_transform(x: np.ndarray, plan: DctPlan, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """Apply the DCT (or its inverse) along ``axis`` of an array of any rank.

    Used by the batched model code, where the tube axis is not necessarily last.
    """
    if x.shape[axis] != plan.size:
        raise ChannelError(f"axis {axis} has length {x.shape[axis]}, plan size {plan.size}")
    if plan.size == 1:
        return x.copy()
    mat = plan.inverse if inverse else plan.forward
    moved = np.moveaxis(x, axis, 0)
    out = mat @ moved.reshape(plan.size, -1)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)
