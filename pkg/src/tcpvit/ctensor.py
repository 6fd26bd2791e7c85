"""Cosine-product algebra on third-order tensors.

Every operation here is "transform, act on each frontal slice, transform
back". Functions ending in ``_hat`` skip the transforms and act directly on
DCT-domain tensors.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ChannelError, InvalidDimensionError, ShapeError, SingularSliceError
from .transform import DctPlan, as_tensor3, dct3, idct3

__all__ = [
    "slices",
    "unslices",
    "cprod",
    "cprod_hat",
    "ctranspose",
    "identity_tensor",
    "cinv",
    "is_f_diagonal",
    "is_f_symmetric",
    "is_f_orthogonal",
    "is_f_positive_definite",
]

DEFAULT_TOL = 1e-10
PIVOT_RTOL = 1e-12


def slices(X: np.ndarray) -> np.ndarray:
    """View ``(m, n, C)`` as a stack of frontal slices ``(C, m, n)``."""
    return np.moveaxis(X, -1, 0)


def unslices(S: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(S, 0, -1))


def _check_product(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[-1] != B.shape[-1]:
        raise ChannelError(f"channel mismatch: {A.shape[-1]} vs {B.shape[-1]}")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"inner dimensions differ: {A.shape} vs {B.shape}")


def cprod_hat(Ahat, Bhat) -> np.ndarray:
    """Slice-wise matrix product of two DCT-domain tensors (no transforms)."""
    Ahat = as_tensor3(Ahat, "Ahat")
    Bhat = as_tensor3(Bhat, "Bhat")
    _check_product(Ahat, Bhat)
    return unslices(slices(Ahat) @ slices(Bhat))


def cprod(A, B, plan: DctPlan) -> np.ndarray:
    """Cosine product ``A *_c B`` of ``(m, n, C)`` and ``(n, l, C)`` tensors."""
    A = as_tensor3(A, "A")
    B = as_tensor3(B, "B")
    _check_product(A, B)
    return idct3(cprod_hat(dct3(A, plan), dct3(B, plan)), plan)


def ctranspose(A, plan: DctPlan) -> np.ndarray:
    """c-transpose: transpose every DCT-domain frontal slice.

    Because the transform acts only along the tube, this is the same as
    transposing each spatial frontal slice; we still go through the
    transform domain so the definition is followed literally.
    """
    Ahat = dct3(A, plan)
    return idct3(np.swapaxes(Ahat, 0, 1), plan)


def identity_tensor(m: int, C: int, plan: DctPlan) -> np.ndarray:
    """The c-product identity: every DCT-domain slice equals ``I_m``.

    In the spatial domain each diagonal tube is ``forward.T @ ones`` (the
    column sums of the DCT matrix), not the "first slice identity, rest
    zero" tensor.
    """
    if m < 1 or C < 1:
        raise InvalidDimensionError(f"identity dims must be positive, got m={m}, C={C}")
    if plan.size != C:
        raise ChannelError(f"plan size {plan.size} does not match C={C}")
    hat = np.repeat(np.eye(m)[:, :, None], C, axis=2)
    return idct3(hat, plan)


def _square_slices(A, plan: DctPlan) -> np.ndarray:
    A = as_tensor3(A)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected square frontal slices, got {A.shape[:2]}")
    return slices(dct3(A, plan))


def cinv(A, plan: DctPlan) -> np.ndarray:
    """Inverse under the cosine product, via slice-wise LU in the DCT domain."""
    S = _square_slices(A, plan)
    m = S.shape[1]
    eye = np.eye(m)
    out = np.empty_like(S)
    for k, sl in enumerate(S):
        scale = np.max(np.abs(sl))
        lu, piv = scipy.linalg.lu_factor(sl, check_finite=False)
        if scale == 0.0 or np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
            raise SingularSliceError(k)
        out[k] = scipy.linalg.lu_solve((lu, piv), eye, check_finite=False)
    return idct3(unslices(out), plan)


def is_f_diagonal(A, plan: DctPlan, tol: float = DEFAULT_TOL) -> bool:
    S = _square_slices(A, plan)
    off = S * (1.0 - np.eye(S.shape[1]))
    return bool(np.max(np.abs(off), initial=0.0) <= tol)


def is_f_symmetric(A, plan: DctPlan, tol: float = DEFAULT_TOL) -> bool:
    S = _square_slices(A, plan)
    return bool(np.max(np.abs(S - np.swapaxes(S, 1, 2)), initial=0.0) <= tol)


def is_f_orthogonal(A, plan: DctPlan, tol: float = DEFAULT_TOL) -> bool:
    S = _square_slices(A, plan)
    gram = np.swapaxes(S, 1, 2) @ S
    return bool(np.max(np.abs(gram - np.eye(S.shape[1])), initial=0.0) <= tol)


def is_f_positive_definite(A, plan: DctPlan, tol: float = DEFAULT_TOL) -> bool:
    """Every DCT-domain slice symmetric and Cholesky-factorizable."""
    if not is_f_symmetric(A, plan, tol):
        return False
    for sl in _square_slices(A, plan):
        try:
            np.linalg.cholesky(0.5 * (sl + sl.T))
        except np.linalg.LinAlgError:
            return False
    return True
