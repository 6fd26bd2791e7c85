"""Tensor cosine-product algebra and the TCP-ViT encoder, in NumPy."""

from .config import ModelConfig, RunConfig, get_preset
from .ctensor import cinv, cprod, ctranspose, identity_tensor
from .model import EncoderParams, encoder_forward, init_params
from .transform import dct3, get_plan, idct3

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "RunConfig",
    "get_preset",
    "cprod",
    "ctranspose",
    "cinv",
    "identity_tensor",
    "dct3",
    "idct3",
    "get_plan",
    "EncoderParams",
    "init_params",
    "encoder_forward",
]
