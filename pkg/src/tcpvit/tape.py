"""Forward-pass cache consumed by the hand-written backward pass."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class GradTape:
    """Activations recorded during a forward pass.

    ``inputs`` holds what the encoder was called with; ``layers`` holds one dict
    of cached tensors per block (DCT-domain inputs, softmax weights, layer norm
    statistics, pre-GELU activations); ``head`` holds the final norm and
    classifier caches.
    """

    inputs: dict[str, Any] = field(default_factory=dict)
    embed: dict[str, Any] = field(default_factory=dict)
    layers: list[dict[str, Any]] = field(default_factory=list)
    head: dict[str, Any] = field(default_factory=dict)
