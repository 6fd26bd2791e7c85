"""Architecture and run configuration, presets, and flat-JSON I/O."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields

from .errors import ConfigError

VARIANTS = ("tcp", "std")
SCHEDULES = ("cosine", "constant")
DATASETS = ("synthetic", "cifar10")


@dataclass(frozen=True)
class ModelConfig:
    img_h: int = 32
    img_w: int = 32
    C: int = 3
    P: int = 4
    H: int = 4
    L: int = 4
    r_ff: int = 4
    num_classes: int = 10
    variant: str = "tcp"
    seed: int = 0

    def __post_init__(self):
        for name in ("img_h", "img_w", "C", "P", "H", "L", "r_ff", "num_classes"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.img_h % self.P or self.img_w % self.P:
            raise ConfigError(f"image {self.img_h}x{self.img_w} is not divisible by P={self.P}")
        if self.d % self.H:
            raise ConfigError(f"embedding dim d={self.d} is not divisible by H={self.H}")

    @property
    def N(self) -> int:
        return (self.img_h // self.P) * (self.img_w // self.P)

    @property
    def tokens(self) -> int:
        return self.N + 1

    @property
    def d_eff(self) -> int:
        return self.P * self.P * self.C

    @property
    def channels(self) -> int:
        """Tube length of the encoder's tensors (1 for the flattened baseline)."""
        return self.C if self.variant == "tcp" else 1

    @property
    def d(self) -> int:
        """Per-slice embedding width: ``P**2`` (tcp) or ``P**2 * C`` (std)."""
        return self.P * self.P if self.variant == "tcp" else self.d_eff

    @property
    def d_h(self) -> int:
        return self.d // self.H

    @property
    def d_ff(self) -> int:
        return self.r_ff * self.d

    def with_variant(self, variant: str) -> "ModelConfig":
        return dataclasses.replace(self, variant=variant)


@dataclass(frozen=True)
class RunConfig:
    img_h: int = 32
    img_w: int = 32
    C: int = 3
    P: int = 4
    H: int = 4
    L: int = 4
    r_ff: int = 4
    num_classes: int = 10
    variant: str = "tcp"
    seed: int = 0
    lr: float = 0.01
    weight_decay: float = 0.01
    epochs: int = 10
    batch_size: int = 256
    clip_norm: float = 1.0
    schedule: str = "cosine"
    dataset: str = "synthetic"
    dataset_path: str = ""
    train_limit: int = 2000
    test_limit: int = 500
    deterministic: bool = False
    augment: bool = False

    def __post_init__(self):
        self.model  # validates the architecture part
        for name in ("epochs", "batch_size", "train_limit", "test_limit"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("lr", "clip_norm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")

    @property
    def model(self) -> ModelConfig:
        names = {f.name for f in fields(ModelConfig)}
        return ModelConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat JSON object")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        clean = {}
        for key, value in data.items():
            default = known[key].default
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be a boolean")
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} must be an integer")
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key} must be a number")
                value = float(value)
            elif not isinstance(value, str):
                raise ConfigError(f"{key} must be a string")
            clean[key] = value
        return cls(**clean)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        return cls.from_dict(data)


# Reference architectures for the classification and segmentation parameter totals.
CLS_PAPER = dict(img_h=32, img_w=32, C=3, P=4, H=4, L=4, r_ff=4, num_classes=10)
SEG_PAPER = dict(img_h=128, img_w=128, C=3, P=8, H=4, L=4, r_ff=2, num_classes=2)
GRADCHECK = dict(img_h=8, img_w=8, C=3, P=4, H=2, L=1, r_ff=2, num_classes=3)

PRESETS: dict[str, RunConfig] = {
    "cls-paper": RunConfig(**CLS_PAPER, epochs=150, batch_size=256, train_limit=10000, test_limit=2000),
    "seg-paper": RunConfig(**SEG_PAPER, lr=5e-4, epochs=150, batch_size=16),
    "synthetic": RunConfig(
        **CLS_PAPER,
        dataset="synthetic",
        train_limit=200,
        test_limit=100,
        epochs=30,
        batch_size=20,
        lr=1e-3,
        deterministic=True,
    ),
    "cifar-desk": RunConfig(
        **CLS_PAPER,
        dataset="cifar10",
        train_limit=2000,
        test_limit=500,
        epochs=20,
        batch_size=50,
        lr=1e-3,
    ),
    "gradcheck": RunConfig(**GRADCHECK, train_limit=30, test_limit=30, batch_size=10),
}


def get_preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
