"""Datasets: seeded synthetic templates and the CIFAR-10 binary format."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

CIFAR_RECORD = 3073
CIFAR_SIDE = 32
CIFAR_MEAN = (0.4914, 0.4822, 0.4465)
CIFAR_STD = (0.2470, 0.2435, 0.2616)
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)
DATA_DIR_ENV = "TCPVIT_DATA_DIR"


@dataclass
class LabeledImages:
    images: np.ndarray  # (n, H, W, C) float64
    labels: np.ndarray  # (n,) int64

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError("images and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, n: int) -> "LabeledImages":
        return LabeledImages(self.images[:n], self.labels[:n])


def make_synthetic(
    num_classes: int,
    samples_per_class: int,
    img: int | tuple[int, int] = 32,
    C: int = 3,
    seed: int = 0,
    split: int = 0,
    noise: float = 0.25,
) -> LabeledImages:
    """Linearly separable toy task.

    Each class has a fixed random template; the templates are orthogonalized
    (QR) and rescaled to unit RMS per pixel. Samples are template plus
    Gaussian noise. Templates depend only on ``seed``; the noise also depends
    on ``split``, so train and test sets share classes but not samples.
    Samples are ordered class by class.
    """
    h, w = (img, img) if isinstance(img, int) else img
    D = h * w * C
    if num_classes > D:
        raise DataError("more classes than pixels; templates cannot be orthogonal")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((D, num_classes)))
    templates = (q.T * np.sqrt(D)).reshape(num_classes, h, w, C)
    noise_rng = np.random.default_rng([seed, split + 1])
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    images = templates[labels] + noise * noise_rng.standard_normal((len(labels), h, w, C))
    return LabeledImages(images, labels.astype(np.int64))


def parse_cifar10(buf: bytes, mean=CIFAR_MEAN, std=CIFAR_STD, limit: int | None = None) -> LabeledImages:
    """Decode CIFAR-10 binary records: a label byte then R, G, B planes of 32x32."""
    if len(buf) == 0 or len(buf) % CIFAR_RECORD:
        raise DataError(f"CIFAR-10 data must be a positive multiple of {CIFAR_RECORD} bytes, got {len(buf)}")
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    if limit is not None:
        raw = raw[:limit]
    labels = raw[:, 0].astype(np.int64)
    if labels.max(initial=0) > 9:
        bad = int(np.argmax(labels > 9))
        raise DataError(f"record {bad} has label byte {labels[bad]} > 9")
    planes = raw[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    images = np.moveaxis(planes, 1, -1).astype(np.float64) / 255.0
    images = (images - np.asarray(mean)) / np.asarray(std)
    return LabeledImages(images, labels)


def resolve_data_dir(path: str | os.PathLike | None) -> Path:
    if path:
        return Path(path)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise DataError(f"no CIFAR-10 directory given (use --data-dir or set {DATA_DIR_ENV})")


def load_cifar10(path, split: str = "train", limit: int | None = None, mean=CIFAR_MEAN, std=CIFAR_STD) -> LabeledImages:
    """Load CIFAR-10 from a ``.bin`` file or a ``cifar-10-batches-bin`` directory."""
    path = Path(path)
    if path.is_dir():
        files = [path / f for f in (CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES)]
    else:
        files = [path]
    parts = []
    remaining = limit
    for f in files:
        if remaining is not None and remaining <= 0:
            break
        if not f.is_file():
            raise DataError(f"CIFAR-10 file not found: {f}")
        part = parse_cifar10(f.read_bytes(), mean, std, remaining)
        parts.append(part)
        if remaining is not None:
            remaining -= len(part)
    return LabeledImages(
        np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts])
    )


def augment_batch(images: np.ndarray, rng: np.random.Generator, pad: int = 4) -> np.ndarray:
    """Random horizontal flip and zero-padded random crop, per image."""
    n, h, w, _ = images.shape
    padded = np.pad(images, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    flips = rng.random(n) < 0.5
    offs = rng.integers(0, 2 * pad + 1, size=(n, 2))
    out = np.empty_like(images)
    for i in range(n):
        y, x = offs[i]
        crop = padded[i, y : y + h, x : x + w]
        out[i] = crop[:, ::-1] if flips[i] else crop
    return out
