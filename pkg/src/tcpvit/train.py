"""Mini-batch training and evaluation loop."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .config import RunConfig
from .data import LabeledImages, augment_batch, load_cifar10, make_synthetic, resolve_data_dir
from .errors import DataError
from .grad import cross_entropy, loss_and_grads
from .model import EncoderParams, init_params, predict
from .optim import OptimState, adamw_step, clip_grad_norm, cosine_schedule

CSV_HEADER = "epoch,split,loss,accuracy,lr"


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    split: str
    loss: float
    accuracy: float
    lr: float

    def csv(self) -> str:
        return f"{self.epoch},{self.split},{self.loss:.10f},{self.accuracy:.6f},{self.lr:.10g}"


def single_threaded():
    """Context manager pinning BLAS to one thread (fixed reduction order)."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def load_datasets(run: RunConfig) -> tuple[LabeledImages, LabeledImages]:
    if run.dataset == "synthetic":
        K = run.num_classes
        img = (run.img_h, run.img_w)
        train = make_synthetic(K, math.ceil(run.train_limit / K), img, run.C, run.seed, split=0)
        test = make_synthetic(K, math.ceil(run.test_limit / K), img, run.C, run.seed, split=1)
        return _limit(train, run.train_limit), _limit(test, run.test_limit)
    root = resolve_data_dir(run.dataset_path)
    if not root.exists():
        raise DataError(f"CIFAR-10 path does not exist: {root}")
    return load_cifar10(root, "train", run.train_limit), load_cifar10(root, "test", run.test_limit)


def _limit(ds: LabeledImages, n: int) -> LabeledImages:
    """First ``n`` samples taken round-robin over classes, so truncation stays balanced."""
    if len(ds) <= n:
        return ds
    rank = np.empty(len(ds), dtype=np.int64)
    for c in np.unique(ds.labels):
        mask = ds.labels == c
        rank[mask] = np.arange(mask.sum())
    idx = np.lexsort((ds.labels, rank))[:n]
    return LabeledImages(ds.images[idx], ds.labels[idx])


def evaluate(params: EncoderParams, run: RunConfig, data: LabeledImages, batch_size: int = 100) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over ``data``."""
    logits = predict(data.images, params, run.model, batch_size)
    loss, _ = cross_entropy(logits, data.labels)
    acc = float(np.mean(np.argmax(logits, axis=1) == data.labels))
    return loss, acc


def train(
    run: RunConfig,
    train_set: LabeledImages,
    test_set: LabeledImages | None = None,
    params: EncoderParams | None = None,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[EncoderParams, list[EpochMetrics]]:
    """AdamW + schedule + global-norm clipping; one train (and eval) row per epoch.

    Shuffling and augmentation use generators derived from ``run.seed``, so a
    fixed config reproduces the same metric log.
    """
    n = len(train_set)
    if n == 0:
        raise DataError("training set is empty")
    if run.batch_size > n:
        raise DataError(f"batch size {run.batch_size} exceeds dataset size {n}")
    cfg = run.model
    if params is None:
        params = init_params(cfg)
    named = params.named_arrays()
    state = OptimState()
    steps_per_epoch = math.ceil(n / run.batch_size)
    total = steps_per_epoch * run.epochs
    shuffle_rng = np.random.default_rng([run.seed, 1])
    aug_rng = np.random.default_rng([run.seed, 2])
    log: list[EpochMetrics] = []

    ctx = single_threaded() if run.deterministic else contextlib.nullcontext()
    with ctx:
        step = 0
        for epoch in range(1, run.epochs + 1):
            order = shuffle_rng.permutation(n)
            loss_sum, correct, lr = 0.0, 0, run.lr
            for start in range(0, n, run.batch_size):
                idx = order[start : start + run.batch_size]
                x = train_set.images[idx]
                if run.augment:
                    x = augment_batch(x, aug_rng)
                y = train_set.labels[idx]
                loss, logits, grads = loss_and_grads(x, y, params, cfg)
                loss_sum += loss * len(idx)
                correct += int(np.sum(np.argmax(logits, axis=1) == y))
                g = grads.named_arrays()
                clip_grad_norm(g, run.clip_norm)
                lr = cosine_schedule(step, total, run.lr) if run.schedule == "cosine" else run.lr
                adamw_step(named, g, state, lr, run.weight_decay)
                step += 1
            rows = [EpochMetrics(epoch, "train", loss_sum / n, correct / n, lr)]
            if test_set is not None and len(test_set):
                tl, ta = evaluate(params, run, test_set)
                rows.append(EpochMetrics(epoch, "test", tl, ta, lr))
            for row in rows:
                log.append(row)
                if on_epoch is not None:
                    on_epoch(row)
    return params, log


def metrics_csv(rows: Iterable[EpochMetrics]) -> str:
    return "\n".join([CSV_HEADER, *(r.csv() for r in rows)]) + "\n"
