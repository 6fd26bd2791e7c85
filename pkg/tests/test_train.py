import numpy as np
import pytest

from tcpvit.config import get_preset
from tcpvit.data import make_synthetic
from tcpvit.errors import DataError
from tcpvit.train import CSV_HEADER, _limit, load_datasets, metrics_csv, train

RUN = get_preset("gradcheck").replace(epochs=4, deterministic=True, lr=0.01)


def test_loss_decreases_and_log_shape():
    tr, te = load_datasets(RUN)
    _, log = train(RUN, tr, te)
    assert [(r.epoch, r.split) for r in log[:2]] == [(1, "train"), (1, "test")]
    train_losses = [r.loss for r in log if r.split == "train"]
    assert train_losses[-1] < train_losses[0]
    assert log[-1].lr < log[0].lr


def test_deterministic_csv():
    tr, te = load_datasets(RUN)
    a = metrics_csv(train(RUN, tr, te)[1])
    b = metrics_csv(train(RUN, tr, te)[1])
    assert a == b and a.splitlines()[0] == CSV_HEADER


def test_seed_changes_run():
    tr, te = load_datasets(RUN)
    a = metrics_csv(train(RUN, tr, te)[1])
    run = RUN.replace(seed=1)
    tr, te = load_datasets(run)
    assert a != metrics_csv(train(run, tr, te)[1])


def test_constant_schedule_keeps_lr():
    tr, _ = load_datasets(RUN)
    _, log = train(RUN.replace(schedule="constant", epochs=2), tr)
    assert {r.lr for r in log} == {RUN.lr}


def test_augmented_run_is_reproducible():
    run = RUN.replace(augment=True, epochs=2)
    tr, _ = load_datasets(run)
    assert metrics_csv(train(run, tr)[1]) == metrics_csv(train(run, tr)[1])


def test_batch_larger_than_dataset():
    tr, _ = load_datasets(RUN)
    with pytest.raises(DataError):
        train(RUN.replace(batch_size=len(tr) + 1), tr)


def test_limit_is_class_balanced():
    ds = make_synthetic(4, 10, 4, 1, seed=0)
    sub = _limit(ds, 12)
    assert np.bincount(sub.labels).tolist() == [3, 3, 3, 3]


def test_load_datasets_sizes():
    tr, te = load_datasets(get_preset("synthetic"))
    assert (len(tr), len(te)) == (200, 100)
    assert np.bincount(tr.labels).tolist() == [20] * 10
