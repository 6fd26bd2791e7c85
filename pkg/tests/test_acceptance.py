"""Acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL`` line to the acceptance summary printed
at the end of the pytest run (see ``conftest.py``).
"""

import csv
import io
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import loop_cprod, plain_vit_logits
from tcpvit.analysis import count_params, flops_model
from tcpvit.cli import main
from tcpvit.config import CLS_PAPER, GRADCHECK, SEG_PAPER, ModelConfig
from tcpvit.ctensor import cprod, ctranspose, identity_tensor
from tcpvit.grad import gradcheck, gradcheck_instance, loss_and_grads
from tcpvit.model import encoder_forward, init_params
from tcpvit.transform import dct3, get_plan, idct3

from test_analysis import random_configs


def record(n: int, title: str, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"[{status}] {n}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def test_criterion_1_parameter_totals(capsys):
    t0 = time.perf_counter()
    main(["params", "--preset", "cls-paper"])
    cls_out = capsys.readouterr().out
    main(["params", "--preset", "seg-paper"])
    seg_out = capsys.readouterr().out
    elapsed = time.perf_counter() - t0

    total = next(ln for ln in cls_out.splitlines() if ln.split("  ")[0] == "Total").split()
    enc = next(ln for ln in seg_out.splitlines() if ln.startswith("Transformer encoder")).split()
    ok = total[1:4] == ["119,194", "43,114", "0.362"] and enc[2:5] == ["1,188,480", "402,048", "0.338"] and elapsed < 1.0
    record(1, "exact parameter totals", ok, f"cls std/tcp {total[1]}/{total[2]}, seg encoder {enc[2]}/{enc[3]} ratio {enc[4]}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_realized_counts():
    t0 = time.perf_counter()
    configs = [ModelConfig(**CLS_PAPER, variant=v) for v in ("tcp", "std")]
    configs += [ModelConfig(**SEG_PAPER, variant=v) for v in ("tcp", "std")]
    configs += random_configs(100, seed=42)
    bad = [c for c in configs if init_params(c).num_params() != count_params(c).grand_total]
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 30
    record(2, "realized model counts", ok, f"{len(configs) - len(bad)}/{len(configs)} configs exact, {elapsed:.1f}s")
    assert ok


def test_criterion_3_algebra_suite():
    t0 = time.perf_counter()
    r = np.random.default_rng(3)
    err = {k: 0.0 for k in ("orth", "round", "parseval", "assoc", "dist", "rev", "ident", "c1", "brute")}
    for C in (1, 2, 3, 4, 5, 8, 16):
        pl = get_plan(C)
        err["orth"] = max(err["orth"], np.max(np.abs(pl.forward @ pl.forward.T - np.eye(C))))
        X = r.standard_normal((4, 5, C))
        err["round"] = max(err["round"], np.max(np.abs(idct3(dct3(X, pl), pl) - X)))
        err["parseval"] = max(err["parseval"], abs(np.linalg.norm(dct3(X, pl)) / np.linalg.norm(X) - 1))
        A, B, D = r.standard_normal((3, 4, C)), r.standard_normal((4, 2, C)), r.standard_normal((2, 5, C))
        B2 = r.standard_normal((4, 2, C))
        err["assoc"] = max(err["assoc"], rel(cprod(cprod(A, B, pl), D, pl), cprod(A, cprod(B, D, pl), pl)))
        err["dist"] = max(err["dist"], rel(cprod(A, B + B2, pl), cprod(A, B, pl) + cprod(A, B2, pl)))
        lhs = ctranspose(cprod(A, B, pl), pl)
        err["rev"] = max(err["rev"], rel(lhs, cprod(ctranspose(B, pl), ctranspose(A, pl), pl)))
        err["ident"] = max(
            err["ident"], rel(cprod(identity_tensor(3, C, pl), A, pl), A), rel(cprod(A, identity_tensor(4, C, pl), pl), A)
        )
    A, B = r.standard_normal((4, 3, 1)), r.standard_normal((3, 6, 1))
    err["c1"] = np.max(np.abs(cprod(A, B, get_plan(1))[:, :, 0] - A[:, :, 0] @ B[:, :, 0]))
    for _ in range(20):
        m, n, p, C = (int(v) for v in r.integers(1, 6, size=4))
        A, B = r.standard_normal((m, n, C)), r.standard_normal((n, p, C))
        err["brute"] = max(err["brute"], rel(cprod(A, B, get_plan(C)), loop_cprod(A, B)))
    elapsed = time.perf_counter() - t0
    tol = dict(orth=1e-12, round=1e-12, parseval=1e-10, assoc=1e-10, dist=1e-10, rev=1e-10, ident=1e-10, c1=1e-12, brute=1e-11)
    ok = all(err[k] <= tol[k] for k in tol) and elapsed < 10
    worst = max(err, key=lambda k: err[k] / tol[k])
    record(3, "algebra suite", ok, f"worst margin {worst}={err[worst]:.2e} (tol {tol[worst]:.0e}), {elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_4_gradcheck():
    cfg = ModelConfig(**GRADCHECK)
    t0 = time.perf_counter()
    worst, where = 0.0, ""
    for seed in range(3):
        for name, (r, _) in gradcheck(cfg, seed).items():
            if r > worst:
                worst, where = r, f"{name} (seed {seed})"
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    record(4, "gradient check", ok, f"max rel error {worst:.2e} at {where}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_gradient_norm_domains():
    cfg = ModelConfig(**CLS_PAPER)
    params, x, y = gradcheck_instance(cfg, 0, batch=4)
    _, _, grads = loss_and_grads(x, y, params, cfg)
    plan = get_plan(cfg.C)
    worst, count = 0.0, 0
    for name, g in grads.named_arrays().items():
        if name.endswith(".w") and g.ndim == 3:
            count += 1
            spatial = idct3(g, plan)
            n_hat, n_sp = np.linalg.norm(g), np.linalg.norm(spatial)
            worst = max(worst, abs(n_hat - n_sp) / max(n_sp, 1e-300))
    ok = worst <= 1e-10 and count == cfg.L * (3 * cfg.H + 3)
    record(5, "gradient norm domain invariance", ok, f"{count} t-Linear weights, max rel diff {worst:.2e}")
    assert ok


def test_criterion_6_flops():
    def cfg(P, C):
        return ModelConfig(img_h=P, img_w=P, C=C, P=P, H=1, L=1, r_ff=4, num_classes=2)

    c1_exact = all(flops_model(cfg(P, 1), N).ratio == 1.0 for P in (1, 2, 4, 8) for N in (1, 65, 1000))
    cls = flops_model(ModelConfig(**CLS_PAPER)).ratio
    cls_ok = abs(cls - 516 / 1028) <= 1e-12

    C = 3
    Ps, Ns = (1, 2, 4, 8, 16, 64), (1, 4, 16, 65, 256, 1024, 10**4)
    grid = np.array([[flops_model(cfg(P, C), N).ratio for N in Ns] for P in Ps])
    rises_with_N = np.all(np.diff(grid, axis=1) > 0)
    falls_with_d = np.all(np.diff(grid, axis=0) < 0)
    toward_1_over_C = abs(flops_model(cfg(1024, C), 1).ratio - 1 / C) < 1e-3
    toward_1 = abs(flops_model(cfg(1, C), 10**9).ratio - 1) < 1e-6
    ok = c1_exact and cls_ok and rises_with_N and falls_with_d and toward_1_over_C and toward_1
    record(6, "FLOPs formula", ok, f"C=1 exact {c1_exact}, cls ratio {cls:.12f}, monotone {bool(rises_with_N and falls_with_d)}, limits {toward_1_over_C and toward_1}")
    assert ok


def _train_synthetic(out: Path) -> tuple[float, str]:
    cmd = [sys.executable, "-m", "tcpvit", "train", "--preset", "synthetic", "--deterministic", "--metrics", str(out)]
    t0 = time.perf_counter()
    subprocess.run(cmd, check=True, capture_output=True)
    return time.perf_counter() - t0, out.read_text()


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    return _train_synthetic(tmp_path_factory.mktemp("syn") / "run1.csv")


@pytest.mark.slow
def test_criterion_7_synthetic_training(synthetic_run):
    elapsed, text = synthetic_run
    rows = list(csv.DictReader(io.StringIO(text)))
    last_epoch = max(int(r["epoch"]) for r in rows)
    final = {r["split"]: float(r["accuracy"]) for r in rows if int(r["epoch"]) == last_epoch}
    ok = last_epoch <= 30 and final["train"] >= 0.9 and final["test"] >= 0.7 and elapsed < 300
    record(7, "synthetic training", ok, f"epoch {last_epoch}: train {final['train']:.3f}, test {final['test']:.3f}, {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_7b_cifar_optional(tmp_path):
    root = os.environ.get("TCPVIT_DATA_DIR")
    if not root or not Path(root).exists():
        record(7, "CIFAR-10 sanity floor (optional)", None, "TCPVIT_DATA_DIR not set")
        pytest.skip("CIFAR-10 not available")
    out = tmp_path / "cifar.csv"
    cmd = [sys.executable, "-m", "tcpvit", "train", "--preset", "cifar-desk", "--deterministic", "--metrics", str(out)]
    t0 = time.perf_counter()
    subprocess.run(cmd, check=True, capture_output=True)
    elapsed = time.perf_counter() - t0
    rows = [r for r in csv.DictReader(io.StringIO(out.read_text())) if r["split"] == "test"]
    acc = float(rows[-1]["accuracy"])
    ok = acc >= 0.30 and int(rows[-1]["epoch"]) <= 20 and elapsed < 900
    record(7, "CIFAR-10 sanity floor (optional)", ok, f"test {acc:.3f}, {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_8_determinism(synthetic_run, tmp_path):
    _, first = synthetic_run
    _, second = _train_synthetic(tmp_path / "run2.csv")
    ok = first == second
    record(8, "determinism", ok, f"byte-identical metrics CSV ({len(first.encode())} bytes)" if ok else "CSVs differ")
    assert ok


def test_criterion_9_c1_equivalence():
    base = dict(img_h=8, img_w=8, C=1, P=4, H=2, L=2, r_ff=2, num_classes=3)
    tcp_cfg, std_cfg = ModelConfig(**base), ModelConfig(**base, variant="std")
    r = np.random.default_rng(9)
    tcp = init_params(tcp_cfg).map(lambda a: a + 0.3 * r.standard_normal(a.shape))
    std = init_params(std_cfg)
    mapped = {**tcp.named_arrays(), "patch_w": np.eye(std_cfg.d_eff), "patch_b": np.zeros(std_cfg.d_eff)}
    std.load_arrays(mapped)
    worst_pair = worst_oracle = 0.0
    for x in r.standard_normal((10, 8, 8, 1)):
        a, b = encoder_forward(x, tcp, tcp_cfg), encoder_forward(x, std, std_cfg)
        worst_pair = max(worst_pair, np.max(np.abs(a - b)))
        worst_oracle = max(worst_oracle, np.max(np.abs(a - plain_vit_logits(x, tcp, tcp_cfg))))
    ok = worst_pair <= 1e-10 and worst_oracle <= 1e-10
    record(9, "C=1 equivalence", ok, f"tcp vs std {worst_pair:.2e}, tcp vs plain ViT {worst_oracle:.2e} over 10 inputs")
    assert ok
