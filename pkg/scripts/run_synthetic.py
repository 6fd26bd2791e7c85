"""Train the tensor and flattened encoders on the synthetic task and compare them.

Writes one metrics CSV per variant into --out-dir and prints the final rows.
"""

import argparse
import time
from pathlib import Path

from tcpvit.analysis import count_params
from tcpvit.config import get_preset
from tcpvit.train import load_datasets, metrics_csv, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variants", nargs="+", default=["tcp", "std"])
    ap.add_argument("--out-dir", type=Path, default=Path("runs"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    for variant in args.variants:
        run = get_preset("synthetic").replace(variant=variant, epochs=args.epochs, seed=args.seed)
        tr, te = load_datasets(run)
        t0 = time.perf_counter()
        _, log = train(run, tr, te)
        dt = time.perf_counter() - t0
        path = args.out_dir / f"synthetic_{variant}_seed{args.seed}.csv"
        path.write_text(metrics_csv(log))
        last = {r.split: r for r in log[-2:]}
        n = count_params(run.model).grand_total
        print(
            f"{variant}: {n:,} params, train acc {last['train'].accuracy:.3f}, "
            f"test acc {last['test'].accuracy:.3f}, {dt:.0f}s -> {path}"
        )


if __name__ == "__main__":
    main()
