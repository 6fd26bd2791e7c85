"""FLOPs ratio (tensor / flattened) over a grid of slice widths and token counts, as CSV."""

import argparse

from tcpvit.analysis import flops_model
from tcpvit.config import ModelConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--C", type=int, default=3)
    ap.add_argument("--r-ff", type=int, default=4)
    ap.add_argument("--patches", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--tokens", type=int, nargs="+", default=[17, 65, 257, 1025, 4097])
    args = ap.parse_args()
    print("P,d,N,ratio,tcp_flops,std_flops,transform_overhead")
    for P in args.patches:
        cfg = ModelConfig(img_h=P, img_w=P, C=args.C, P=P, H=1, L=1, r_ff=args.r_ff, num_classes=2)
        for N in args.tokens:
            r = flops_model(cfg, N)
            print(f"{P},{r.d},{N},{r.ratio!r},{r.tcp_flops},{r.std_flops},{r.transform_overhead!r}")


if __name__ == "__main__":
    main()
