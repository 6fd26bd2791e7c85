"""Print the parameter breakdown for the classification and segmentation presets."""

import argparse

from tcpvit.analysis import compare_params, emit_report
from tcpvit.config import get_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--format", choices=("table", "csv", "json"), default="table")
    args = ap.parse_args()
    for name in ("cls-paper", "seg-paper"):
        print(f"# {name}")
        print(emit_report(compare_params(get_preset(name).model), args.format))


if __name__ == "__main__":
    main()
