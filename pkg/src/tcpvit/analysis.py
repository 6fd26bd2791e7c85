"""Closed-form parameter counts and the FLOPs model for both variants.

Counts cover everything the realized model holds: per-layer weights, layer
norms and biases, a final layer norm, positional table, class token, the
flattened baseline's patch projection, and the linear head. The formulas are
written independently of :mod:`tcpvit.model`; tests check that both agree.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass

from .config import ModelConfig


@dataclass(frozen=True)
class ParamBreakdown:
    variant: str
    layers: int
    mhsa_weights: int  # per layer
    ffn_weights: int  # per layer
    ln: int  # per layer, two norms
    biases: int  # per layer
    layer_total: int
    final_ln: int
    encoder_total: int
    pos: int
    cls: int
    patch_proj: int
    embeddings_tokens: int
    head: int
    grand_total: int


@dataclass(frozen=True)
class ParamComparison:
    tcp: ParamBreakdown
    std: ParamBreakdown

    ROWS = (
        ("MHSA weights / layer", "mhsa_weights"),
        ("FFN weights / layer", "ffn_weights"),
        ("LayerNorm / layer", "ln"),
        ("Biases / layer", "biases"),
        ("Total per layer", "layer_total"),
        ("Transformer encoder", "encoder_total"),
        ("Embeddings & tokens", "embeddings_tokens"),
        ("Head", "head"),
        ("Total", "grand_total"),
    )

    def ratio(self, field: str) -> float:
        s = getattr(self.std, field)
        return getattr(self.tcp, field) / s if s else float("nan")


@dataclass(frozen=True)
class FlopsReport:
    N: int
    d: int
    C: int
    r_ff: int
    alpha: int
    tcp_flops: int
    std_flops: int
    ratio: float
    transform_overhead: float


def count_params(config: ModelConfig) -> ParamBreakdown:
    """Exact learnable-parameter count for ``config.variant``.

    Both variants use ``d`` = per-slice width and ``c`` = tube length
    (``P*P, C`` for tcp; ``P*P*C, 1`` for std), so the per-layer weights are
    ``(4 + 2 r_ff) d^2 c`` and the baseline reproduces ``(4 + 2 r_ff) d^2 C^2``.
    """
    d, c, H, r, L = config.d, config.channels, config.H, config.r_ff, config.L
    d_h, d_ff = d // H, r * d
    mhsa_w = 4 * d * d * c
    ffn_w = 2 * r * d * d * c
    ln = 4 * d * c
    biases = (3 * H * d_h * c + d * c) + (d_ff * c + d * c)
    layer_total = mhsa_w + ffn_w + ln + biases
    final_ln = 2 * d * c
    encoder_total = L * layer_total + final_ln
    pos = config.tokens * d * c
    cls = d * c
    patch_proj = config.d_eff * config.d_eff + config.d_eff if config.variant == "std" else 0
    embeddings = pos + cls + patch_proj
    head = d * c * config.num_classes + config.num_classes
    return ParamBreakdown(
        variant=config.variant,
        layers=L,
        mhsa_weights=mhsa_w,
        ffn_weights=ffn_w,
        ln=ln,
        biases=biases,
        layer_total=layer_total,
        final_ln=final_ln,
        encoder_total=encoder_total,
        pos=pos,
        cls=cls,
        patch_proj=patch_proj,
        embeddings_tokens=embeddings,
        head=head,
        grand_total=encoder_total + embeddings + head,
    )


def compare_params(config: ModelConfig) -> ParamComparison:
    return ParamComparison(count_params(config.with_variant("tcp")), count_params(config.with_variant("std")))


def layer_flops(N: int, width: int, r_ff: int) -> int:
    """Multiply-add FLOPs (2 per MAC) of one standard layer at embedding ``width``."""
    return (8 * width * width + 2 * r_ff * width * width) * N + 4 * N * N * width


def flops_model(config: ModelConfig, N: int | None = None) -> FlopsReport:
    """Per-layer FLOPs of the tensor and flattened encoders on ``N`` tokens.

    ``d`` and ``C`` are the tensor variant's slice width and channel count.
    The ratio excludes the DCT/IDCT cost, which is reported separately as
    ``2 N d C log2 C`` (one forward and one inverse transform per layer).
    """
    N = config.tokens if N is None else N
    if N < 1:
        raise ValueError("N must be at least 1")
    d, C, r = config.P * config.P, config.C, config.r_ff
    alpha = (8 + 2 * r) * d
    return FlopsReport(
        N=N,
        d=d,
        C=C,
        r_ff=r,
        alpha=alpha,
        tcp_flops=C * layer_flops(N, d, r),
        std_flops=layer_flops(N, d * C, r),
        ratio=(alpha + 4 * N) / (alpha * C + 4 * N),
        transform_overhead=2.0 * N * d * C * math.log2(C) if C > 1 else 0.0,
    )


# --- serialization -------------------------------------------------------


def _fmt_int(n: int) -> str:
    return f"{n:,}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)]) + "\n"


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_report(report, fmt: str = "table") -> str:
    """Serialize a :class:`ParamComparison`, :class:`ParamBreakdown` or :class:`FlopsReport`.

    ``csv`` and ``json`` keep full precision; ``table`` is for reading.
    """
    if fmt not in ("table", "csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(report, ParamComparison):
        if fmt == "json":
            data = {"tcp": dataclasses.asdict(report.tcp), "std": dataclasses.asdict(report.std)}
            data["ratio"] = {f: report.ratio(f) for _, f in report.ROWS}
            return json.dumps(data, indent=2) + "\n"
        if fmt == "csv":
            rows = [[f, getattr(report.std, f), getattr(report.tcp, f), repr(report.ratio(f))] for _, f in report.ROWS]
            return _csv(["component", "std", "tcp", "ratio"], rows)
        rows = [
            [label, _fmt_int(getattr(report.std, f)), _fmt_int(getattr(report.tcp, f)), f"{report.ratio(f):.3f}"]
            for label, f in report.ROWS
        ]
        return _table(["Component", "Std-ViT", "TCP-ViT", "Ratio"], rows)

    if not isinstance(report, (ParamBreakdown, FlopsReport)):
        raise TypeError(f"cannot serialize {type(report).__name__}")
    data = dataclasses.asdict(report)
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    if fmt == "csv":
        return _csv(list(data), [[repr(v) if isinstance(v, float) else v for v in data.values()]])
    rows = []
    for k, v in data.items():
        if isinstance(v, float):
            rows.append([k, f"{v:.5f}"])
        elif isinstance(v, int) and not isinstance(v, bool):
            rows.append([k, _fmt_int(v)])
        else:
            rows.append([k, str(v)])
    return _table(["Field", "Value"], rows)


def parse_csv_report(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
