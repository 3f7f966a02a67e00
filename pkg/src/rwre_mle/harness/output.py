"""CSV and SVG writers.

Floats are written with ``repr`` so that parsing a file back gives the exact
values; vector and matrix fields are ';'-joined (matrices row-major).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .experiment import ReplicateRecord
from .summary import SummaryRow

RECORD_COLUMNS = [
    "example", "n", "replicate", "env_seed", "walk_seed", "censored", "total_steps",
    "theta_mle", "sigma_hat", "ci_lo", "ci_hi", "theta_mom", "clipped_mom",
]
SUMMARY_COLUMNS = ["example", "n", "estimator", "count", "censored_frac", "q1", "median", "q3", "iqr", "outliers"]


def _fmt_bool(b) -> str:
    return "" if b is None else ("true" if b else "false")


def _fmt_vec(x) -> str:
    if x is None:
        return ""
    return ";".join(repr(float(t)) for t in np.ravel(x))


def _record_row(rec: ReplicateRecord) -> list[str]:
    ci_lo = ci_hi = None
    if rec.ci is not None:
        ci_lo = [lo for lo, _ in rec.ci]
        ci_hi = [hi for _, hi in rec.ci]
    return [
        rec.example, str(rec.n), str(rec.replicate), str(rec.env_seed), str(rec.walk_seed),
        _fmt_bool(rec.censored), str(rec.total_steps),
        _fmt_vec(rec.theta_mle), _fmt_vec(rec.sigma_hat), _fmt_vec(ci_lo), _fmt_vec(ci_hi),
        "" if rec.theta_mom is None else repr(float(rec.theta_mom)), _fmt_bool(rec.clipped_mom),
    ]


def _write(path, header, rows) -> None:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(records: list[ReplicateRecord], path) -> None:
    _write(path, RECORD_COLUMNS, [_record_row(r) for r in records])


def emit_summary_csv(rows: list[SummaryRow], path) -> None:
    _write(path, SUMMARY_COLUMNS, [
        [r.example, str(r.n), r.estimator, str(r.count), repr(r.censored_frac),
         repr(r.q1), repr(r.median), repr(r.q3), repr(r.iqr), str(r.outliers)]
        for r in rows
    ])


def _parse_vec(s: str):
    return None if s == "" else np.array([float(t) for t in s.split(";")])


def _parse_bool(s: str):
    return None if s == "" else s == "true"


def read_records_csv(path) -> list[ReplicateRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            theta = _parse_vec(row["theta_mle"])
            sigma = _parse_vec(row["sigma_hat"])
            if sigma is not None:
                d = int(round(np.sqrt(sigma.size)))
                sigma = sigma.reshape(d, d)
            lo, hi = _parse_vec(row["ci_lo"]), _parse_vec(row["ci_hi"])
            out.append(ReplicateRecord(
                example=row["example"], n=int(row["n"]), replicate=int(row["replicate"]),
                env_seed=int(row["env_seed"]), walk_seed=int(row["walk_seed"]),
                censored=_parse_bool(row["censored"]), total_steps=int(row["total_steps"]),
                theta_mle=theta, sigma_hat=sigma,
                ci=None if lo is None else [(float(a), float(b)) for a, b in zip(lo, hi)],
                theta_mom=None if row["theta_mom"] == "" else float(row["theta_mom"]),
                clipped_mom=_parse_bool(row["clipped_mom"]),
            ))
    return out


# -- SVG boxplots ---------------------------------------------------------------

PANEL_W, PANEL_H = 760, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
BOX_W = 14


class LinearAxis:
    """value -> y pixel, top of the plot area at ``top``."""

    def __init__(self, lo: float, hi: float, top: float, height: float):
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.top, self.height = float(lo), float(hi), float(top), float(height)

    def __call__(self, value: float) -> float:
        return self.top + (self.hi - value) / (self.hi - self.lo) * self.height


def _panel_key(row: SummaryRow):
    if row.estimator.startswith("mle["):
        return row.example, int(row.estimator[4:-1])
    return row.example, 0


def emit_boxplot_svg(summaries: list[SummaryRow], path, truth: dict[str, float | list[float]]) -> str:
    """Paired boxes per n (estimator white on the left, moment grey on the right)
    with a horizontal reference line at the true value; one panel per experiment
    and parameter coordinate.  Returns the SVG text it wrote."""
    panels: dict[tuple, list[SummaryRow]] = {}
    for row in summaries:
        panels.setdefault(_panel_key(row), []).append(row)
    keys = sorted(panels)
    width = PANEL_W
    height = PANEL_H * max(len(keys), 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for p, key in enumerate(keys):
        example, coord = key
        rows = panels[key]
        star = np.atleast_1d(truth[example])[coord]
        ns = sorted({r.n for r in rows})
        lo = min([r.whisker_lo for r in rows] + [star])
        hi = max([r.whisker_hi for r in rows] + [star])
        pad = 0.05 * (hi - lo) if hi > lo else 0.05
        top = p * PANEL_H + MARGIN_T
        plot_h = PANEL_H - MARGIN_T - MARGIN_B
        plot_w = width - MARGIN_L - MARGIN_R
        y = LinearAxis(lo - pad, hi + pad, top, plot_h)
        slot = plot_w / len(ns)
        label = example if coord == 0 and not any(r.estimator.startswith("mle[") for r in rows) else f"{example} [{coord}]"
        out.append(
            f'<g class="panel" data-example="{example}" data-axis-lo="{y.lo!r}" data-axis-hi="{y.hi!r}" '
            f'data-axis-top="{y.top!r}" data-axis-height="{y.height!r}">'
        )
        out.append(f'<text x="{MARGIN_L}" y="{top - 12:.2f}" font-size="13">{label}</text>')
        out.append(
            f'<rect class="frame" x="{MARGIN_L}" y="{top:.2f}" width="{plot_w:.2f}" height="{plot_h:.2f}" '
            'fill="none" stroke="black"/>'
        )
        for tick in np.linspace(y.lo, y.hi, 5):
            out.append(f'<text x="{MARGIN_L - 6}" y="{y(tick) + 4:.2f}" text-anchor="end">{tick:.3f}</text>')
        out.append(
            f'<line class="reference" x1="{MARGIN_L}" y1="{y(star):.2f}" x2="{MARGIN_L + plot_w:.2f}" '
            f'y2="{y(star):.2f}" stroke="black" stroke-dasharray="4 3"/>'
        )
        for i, n in enumerate(ns):
            cx = MARGIN_L + (i + 0.5) * slot
            out.append(f'<text x="{cx:.2f}" y="{top + plot_h + 16:.2f}" text-anchor="middle">{n}</text>')
            for row in rows:
                if row.n != n:
                    continue
                is_mom = row.estimator == "mom"
                x = cx + (BOX_W * 0.7 if is_mom else -BOX_W * 0.7)
                fill = "#b0b0b0" if is_mom else "white"
                kind = "mom" if is_mom else "mle"
                out.append(
                    f'<line class="whisker" x1="{x:.2f}" y1="{y(row.whisker_hi):.2f}" x2="{x:.2f}" '
                    f'y2="{y(row.q3):.2f}" stroke="black"/>'
                )
                out.append(
                    f'<line class="whisker" x1="{x:.2f}" y1="{y(row.q1):.2f}" x2="{x:.2f}" '
                    f'y2="{y(row.whisker_lo):.2f}" stroke="black"/>'
                )
                out.append(
                    f'<rect class="box {kind}" x="{x - BOX_W / 2:.2f}" y="{y(row.q3):.2f}" width="{BOX_W}" '
                    f'height="{max(y(row.q1) - y(row.q3), 0.0):.2f}" fill="{fill}" stroke="black"/>'
                )
                out.append(
                    f'<line class="median" x1="{x - BOX_W / 2:.2f}" y1="{y(row.median):.2f}" '
                    f'x2="{x + BOX_W / 2:.2f}" y2="{y(row.median):.2f}" stroke="black" stroke-width="2"/>'
                )
        out.append("</g>")
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return text
