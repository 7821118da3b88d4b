"""Render sweep CSVs as three side-by-side fidelity heatmaps.

Input contract: header ``x,y,f_petz,f_prior,f_retro``, one complete
(x, y) grid, floats throughout.  The color scale is fixed to [0, 1] so
panels and figures stay comparable.  Malformed input is reported with
the offending line number.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = ["x", "y", "f_petz", "f_prior", "f_retro"]
DEFAULT_TITLES = ("recovery on the result", "prior replay", "supermap retrodiction")


class CsvFormatError(ValueError):
    """Malformed sweep CSV; the message carries the offending line number."""


@dataclass(frozen=True)
class HeatmapSpec:
    """One rendering job: where to read, where to write, panel titles."""

    csv_path: str
    output_image_path: str
    titles: tuple[str, str, str] = DEFAULT_TITLES
    color_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if tuple(self.color_range) != (0.0, 1.0):
            raise CsvFormatError("color range is fixed to [0, 1] for comparability")


def load_grids(csv_path: str) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Parse a sweep CSV into (x values, y values, three fidelity grids).

    Grids are indexed [y, x].  Read-only and deterministic: equal bytes in,
    equal arrays out.
    """
    rows: dict[tuple[float, float], tuple[float, float, float]] = {}
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("line 1: empty file, expected header "
                                 + ",".join(EXPECTED_HEADER)) from None
        if [h.strip() for h in header] != EXPECTED_HEADER:
            raise CsvFormatError(
                f"line 1: bad header {','.join(header)!r}, expected {','.join(EXPECTED_HEADER)!r}"
            )
        for lineno, record in enumerate(reader, start=2):
            if not record or record == [""]:
                continue
            if len(record) != 5:
                raise CsvFormatError(f"line {lineno}: expected 5 columns, got {len(record)}")
            try:
                x, y, f1, f2, f3 = (float(v) for v in record)
            except ValueError as exc:
                raise CsvFormatError(f"line {lineno}: non-numeric entry ({exc})") from None
            if (x, y) in rows:
                raise CsvFormatError(f"line {lineno}: duplicate grid point ({x:g}, {y:g})")
            rows[(x, y)] = (f1, f2, f3)
    if not rows:
        raise CsvFormatError("line 2: no data rows")
    xs = np.array(sorted({k[0] for k in rows}))
    ys = np.array(sorted({k[1] for k in rows}))
    if len(rows) != xs.size * ys.size:
        raise CsvFormatError(
            f"incomplete grid: {len(rows)} rows for {xs.size} x-values * {ys.size} y-values"
        )
    grids = [np.empty((ys.size, xs.size)) for _ in range(3)]
    for (x, y), fs in rows.items():
        i = int(np.searchsorted(ys, y))
        j = int(np.searchsorted(xs, x))
        for g, v in zip(grids, fs):
            g[i, j] = v
    return xs, ys, grids


def render(spec: HeatmapSpec) -> str:
    """Write the three-panel image and return its path."""
    xs, ys, grids = load_grids(spec.csv_path)
    vmin, vmax = spec.color_range
    fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.2), constrained_layout=True)
    extent = None
    if xs.size > 1 and ys.size > 1:
        dx, dy = (xs[1] - xs[0]) / 2, (ys[1] - ys[0]) / 2
        extent = (xs[0] - dx, xs[-1] + dx, ys[0] - dy, ys[-1] + dy)
    last = None
    for ax, grid, title in zip(axes, grids, spec.titles):
        last = ax.imshow(grid, origin="lower", vmin=vmin, vmax=vmax,
                         extent=extent, aspect="auto", cmap="viridis")
        ax.set_title(title)
        ax.set_xlabel("prior parameter x")
        ax.set_ylabel("true parameter y")
    fig.colorbar(last, ax=axes, shrink=0.9, label="average fidelity")
    fig.savefig(spec.output_image_path, dpi=150)
    plt.close(fig)
    return spec.output_image_path


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        sys.stderr.write("usage: render_heatmap <in.csv> <out.png>\n")
        return 2
    try:
        out = render(HeatmapSpec(csv_path=args[0], output_image_path=args[1]))
    except (CsvFormatError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    sys.stdout.write(out + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
