"""Heatmap rendering for recovery-fidelity sweep CSVs."""

from .render import CsvFormatError, HeatmapSpec, load_grids, render

__all__ = ["CsvFormatError", "HeatmapSpec", "load_grids", "render"]
__version__ = "0.1.0"
