"""Figure rendering for crn-ude experiment outputs.

Consumes only the CSV/JSON files the crn-ude CLI writes; no metric is
ever recomputed here.
"""

from .plots import CI_THRESHOLD, FigureError, make_figure, render

__all__ = ["CI_THRESHOLD", "FigureError", "make_figure", "render"]
