"""Offline figure rendering for dormancy-lab output files."""

__version__ = "0.1.0"

from .render import PlotJob, RenderError, RenderInfo, render
