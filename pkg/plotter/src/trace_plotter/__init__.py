from .plotting import FIGURE_KINDS, PlotError, PlotSpec, plot

__version__ = "0.1.0"
