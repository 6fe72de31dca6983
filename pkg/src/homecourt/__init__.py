"""Home-court, scorekeeper and referee bias analysis for basketball box scores."""

__version__ = "0.1.0"
