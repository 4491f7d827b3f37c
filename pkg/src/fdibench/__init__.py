"""Fire danger index workbench: patch classifiers, dense FDI maps and map-based evaluation."""

__version__ = "0.1.0"
