"""pbih: p-biharmonic hypersurface residuals in conformally flat spaces."""

__version__ = "0.1.0"
