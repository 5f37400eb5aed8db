"""fidgetkit: self-adaptor and fidgeting analysis of pose time series."""

__version__ = "0.1.0"
