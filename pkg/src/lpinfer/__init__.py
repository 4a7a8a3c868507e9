"""Lag-augmented local projection inference for autoregressive time series."""
