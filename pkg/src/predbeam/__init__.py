"""Predictive beamforming simulator with a from-scratch convolutional-LSTM angle predictor."""

__version__ = "0.1.0"
