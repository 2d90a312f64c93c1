"""Calibration estimators on principal components for survey sampling."""

from ._surveycalib import (
    ConfigError,
    NumericalError,
    calibrate,
    check_config,
    chi_square_weights,
    draw_sample,
    eig,
    population_covariance,
    select_r,
    simulate,
    synthetic_population,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "calibrate",
    "check_config",
    "chi_square_weights",
    "draw_sample",
    "eig",
    "population_covariance",
    "select_r",
    "simulate",
    "synthetic_population",
]
