"""Self-supervised tempo estimation on synthetic click tracks."""

from ._sstempo import (
    CalibrationError,
    ConfigError,
    DataError,
    Error,
    NumericalError,
    calibrate,
    huber,
    log_bin_centers,
    novelty,
    predict,
    run_experiment,
    sample_tempi,
    saturation_metric,
    sigma_of,
    spearman,
    synth_click_track,
    tempogram,
    total_loss,
)

__all__ = [
    "CalibrationError",
    "ConfigError",
    "DataError",
    "Error",
    "NumericalError",
    "calibrate",
    "huber",
    "log_bin_centers",
    "novelty",
    "predict",
    "run_experiment",
    "sample_tempi",
    "saturation_metric",
    "sigma_of",
    "spearman",
    "synth_click_track",
    "tempogram",
    "total_loss",
]
