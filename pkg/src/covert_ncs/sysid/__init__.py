"""System Identification attack: grey-box estimation from eavesdropped traces."""
from .batch import (
    NAMES, BatchError, IdentificationResult, batch_identify, identify_controller, identify_plant, report,
    results_from_report, true_coefficients, write_histogram_csv,
)
from .estimator import ModelTemplate, TransferFunctionEstimator, prediction_error
from .stats import CoefficientStats, StatisticsError, describe, excess_kurtosis, histogram, mean_ci, pearson_skew

__all__ = [
    "NAMES", "BatchError", "CoefficientStats", "IdentificationResult", "ModelTemplate", "StatisticsError",
    "TransferFunctionEstimator", "batch_identify", "describe", "excess_kurtosis", "histogram",
    "identify_controller", "identify_plant", "mean_ci", "pearson_skew", "prediction_error", "report",
    "results_from_report", "true_coefficients", "write_histogram_csv",
]
