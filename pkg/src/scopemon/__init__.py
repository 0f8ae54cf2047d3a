"""Runtime scope-compliance monitoring with statistical distances and SCUEs."""

from .distances import (
    ALL_KINDS,
    ECDF_KINDS,
    DistanceKind,
    EsParams,
    SddResult,
    SortedSample,
    ad_distance,
    cvm_distance,
    dts_distance,
    es_statistic,
    ks_distance,
    make_sorted,
    sdd,
    wasserstein_distance,
)
from .estimators import CalibrationSet, FitForm, Scue, build_set, evaluate_scue, fit_scue, measure_calibration
from .features import FeatureMatrix, PcaModel, fit_pca, pca_transform, read_csv
from .monitor import Monitor, MonitorConfig, UncertaintyReport, decide, score_confusion, threshold_sweep
from .resampling import PowerCurve, ad_critical_value, bootstrap_p_value, ks_critical_value, power_analysis

__version__ = "0.1.0"
