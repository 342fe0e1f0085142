"""Handcrafted EDA and PPG/HRV features."""
from .eda import SCREvent, decompose_eda, detect_scr_peaks, eda_features, scr_summary
from .ppg import IBISeries, band_powers, clean_ppg, detect_ppg_peaks, hrv_features, ibi_series, ppg_features
from .registry import (DEFAULT_REGISTRY, EDA_FEATURES, HRV_FEATURES, HRV_STUBS, FeatureRegistry,
                       FeatureVector, combine_features)

__all__ = [
    "SCREvent", "decompose_eda", "detect_scr_peaks", "eda_features", "scr_summary",
    "IBISeries", "band_powers", "clean_ppg", "detect_ppg_peaks", "hrv_features", "ibi_series",
    "ppg_features", "DEFAULT_REGISTRY", "EDA_FEATURES", "HRV_FEATURES", "HRV_STUBS",
    "FeatureRegistry", "FeatureVector", "combine_features",
]
