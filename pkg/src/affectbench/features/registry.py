"""Feature column registry and the named feature vector type."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from ..core import Modality

EDA_FEATURES = (
    "ku_eda", "sk_eda", "dynrange", "slope", "variance", "entropy", "insc",
    "first_derivative_mean", "max_scr", "min_scr", "nSCR", "meanAmpSCR",
    "meanRespSCR", "sumAmpSCR", "sumRespSCR",
)

HRV_FEATURES = (
    "BPM", "PPG_Rate_Mean", "HRV_MedianNN", "HRV_Prc20NN", "HRV_MinNN",
    "HRV_HTI", "HRV_TINN", "HRV_LF", "HRV_HF", "HRV_VHF", "HRV_LFn", "HRV_HFn",
    "HRV_LnHF", "HRV_SD1", "HRV_SD2", "HRV_SD1SD2", "HRV_CVI", "HRV_ApEn",
    "HRV_ShanEn",
)

# Reserved column names without a built-in estimator. They stay NaN (and are
# imputed downstream) unless an extractor is supplied.
HRV_STUBS = (
    "HRV_PSS", "HRV_PAS", "HRV_PI", "HRV_C1d", "HRV_C1a", "HRV_DFA_alpha1",
    "HRV_MFDFA_alpha1_Width", "HRV_MFDFA_alpha1_Peak", "HRV_MFDFA_alpha1_Mean",
    "HRV_MFDFA_alpha1_Max", "HRV_MFDFA_alpha1_Delta", "HRV_MFDFA_alpha1_Asymmetry",
    "HRV_FuzzyEn", "HRV_MSEn", "HRV_CMSEn", "HRV_RCMSEn", "HRV_CD", "HRV_HFD",
    "HRV_KFD", "HRV_LZC",
)


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one segment and modality.

    ``flags`` collects precondition failures (e.g. ``"frequency: span < 60 s"``);
    the affected values are NaN and get imputed later.
    """

    names: tuple[str, ...]
    values: np.ndarray
    segment_id: str = ""
    modality: Modality = Modality.EDA
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        vals = np.asarray(self.values, dtype=float).ravel()
        if len(names) != len(vals):
            raise ValueError("names and values differ in length")
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        vals = vals.copy()
        vals[~np.isfinite(vals)] = np.nan
        vals.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "flags", tuple(self.flags))

    @classmethod
    def from_dict(cls, values: Mapping[str, float], **kw) -> "FeatureVector":
        return cls(tuple(values), np.array(list(values.values()), dtype=float), **kw)

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    def reindex(self, names) -> "FeatureVector":
        """Project onto ``names``; names missing here become NaN."""
        lookup = self.as_dict()
        vals = [lookup.get(n, np.nan) for n in names]
        return FeatureVector(tuple(names), vals, self.segment_id, self.modality, self.flags)


def combine_features(eda_fv: FeatureVector, ppg_fv: FeatureVector) -> FeatureVector:
    """Concatenate EDA and PPG vectors of one segment, EDA columns first."""
    if eda_fv.segment_id != ppg_fv.segment_id:
        raise ValueError(f"segment mismatch: {eda_fv.segment_id!r} vs {ppg_fv.segment_id!r}")
    clash = set(eda_fv.names) & set(ppg_fv.names)
    if clash:
        raise ValueError(f"duplicate feature names: {sorted(clash)}")
    return FeatureVector(eda_fv.names + ppg_fv.names,
                         np.concatenate([eda_fv.values, ppg_fv.values]),
                         eda_fv.segment_id, Modality.COMBINED,
                         tuple(f"eda/{f}" for f in eda_fv.flags) + tuple(f"ppg/{f}" for f in ppg_fv.flags))


@dataclass(frozen=True)
class FeatureRegistry:
    """Immutable column layout plus optional estimators for reserved HRV names.

    ``extractors`` maps a reserved name to ``f(nn_ms) -> float``.
    """

    eda: tuple[str, ...] = EDA_FEATURES
    hrv: tuple[str, ...] = HRV_FEATURES
    stubs: tuple[str, ...] = HRV_STUBS
    extractors: Mapping[str, Callable[[np.ndarray], float]] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.extractors) - set(self.stubs)
        if unknown:
            raise ValueError(f"extractors for unreserved names: {sorted(unknown)}")
        object.__setattr__(self, "extractors", MappingProxyType(dict(self.extractors)))

    def __reduce__(self):
        return type(self), (self.eda, self.hrv, self.stubs, dict(self.extractors))

    @property
    def ppg(self) -> tuple[str, ...]:
        return self.hrv + self.stubs

    def columns(self, modality: Modality | str) -> tuple[str, ...]:
        modality = Modality.parse(modality)
        if modality is Modality.EDA:
            return self.eda
        if modality is Modality.PPG:
            return self.ppg
        return self.eda + self.ppg


DEFAULT_REGISTRY = FeatureRegistry()
