"""Harmonized EDA/PPG emotion-recognition benchmarking.

Subpackages cover ingestion of standardized recordings, windowing and
normalization, handcrafted features, signal-quality screening, classical
classifiers and subject-independent / cross-cohort evaluation.
"""
from .core import (Arousal, CohortDimension, DatasetDescriptor, LabelSet, Modality, Quadrant,
                   RawSignalRecord, Segment, Task, Valence)

__version__ = "0.1.0"

__all__ = [
    "Arousal", "CohortDimension", "DatasetDescriptor", "LabelSet", "Modality", "Quadrant",
    "RawSignalRecord", "Segment", "Task", "Valence", "__version__",
]
