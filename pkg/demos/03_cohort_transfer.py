"""Cross-cohort transfer and leave-one-dataset-out on three synthetic datasets.

The datasets differ in recording setting, device and labeling method, so
they can be grouped along each of those dimensions.
Run with ``python3 demos/03_cohort_transfer.py``.
"""
import tempfile
from pathlib import Path

from affectbench.core import Modality, cohort_groups
from affectbench.evaluation import cross_cohort_eval, format_cohort_matrix, lodo_eval
from affectbench.models import ModelSpec
from affectbench.pipeline import extract_feature_tables, ingest
from affectbench.synth import generate_corpus, multi_dataset_specs, write_corpus

with tempfile.TemporaryDirectory() as tmp:
    dirs = [write_corpus(generate_corpus(s), Path(tmp) / s.dataset_id) for s in multi_dataset_specs()]
    segments, loaded = ingest(dirs)
descriptors = [ds.descriptor for ds in loaded]
table = extract_feature_tables(segments).tables[Modality.EDA]
model = ModelSpec("lda")

results = []
for dim in ("setting", "device"):
    groups = cohort_groups(descriptors, dim)
    print(f"{dim}: " + ", ".join(f"{g.value}={sorted(g.datasets)}" for g in groups))
    for a in groups:
        for b in groups:
            if a != b:
                results.append(cross_cohort_eval(table, a, b, "arousal", model, modality="eda"))
        if len(a.datasets) >= 2:
            results += lodo_eval(table, a, "arousal", model, modality="eda")
print()
print(format_cohort_matrix(results))
