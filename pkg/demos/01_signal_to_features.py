"""Follow one synthetic participant from raw signals to feature vectors.

Run with ``python3 demos/01_signal_to_features.py``.
"""
import numpy as np

from affectbench.features import (combine_features, decompose_eda, detect_scr_peaks, eda_features,
                                  ppg_features)
from affectbench.synth import SynthSpec, generate_corpus

spec = SynthSpec(n_participants=1, segments_per_quadrant=1, segment_s=120.0)
corpus = generate_corpus(spec)
eda, ppg = corpus.records
print(f"participant {eda.participant_id}: EDA {len(eda.samples)} samples at {eda.sampling_rate_hz:g} Hz, "
      f"PPG {len(ppg.samples)} samples at {ppg.sampling_rate_hz:g} Hz")

for task in corpus.annotations:
    e0, e1 = (int(round(t * eda.sampling_rate_hz)) for t in (task.start_s, task.end_s))
    p0, p1 = (int(round(t * ppg.sampling_rate_hz)) for t in (task.start_s, task.end_s))
    x = eda.samples[e0:e1]

    # tonic/phasic split, then SCR events on the phasic part
    tonic, phasic = decompose_eda(x, eda.sampling_rate_hz)
    events = detect_scr_peaks(phasic, eda.sampling_rate_hz)
    planted = corpus.planted_scr[(task.participant_id, task.name)]

    fe = eda_features(x, eda.sampling_rate_hz, segment_id=task.name)
    fp = ppg_features(ppg.samples[p0:p1], ppg.sampling_rate_hz, segment_id=task.name)
    both = combine_features(fe, fp)
    print(f"{task.name:>8}: planted SCRs {planted:2d}, detected {len(events):2d}, "
          f"tonic mean {tonic.mean():5.2f} uS, BPM {fp['BPM']:5.1f}, SD1 {fp['HRV_SD1']:6.1f} ms, "
          f"{int(np.isfinite(both.values).sum())}/{len(both)} finite features")
