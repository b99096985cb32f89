"""Attribution methods (IG, LRP) and relevance analysis for 12-lead ECG classifiers."""

from ._core import (  # noqa: F401
    LEAD_NAMES,
    RECORDING_LEADS,
    RECORDING_RATE_HZ,
    RECORDING_SAMPLES,
    Model,
    classify_with_threshold,
    detect_r_peaks,
    fit_length,
    fold_batchnorm,
    forward,
    gradient,
    integrated_gradients,
    load_model,
    lrp,
    mean_lead,
    mean_recording,
    pwave_scorer,
    resample,
    resnet_mini,
    save_model,
    synth_ecg,
    tiny_linear,
    wilcoxon_rank_sum,
)

__version__ = "0.1.0"
