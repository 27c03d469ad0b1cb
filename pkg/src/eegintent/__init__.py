"""Desk-scale pipeline for decoding speech intention from EEG under
misarticulation: synthetic labeled EEG, Welch spectral features, FDR band
statistics with topographic maps, and a band-suppressed multitask decoder
evaluated against an encoder-only baseline."""

from .data import (
    AcquisitionSpec,
    Dataset,
    DomainLabel,
    TrialRecord,
    load_dataset,
    save_dataset,
    stratified_split,
    stratified_split_indices,
)
from .evaluation import EvalReport, evaluate, macro_f1, predict
from .model import (
    BandTable,
    FeatureScaler,
    LossBreakdown,
    ModelConfig,
    ModelParams,
    TrainMode,
    backward,
    compute_loss,
    forward,
    init_params,
    median_heuristic,
    mmd_rbf,
    train,
)
from .montage import Montage, Region, channel_position, default_montage
from .spectral import (
    FeatureSet,
    SpectralFeatures,
    WelchConfig,
    band_power,
    extract_feature_set,
    extract_features,
    fft,
    ifft,
    welch_psd,
)
from .stats import (
    TTestMap,
    TTestResult,
    band_topomaps,
    bh_fdr,
    render_topomap_svg,
    welch_t_test,
)
from .synth import SynthConfig, generate_dataset, generate_trial, pink_noise

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec",
    "BandTable",
    "Dataset",
    "DomainLabel",
    "EvalReport",
    "FeatureScaler",
    "FeatureSet",
    "LossBreakdown",
    "ModelConfig",
    "ModelParams",
    "Montage",
    "Region",
    "SpectralFeatures",
    "SynthConfig",
    "TTestMap",
    "TTestResult",
    "TrainMode",
    "TrialRecord",
    "WelchConfig",
    "backward",
    "band_power",
    "band_topomaps",
    "bh_fdr",
    "channel_position",
    "compute_loss",
    "default_montage",
    "evaluate",
    "extract_feature_set",
    "extract_features",
    "fft",
    "forward",
    "generate_dataset",
    "generate_trial",
    "ifft",
    "init_params",
    "load_dataset",
    "macro_f1",
    "median_heuristic",
    "mmd_rbf",
    "pink_noise",
    "predict",
    "render_topomap_svg",
    "save_dataset",
    "stratified_split",
    "stratified_split_indices",
    "train",
    "welch_psd",
    "welch_t_test",
]
