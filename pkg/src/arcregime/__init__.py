"""Regime inference for welding-arc current: STFT features and a Gaussian HMM."""

from .errors import ArcRegimeError, ConfigError, DataError, NumericalError
from .gmm import GmmParams, fit_gmm, hard_assign
from .hmm import (
    HmmParams,
    baum_welch,
    emission_logpdf,
    forward_backward,
    instability_alarm,
    joint_log_prob,
    label_states,
    load_model,
    n_step_prediction,
    relabel,
    save_model,
    stationary_distribution,
    viterbi,
)
from .metrics import empirical_transition_matrix, state_statistics, temporal_metrics, transition_metrics
from .observation import ObservationSequence, build_observations, pca_project, silhouette_scores, standardize
from .pipeline import PipelineConfig, RegimeReport, export_report, run_pipeline
from .signal_io import SampledSignal, SynthesisSpec, load_signal, segment, synthesize_arc_signal, validate_sampling
from .tfa import Spectrogram, band_energy, extract_frame_features, stft_power

__version__ = "0.1.0"
