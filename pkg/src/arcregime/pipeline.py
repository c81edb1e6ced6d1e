"""End-to-end run: signal -> STFT -> features -> GMM -> HMM -> analytics -> files."""

import contextlib
import dataclasses
import datetime
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import gmm, hmm, metrics, observation, presets, signal_io, tfa
from .errors import ArcRegimeError, ConfigError, DataError, NumericalError

log = logging.getLogger(__name__)

REPORT_KEYS = (
    "config", "conventions", "model", "loglik_trace", "path", "state_statistics",
    "transition", "temporal_metrics", "stationary", "alarms", "flags",
)
EXPORT_FILES = (
    "report.json", "features.csv", "spectrogram.csv", "spectrogram_axes.csv",
    "pca.csv", "silhouette.csv", "path.csv", "model.txt",
)

CONVENTIONS = {
    "entropy_base": "e (nats)",
    "variance_convention": "population (1/T)",
    "forward_backward": "per-step scaling with per-frame log-emission max shift",
    "dft_normalization": "none on forward; one-sided bins 0..N/2 without doubling",
    "parseval": "sum_k P[k] = (N*sum((x*w)**2) + P[0] + P[N/2]) / 2 for even N",
    "frame_time": "window centre (s)",
    "model_feature_space": "z-scored features (scaler stored with the model)",
    "diagnostics_feature_space": "z-scored features for PCA and silhouette",
    "state_order": "ascending energy mean: Transient, Stable, Extinction",
    "tie_break": "lowest state index",
    "covariance_regularization": "eps*I, eps = 1e-6*trace(Sigma)/d",
    "transition_floor": "1e-12 on non-structural entries during training",
}


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str = None
    column: int = 0
    synthesis: dict = None
    sample_rate: float = signal_io.DEFAULT_SAMPLE_RATE
    window_len: int = tfa.DEFAULT_WINDOW_LEN
    hop: int = tfa.DEFAULT_HOP
    window_kind: str = "hann"
    n_states: int = 3
    seed: int = 0
    gmm_restarts: int = 5
    gmm_max_iter: int = 200
    gmm_tol: float = 1e-6
    covariance_type: str = "full"
    hmm_max_iter: int = 200
    hmm_tol: float = 1e-6
    train_emissions: bool = True
    alarm_delta: int = 10
    alarm_theta: float = 0.5
    f_max: float = 60.0
    nyquist_margin: float = signal_io.DEFAULT_NYQUIST_MARGIN
    pca_components: int = 2
    output_dir: str = None

    def __post_init__(self):
        if (self.input_path is None) == (self.synthesis is None):
            raise ConfigError("exactly one of 'input_path' and 'synthesis' must be given")
        for name in ("window_len", "hop", "n_states", "gmm_restarts", "gmm_max_iter", "hmm_max_iter", "pca_components"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("gmm_tol", "hmm_tol", "sample_rate", "f_max"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.alarm_delta < 0:
            raise ConfigError("alarm_delta must be >= 0")
        if not 0.0 <= self.alarm_theta <= 1.0:
            raise ConfigError("alarm_theta must be in [0, 1]")
        if self.window_kind not in tfa.WINDOW_KINDS:
            raise ConfigError(f"window_kind must be one of {tfa.WINDOW_KINDS}")
        if self.covariance_type not in ("full", "diag"):
            raise ConfigError("covariance_type must be 'full' or 'diag'")
        if self.synthesis is not None and not isinstance(self.synthesis, dict):
            raise ConfigError("'synthesis' must be a mapping")

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        return dataclasses.asdict(self)


def parse_config_text(text):
    """JSON object, or ``key = value`` lines whose values are JSON or bare strings."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            data[key] = value
    return data


def load_config(path, **overrides):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = parse_config_text(path.read_text())
    data.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_mapping(data)


def bundled_config_path(name="synthetic.json"):
    return Path(str(resources.files("arcregime") / "configs" / name))


def synthesis_spec_from(mapping, default_seed=0):
    """Build a :class:`SynthesisSpec` from a config mapping.

    ``{"preset": "table", ...}`` starts from the reference regime parameters;
    other keys override :class:`SynthesisSpec` fields.
    """
    opts = dict(mapping)
    preset = opts.pop("preset", None)
    opts.setdefault("seed", default_seed)
    fields = {f.name for f in dataclasses.fields(signal_io.SynthesisSpec)}
    unknown = sorted(set(opts) - fields)
    if unknown:
        raise ConfigError(f"unknown synthesis keys: {', '.join(unknown)}")
    if preset is None:
        missing = sorted({"state_means", "transition", "duration_frames"} - set(opts))
        if missing:
            raise ConfigError(f"synthesis needs {', '.join(missing)} (or a preset)")
        return signal_io.SynthesisSpec(**opts)
    if preset != "table":
        raise ConfigError(f"unknown synthesis preset {preset!r}")
    return presets.table_synthesis_spec(**opts)


@dataclass(eq=False)
class RegimeReport:
    config: dict
    conventions: dict
    model: hmm.HmmParams
    standardizer: observation.Standardizer
    loglik_trace: dict
    path: np.ndarray
    state_statistics: metrics.StateStatistics
    transition: dict
    temporal_metrics: metrics.TemporalMetrics
    stationary: np.ndarray
    alarms: dict
    flags: dict
    spectrogram: tfa.Spectrogram = None
    observations: observation.ObservationSequence = None
    pca: tuple = None
    silhouette: tuple = None
    true_states: np.ndarray = None
    accuracy: float = None
    generated_at: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat())

    def to_json_dict(self):
        m = self.model
        model = {
            "state_labels": list(m.state_labels),
            "initial": m.initial,
            "transition": m.transition,
            "means": m.means,
            "covariances": m.covariances,
            "feature_names": list(observation.FEATURE_NAMES),
            "scaler_means": self.standardizer.means,
            "scaler_stds": self.standardizer.stds,
            "means_raw_units": self.standardizer.inverse(m.means),
        }
        stats = self.state_statistics
        state_rows = [
            dict(zip(("state", "count", "E_mean", "E_std", "H_mean", "H_std", "C_mean", "C_std"), row))
            for row in stats.rows()
        ]
        path = {"states": self.path, "labels": [m.state_labels[s] for s in self.path]}
        if self.true_states is not None:
            path["ground_truth_accuracy"] = self.accuracy
        config = dict(self.config)
        config["generated_at"] = self.generated_at
        data = {
            "config": config,
            "conventions": self.conventions,
            "model": model,
            "loglik_trace": self.loglik_trace,
            "path": path,
            "state_statistics": state_rows,
            "transition": self.transition,
            "temporal_metrics": dataclasses.asdict(self.temporal_metrics),
            "stationary": {"distribution": self.stationary, "method": "power iteration, max-abs increment < 1e-12"},
            "alarms": self.alarms,
            "flags": self.flags,
        }
        return _jsonable(data)

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except ArcRegimeError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"[{name}] {exc}") from exc
    except OSError as exc:
        raise DataError(f"[{name}] {exc}") from exc


def _ingest(config):
    if config.synthesis is not None:
        spec = synthesis_spec_from(config.synthesis, config.seed)
        signal, states = signal_io.synthesize_arc_signal(spec)
        return signal, states, spec
    signal = signal_io.load_signal(config.input_path, config.column, config.sample_rate)
    return signal, None, None


def run_pipeline(config):
    """Run every stage in order and, if ``config.output_dir`` is set, export.

    Stage failures re-raise with the stage name in brackets and keep their
    exception class (and so their exit code).
    """
    with _stage("ingest"):
        signal, synth_states, spec = _ingest(config)
    with _stage("sampling"):
        verdict = signal_io.validate_sampling(signal, config.f_max, config.nyquist_margin)
        if not verdict.passed:
            log.warning("sampling check failed: %s", verdict.message)
    with _stage("stft"):
        spectrogram = tfa.stft_power(signal, config.window_len, config.hop, config.window_kind)
    with _stage("features"):
        raw = observation.build_observations(spectrogram)
        z, scaler = observation.standardize(raw)
    K = config.n_states
    with _stage("gmm"):
        mix, gmm_trace = gmm.fit_gmm(
            z, K, seed=config.seed, max_iter=config.gmm_max_iter, tol=config.gmm_tol,
            n_restarts=config.gmm_restarts, covariance_type=config.covariance_type,
        )
    with _stage("hmm"):
        init = hmm.init_from_gmm(mix)
        params, hmm_trace = hmm.baum_welch(
            z, init, tol=config.hmm_tol, max_iter=config.hmm_max_iter, update_emissions=config.train_emissions,
        )
        if K == 3:
            params = hmm.relabel(params, hmm.label_states(params))
    with _stage("decode"):
        decoded = hmm.viterbi(z, params)
        states = decoded.states
    with _stage("analytics"):
        report = _analytics(config, spectrogram, raw, z, scaler, params, states, verdict)
        report.loglik_trace = {"gmm": gmm_trace, "hmm": hmm_trace, "viterbi_log_joint": decoded.log_joint}
        if synth_states is not None:
            truth = signal_io.frame_labels(synth_states, spec.frame_len, config.window_len, config.hop, len(states))
            _, report.accuracy = metrics.best_permutation(truth, states, K)
            report.true_states = truth
    if config.output_dir is not None:
        with _stage("export"):
            export_report(report, config.output_dir)
    return report


def _analytics(config, spectrogram, raw, z, scaler, params, states, verdict):
    K = params.n_states
    A = params.transition
    labelled = K == 3
    stable, extinction = (1, 2) if labelled else (None, None)
    transition = {"matrix": A, "persistence": np.diag(A).copy(), "instability_probability": None}
    if labelled:
        transition["persistence"], transition["instability_probability"] = metrics.transition_metrics(
            A, stable, extinction)
    transition["n_step"] = {"delta": config.alarm_delta, "matrix": hmm.n_step_prediction(A, config.alarm_delta)}
    flags = {
        "degenerate_frames": np.flatnonzero(raw.degenerate),
        "constant_features": [n for n, c in zip(raw.feature_names, scaler.constant) if c],
        "nyquist": {"passed": verdict.passed, "message": verdict.message},
        "unvisited_states": [],
        "silhouette_skipped": False,
        "states_labelled": labelled,
    }
    if len(states) >= 2:
        emp, unvisited = metrics.empirical_transition_matrix(states, K)
        transition["empirical_matrix"] = emp
        flags["unvisited_states"] = np.flatnonzero(unvisited)
        temporal = metrics.temporal_metrics(states, K)
    else:
        temporal = metrics.TemporalMetrics(1.0, 0.0, 1.0, 0.0, 0.0)
    stationary = hmm.stationary_distribution(A)
    alarms = {"delta": config.alarm_delta, "theta": config.alarm_theta, "by_state": [], "frames_fired": 0}
    if labelled:
        fired = np.zeros(K, bool)
        for k in range(K):
            res = hmm.instability_alarm(A, k, config.alarm_delta, config.alarm_theta, extinction)
            alarms["by_state"].append({"state": params.state_labels[k], "probability": res.probability, "fired": res.fired})
            fired[k] = res.fired
        alarms["frames_fired"] = int(fired[states].sum())

    scores, ratios = observation.pca_project(z, min(config.pca_components, z.dim))
    silhouette = None
    if np.unique(states).size >= 2:
        silhouette = observation.silhouette_scores(z, states)
    else:
        flags["silhouette_skipped"] = True
    flags["diagnostics"] = {
        "pca_explained_variance_ratio": ratios,
        "silhouette_mean": None if silhouette is None else silhouette[1],
    }
    return RegimeReport(
        config=config.to_dict(),
        conventions=dict(CONVENTIONS, window=config.window_kind),
        model=params,
        standardizer=scaler,
        loglik_trace={},
        path=states,
        state_statistics=metrics.state_statistics(raw, states, params.state_labels),
        transition=transition,
        temporal_metrics=temporal,
        stationary=stationary,
        alarms=alarms,
        flags=flags,
        spectrogram=spectrogram,
        observations=raw,
        pca=(scores, ratios),
        silhouette=silhouette,
    )


def model_conventions(spectrogram):
    out = {
        "window_len": spectrogram.window_len,
        "hop": spectrogram.hop,
        "window_kind": spectrogram.window_kind,
        "sample_rate": repr(spectrogram.sample_rate),
    }
    out["entropy_base"] = "e"
    out["variance_convention"] = "population"
    out["forward_backward"] = "scaled"
    return out


def _write_csv(path, header, rows):
    with Path(path).open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return Path(path)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def export_report(report, directory):
    """Write the eight report files into ``directory``; returns their paths."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    times = report.observations.frame_times
    labels = report.model.state_labels
    written = []
    report_path = out / "report.json"
    report_path.write_text(report.to_json())
    written.append(report_path)
    V = report.observations.vectors
    written.append(_write_csv(out / "features.csv", ("time", "energy", "entropy", "centroid"),
                              zip(times, V[:, 0], V[:, 1], V[:, 2])))
    written += tfa.write_spectrogram(report.spectrogram, out / "spectrogram.csv", out / "spectrogram_axes.csv")
    scores, _ = report.pca
    pcs = [f"pc{j + 1}" for j in range(scores.shape[1])]
    written.append(_write_csv(out / "pca.csv", ("time", *pcs, "state"),
                              ([t, *s, labels[z]] for t, s, z in zip(times, scores, report.path))))
    sil_rows = []
    if report.silhouette is not None:
        sil_rows = ([i, labels[z], s] for i, (z, s) in enumerate(zip(report.path, report.silhouette[0])))
    written.append(_write_csv(out / "silhouette.csv", ("index", "cluster", "score"), sil_rows))
    written.append(_write_csv(out / "path.csv", ("frame", "time", "state", "label"),
                              ([i, t, int(z), labels[z]] for i, (t, z) in enumerate(zip(times, report.path)))))
    written.append(hmm.save_model(out / "model.txt", report.model, report.standardizer,
                                  model_conventions(report.spectrogram)))
    return written
