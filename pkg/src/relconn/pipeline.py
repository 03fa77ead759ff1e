"""End-to-end pipeline: preprocess, fit, validate, select, graph, report.

Every stage writes flat, stage-prefixed artifacts into the configured
output directory and reads its inputs back from the artifacts of earlier
stages, so deleting downstream files and rerunning a single stage
reproduces them byte for byte. All JSON is written with sorted keys and
no timestamps; identical configuration and data give identical bytes.
"""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

from . import geometry
from .classify import (TslrModel, EvalReport, TrialOutcome, cross_validate,
                       evaluate, select_relevant, train)
from .csp import (SpatialFilterBank, fit_csp, project, select_channels,
                  trial_covariance)
from .data import TrialSet, load_trialset, split_train_test
from .errors import SchemaError
from .filters import (FilterSpec, apply_filter, concat_band_outputs,
                      design_bandpass, extract_epoch)
from .graphs import ConnectivityGraph, NodeMetrics, build_graph, separability

DATASET_KINDS = ("errp", "motor_imagery")
BAND_MODES = ("single", "concat")

# dataset-kind defaults: (filter family, order, bands), (onset_s, duration_s)
_KIND_FILTERS = {
    "errp": ("butterworth", 5, [(0.1, 10.0)]),
    "motor_imagery": ("elliptic", 6, [(8.0, 12.0), (16.0, 24.0)]),
}
_KIND_EPOCHS = {
    "errp": (0.0, 1.0),
    "motor_imagery": (0.0, 3.5),
}

ARTIFACTS = {
    "filter_bank": "10_filter_bank.json",
    "selected_channels": "10_selected_channels.csv",
    "model": "20_model.json",
    "cv_summary": "30_cv_summary.json",
    "eval_report": "40_eval_report.json",
    "eval_per_trial": "40_eval_per_trial.csv",
    "selected_trials": "50_selected_trials.json",
    "graph_all_class0": "60_graph_all_class0.json",
    "graph_all_class1": "60_graph_all_class1.json",
    "graph_selected_class0": "61_graph_selected_class0.json",
    "graph_selected_class1": "61_graph_selected_class1.json",
    "node_metrics": "70_node_metrics.csv",
    "separability": "80_separability.json",
}

_CONFIG_KEYS = {"dataset_kind", "manifest", "out_dir", "n_train", "n_filters",
                "lambda", "k_folds", "posterior_threshold",
                "top_edge_fraction", "seed", "band_mode", "filter", "epoch"}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run configuration.

    lambda is optional; when absent the trainer uses 0.1 / n_train.
    n_train is optional; when absent the split keeps 70% for training.
    filter_override / epoch_override replace the dataset-kind defaults.
    """

    dataset_kind: str
    manifest: str
    out_dir: str
    n_train: int | None = None
    n_filters: int = 6
    lam: float | None = None
    k_folds: int = 10
    posterior_threshold: float = 0.7
    top_edge_fraction: float = 0.1
    seed: int = 42
    band_mode: str = "single"
    filter_override: dict | None = None
    epoch_override: tuple[float, float] | None = None

    def __post_init__(self):
        if self.dataset_kind not in DATASET_KINDS:
            raise ValueError(
                f"dataset_kind must be one of {DATASET_KINDS}, "
                f"got {self.dataset_kind!r}")
        if self.band_mode not in BAND_MODES:
            raise ValueError(
                f"band_mode must be one of {BAND_MODES}, got {self.band_mode!r}")
        if self.band_mode == "concat" and self.dataset_kind == "errp":
            raise ValueError("band_mode 'concat' requires dataset_kind "
                             "'motor_imagery' (errp has a single band)")
        if self.k_folds < 2:
            raise ValueError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.n_filters < 2 or self.n_filters % 2 != 0:
            raise ValueError(
                f"n_filters must be a positive even number, got {self.n_filters}")
        if not 0.5 < self.posterior_threshold <= 1.0:
            raise ValueError(
                f"posterior_threshold must be in (0.5, 1], "
                f"got {self.posterior_threshold}")
        if not 0.0 < self.top_edge_fraction <= 1.0:
            raise ValueError(
                f"top_edge_fraction must be in (0, 1], "
                f"got {self.top_edge_fraction}")
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.n_train is not None and self.n_train < 1:
            raise ValueError(f"n_train must be >= 1, got {self.n_train}")
        if self.epoch_override is not None:
            object.__setattr__(self, "epoch_override",
                               tuple(float(v) for v in self.epoch_override))

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise SchemaError(f"config is not valid JSON: {e}") from e
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {
            "dataset_kind": raw.get("dataset_kind", "errp"),
            "manifest": raw.get("manifest", ""),
            "out_dir": raw.get("out_dir", ""),
            "n_train": raw.get("n_train"),
            "n_filters": raw.get("n_filters", 6),
            "lam": raw.get("lambda"),
            "k_folds": raw.get("k_folds", 10),
            "posterior_threshold": raw.get("posterior_threshold", 0.7),
            "top_edge_fraction": raw.get("top_edge_fraction", 0.1),
            "seed": raw.get("seed", 42),
            "band_mode": raw.get("band_mode", "single"),
            "filter_override": raw.get("filter"),
            "epoch_override": tuple(raw["epoch"]) if raw.get("epoch") else None,
        }
        for key, value in overrides.items():
            if value is not None:
                kwargs[key] = value
        cfg = cls(**kwargs)
        if not cfg.manifest:
            raise SchemaError("config must name a manifest")
        if not cfg.out_dir:
            raise SchemaError("config must name an out_dir")
        return cfg

    def with_overrides(self, **overrides) -> "PipelineConfig":
        supplied = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **supplied)

    def filter_specs(self, sampling_rate_hz: float) -> list[FilterSpec]:
        family, order, bands = _KIND_FILTERS[self.dataset_kind]
        ripple, atten = 1.0, 50.0
        if self.filter_override:
            d = dict(self.filter_override)
            family = d.get("family", family)
            order = int(d.get("order", order))
            ripple = float(d.get("passband_ripple_db", ripple))
            atten = float(d.get("stopband_atten_db", atten))
            if "band_hz" in d:
                bands = [tuple(d["band_hz"])]
        elif self.band_mode == "single":
            bands = bands[:1]
        return [FilterSpec(family, order, band, sampling_rate_hz,
                           ripple, atten) for band in bands]

    def epoch_window(self) -> tuple[float, float]:
        if self.epoch_override is not None:
            return self.epoch_override
        return _KIND_EPOCHS[self.dataset_kind]

    def resolved_n_train(self, n_total: int) -> int:
        if self.n_train is not None:
            return self.n_train
        return int(round(0.7 * n_total))

    def out_path(self, artifact: str) -> Path:
        return Path(self.out_dir) / ARTIFACTS[artifact]


@contextmanager
def _stage(name: str):
    """Prefix errors from package code with the failing stage name."""
    try:
        yield
    except (ValueError, ArithmeticError) as e:
        message = f"stage {name}: {e}"
        e.args = (message,) + e.args[1:]
        raise


def _write_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def preprocess(cfg: PipelineConfig, ts: TrialSet) -> TrialSet:
    """Band-pass filter every trial, cut the epoch window, and (in concat
    mode) join the band outputs along time."""
    specs = cfg.filter_specs(ts.sampling_rate_hz)
    filts = [design_bandpass(s) for s in specs]
    onset, duration = cfg.epoch_window()
    out = []
    for t in ts:
        bands = [extract_epoch(apply_filter(f, t), onset, duration,
                               ts.sampling_rate_hz) for f in filts]
        out.append(bands[0] if len(bands) == 1 else concat_band_outputs(bands))
    return ts.replace_trials(out)


def _load_split(cfg: PipelineConfig) -> tuple[TrialSet, TrialSet]:
    ts = load_trialset(cfg.manifest)
    ts = preprocess(cfg, ts)
    return split_train_test(ts, cfg.resolved_n_train(len(ts)))


def _unique_node_names(picks) -> list[str]:
    seen: dict[str, int] = {}
    names = []
    for _, channel in picks:
        seen[channel] = seen.get(channel, 0) + 1
        names.append(channel if seen[channel] == 1
                     else f"{channel}({seen[channel]})")
    return names


def stage_fit_csp(cfg: PipelineConfig) -> Path:
    """Fit the spatial filters on the training split; write the bank and
    the per-filter selected channels."""
    with _stage("fit-csp"):
        train_set, _ = _load_split(cfg)
        bank = fit_csp(train_set, cfg.n_filters)
        picks = select_channels(bank, train_set.channel_names)
        path = cfg.out_path("filter_bank")
        _write_json(path, {
            "filter_bank": bank.to_dict(),
            "selected_channels": [[idx, name] for idx, name in picks],
            "node_names": _unique_node_names(picks),
            "n_train": len(train_set),
        })
        _write_csv(cfg.out_path("selected_channels"),
                   ["filter_index", "channel_index", "channel_name"],
                   [(j, idx, name) for j, (idx, name) in enumerate(picks)])
        return path


def _load_bank(cfg: PipelineConfig) -> tuple[SpatialFilterBank, list[str]]:
    d = _read_json(cfg.out_path("filter_bank"))
    return SpatialFilterBank.from_dict(d["filter_bank"]), d["node_names"]


def stage_train(cfg: PipelineConfig) -> Path:
    """Train the tangent-space model on the training split only."""
    with _stage("train"):
        train_set, _ = _load_split(cfg)
        bank, _ = _load_bank(cfg)
        model = train(train_set, bank, cfg.lam)
        path = cfg.out_path("model")
        _write_json(path, model.to_dict())
        return path


def stage_cv(cfg: PipelineConfig) -> Path:
    """Stratified k-fold cross-validation on the training split; filters
    and reference are refit inside each fold."""
    with _stage("cv"):
        train_set, _ = _load_split(cfg)
        mean, std = cross_validate(train_set, cfg.k_folds, cfg.lam,
                                   cfg.n_filters, cfg.seed)
        path = cfg.out_path("cv_summary")
        _write_json(path, {
            "k_folds": cfg.k_folds,
            "mean_accuracy": mean,
            "std_accuracy": std,
            "seed": cfg.seed,
            "lambda": cfg.lam,
            "n_trials": len(train_set),
        })
        return path


def stage_evaluate(cfg: PipelineConfig) -> Path:
    """Score the model on the held-out split; write aggregates plus the
    per-trial outcome table."""
    with _stage("evaluate"):
        _, test_set = _load_split(cfg)
        model = TslrModel.from_dict(_read_json(cfg.out_path("model")))
        report = evaluate(model, test_set)
        path = cfg.out_path("eval_report")
        _write_json(path, report.to_dict())
        _write_csv(cfg.out_path("eval_per_trial"),
                   ["trial_id", "true_label", "predicted_label", "posterior"],
                   report.per_trial_rows())
        return path


def _load_report(cfg: PipelineConfig) -> EvalReport:
    aggregates = _read_json(cfg.out_path("eval_report"))
    outcomes = []
    with open(cfg.out_path("eval_per_trial"), "r", encoding="utf-8",
              newline="") as fh:
        for row in csv.DictReader(fh):
            outcomes.append(TrialOutcome(
                int(row["trial_id"]), int(row["true_label"]),
                int(row["predicted_label"]), float(row["posterior"])))
    return EvalReport(aggregates["accuracy"], aggregates["precision"],
                      aggregates["recall"], tuple(outcomes))


def stage_select(cfg: PipelineConfig) -> Path:
    """Filter the evaluated trials down to confident, correct ones."""
    with _stage("select"):
        report = _load_report(cfg)
        ids = select_relevant(report, cfg.posterior_threshold)
        path = cfg.out_path("selected_trials")
        _write_json(path, {
            "threshold": cfg.posterior_threshold,
            "selected_ids": ids,
            "n_selected": len(ids),
            "n_evaluated": len(report.per_trial),
        })
        return path


def stage_graph(cfg: PipelineConfig) -> list[Path]:
    """Build per-class connectivity graphs from the held-out trials, once
    from all of them and once from the selected subset, and write the
    node-metric table."""
    with _stage("graph"):
        _, test_set = _load_split(cfg)
        bank, node_names = _load_bank(cfg)
        selected = set(_read_json(cfg.out_path("selected_trials"))["selected_ids"])

        covs = {t.trial_id: trial_covariance(project(bank, t))
                for t in test_set}
        paths = []
        metric_rows = []
        for class_index in (0, 1):
            all_ids = [t.trial_id for t in test_set if t.label == class_index]
            sel_ids = [tid for tid in all_ids if tid in selected]
            for condition, ids in (("all", all_ids), ("selected", sel_ids)):
                if not ids:
                    raise ValueError(
                        f"no {condition} trials for class {class_index}; "
                        f"cannot build a graph")
                graph = build_graph([covs[tid] for tid in ids], node_names)
                key = f"graph_{condition}_class{class_index}"
                path = cfg.out_path(key)
                _write_json(path, {
                    **graph.to_dict(),
                    "condition": condition,
                    "class_index": class_index,
                    "class_name": test_set.class_names[class_index],
                    "n_trials": len(ids),
                })
                paths.append(path)
                metrics = NodeMetrics.from_graph(graph)
                for metric, values in metrics.by_name().items():
                    for node, value in zip(graph.node_names, values):
                        metric_rows.append(
                            (node, metric, float(value),
                             f"{condition}:class{class_index}"))

        _write_csv(cfg.out_path("node_metrics"),
                   ["node", "metric", "value", "condition"], metric_rows)
        return paths


def stage_report(cfg: PipelineConfig) -> Path:
    """Compare class separability of the graph metrics before and after
    trial selection."""
    with _stage("report"):
        metrics = {}
        for condition in ("all", "selected"):
            per_class = []
            for class_index in (0, 1):
                d = _read_json(
                    cfg.out_path(f"graph_{condition}_class{class_index}"))
                graph = ConnectivityGraph.from_dict(d)
                per_class.append(NodeMetrics.from_graph(graph))
            metrics[condition] = separability(per_class[0], per_class[1])

        improved = {name: metrics["selected"][name] >= metrics["all"][name]
                    for name in metrics["all"]}
        path = cfg.out_path("separability")
        _write_json(path, {
            "all": metrics["all"],
            "selected": metrics["selected"],
            "improved": improved,
            "n_improved": sum(improved.values()),
            "eig_clamp_events": geometry.clamp_event_count(),
        })
        return path


def run_pipeline(cfg: PipelineConfig) -> dict[str, Path]:
    """Run every stage in order; returns artifact name -> path."""
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    geometry.reset_clamp_events()
    stage_fit_csp(cfg)
    stage_train(cfg)
    stage_cv(cfg)
    stage_evaluate(cfg)
    stage_select(cfg)
    stage_graph(cfg)
    stage_report(cfg)
    return {name: cfg.out_path(name) for name in ARTIFACTS}
