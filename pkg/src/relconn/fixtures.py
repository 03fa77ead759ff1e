"""Synthetic dataset generation for tests, demos, and pipeline smoke runs.

Trials are spatially colored Gaussian noise. Each class gets its own SPD
channel covariance (a variance ramp and its mirror image), plus isotropic
sensor noise whose power is set by the SNR. A chosen fraction of trials is
"irrelevant": their class signal is replaced by a class-ambiguous background
with uniform cross-channel correlation, so a trained classifier sees them
with posteriors near one half.

The trial list splits into a calibration session (the first n_train trials)
and a validation session (the rest). Validation-session trials of each class
carry a small class-specific cross-channel coupling that calibration trials
lack. This mirrors session-to-session nonstationarity and is what gives the
validation covariances class-distinct off-diagonal structure after spatial
filtering; the filters exactly diagonalize the calibration class means, so
without it the projected mean covariances would be structureless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Trial, TrialSet, save_trialset


@dataclass(frozen=True)
class FixtureSpec:
    """Knobs of the synthetic dataset.

    snr is the linear ratio of class-signal power to sensor-noise power;
    math.inf disables sensor noise. session_shift scales the validation
    session's class-specific cross-channel coupling (0 disables it).
    """

    n_channels: int = 6
    n_per_class: int = 100
    snr: float = 3.0
    irrelevant_fraction: float = 0.25
    sampling_rate_hz: float = 200.0
    duration_s: float = 1.0
    n_train: int | None = None
    session_shift: float = 0.4
    class_names: tuple[str, str] = ("class0", "class1")

    def __post_init__(self):
        if self.n_channels < 2:
            raise ValueError("need at least 2 channels")
        if self.n_per_class < 2:
            raise ValueError("need at least 2 trials per class")
        if not 0.0 <= self.irrelevant_fraction < 1.0:
            raise ValueError("irrelevant_fraction must be in [0, 1)")
        if self.snr <= 0:
            raise ValueError("snr must be positive (math.inf allowed)")
        if not 0.0 <= self.session_shift < 1.0:
            raise ValueError("session_shift must be in [0, 1)")

    @property
    def n_trials(self) -> int:
        return 2 * self.n_per_class

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sampling_rate_hz))

    def resolved_n_train(self) -> int:
        if self.n_train is not None:
            if not 0 < self.n_train < self.n_trials:
                raise ValueError(
                    f"n_train must be in (0, {self.n_trials}), got {self.n_train}")
            return self.n_train
        return int(round(0.7 * self.n_trials))

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "n_per_class": self.n_per_class,
            "snr": self.snr if math.isfinite(self.snr) else "inf",
            "irrelevant_fraction": self.irrelevant_fraction,
            "sampling_rate_hz": self.sampling_rate_hz,
            "duration_s": self.duration_s,
            "n_train": self.resolved_n_train(),
            "session_shift": self.session_shift,
            "class_names": list(self.class_names),
        }


# class-signal variance ramp endpoints and background correlation; the ratio
# of the endpoints sets how far apart the classes sit relative to per-trial
# covariance scatter, which in turn calibrates posterior confidence
_RAMP_HIGH = 2.5
_RAMP_LOW = 0.5
_BACKGROUND_RHO = 0.2


def _class_covariances(spec: FixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Variance ramp for class 0, mirrored ramp for class 1."""
    d0 = np.geomspace(_RAMP_HIGH, _RAMP_LOW, spec.n_channels)
    return np.diag(d0), np.diag(d0[::-1])


def _session_couplings(spec: FixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Validation-session coupling: class 0 links channels (0, 2), class 1
    the mirrored pair. Entries scale with the coupled variances so the
    shifted covariance stays positive definite for session_shift < 1."""
    a0, a1 = _class_covariances(spec)
    n = spec.n_channels
    rho = spec.session_shift

    def coupling(base: np.ndarray, i: int, j: int) -> np.ndarray:
        delta = np.zeros((n, n))
        delta[i, j] = delta[j, i] = rho * math.sqrt(base[i, i] * base[j, j])
        return delta

    pair0 = (0, min(2, n - 1))
    pair1 = (n - 1, max(n - 3, 0))
    return coupling(a0, *pair0), coupling(a1, *pair1)


def _background_covariance(spec: FixtureSpec) -> np.ndarray:
    """Class-ambiguous background.

    The diagonal is the element-wise geometric mean of the two class
    ramps, i.e. the log-space midpoint, so background trials sit on the
    decision boundary rather than off the class manifold; a mild uniform
    correlation is added on top so they still contaminate the class graphs
    with a shared off-diagonal structure. Symmetric under channel reversal.
    """
    a0, a1 = _class_covariances(spec)
    mid = np.sqrt(np.diag(a0) * np.diag(a1))
    n = spec.n_channels
    rho = _BACKGROUND_RHO
    scale = np.sqrt(np.outer(mid, mid))
    return np.diag(mid) * (1.0 - rho) + rho * scale


def synthesize_trialset(spec: FixtureSpec, seed: int) -> tuple[TrialSet, dict]:
    """Generate a trial set in memory.

    Returns the set and a ground-truth dict with the planted irrelevant
    trial ids and the session split.
    """
    rng = np.random.default_rng(seed)
    n_train = spec.resolved_n_train()
    n_total = spec.n_trials
    n_samples = spec.n_samples

    a0, a1 = _class_covariances(spec)
    shift0, shift1 = _session_couplings(spec)
    background = _background_covariance(spec)

    if math.isinf(spec.snr):
        noise_var = 0.0
    else:
        noise_var = float(np.trace(a0)) / (spec.n_channels * spec.snr)
    noise = noise_var * np.eye(spec.n_channels)

    # per-session label sequences with both classes present, then shuffled
    labels = np.empty(n_total, dtype=int)
    train_labels = np.array([0] * (n_train // 2) + [1] * (n_train - n_train // 2))
    test_n = n_total - n_train
    n_test_c0 = spec.n_per_class - n_train // 2
    if not 0 < n_test_c0 < test_n:
        raise ValueError("split leaves a session without both classes")
    test_labels = np.array([0] * n_test_c0 + [1] * (test_n - n_test_c0))
    rng.shuffle(train_labels)
    rng.shuffle(test_labels)
    labels[:n_train] = train_labels
    labels[n_train:] = test_labels

    # plant irrelevant trials proportionally in both sessions
    irrelevant = np.zeros(n_total, dtype=bool)
    for start, stop in ((0, n_train), (n_train, n_total)):
        size = stop - start
        n_irr = int(round(spec.irrelevant_fraction * size))
        picks = rng.choice(size, size=n_irr, replace=False)
        irrelevant[start + picks] = True

    chol_cache: dict[tuple, np.ndarray] = {}

    def draw(cov: np.ndarray) -> np.ndarray:
        key = cov.tobytes()
        if key not in chol_cache:
            chol_cache[key] = np.linalg.cholesky(cov)
        return chol_cache[key] @ rng.standard_normal((spec.n_channels, n_samples))

    trials = []
    for tid in range(n_total):
        label = int(labels[tid])
        in_validation = tid >= n_train
        if irrelevant[tid]:
            cov = background + noise
        else:
            cov = (a0 if label == 0 else a1) + noise
            if in_validation:
                cov = cov + (shift0 if label == 0 else shift1)
        trials.append(Trial(draw(cov), label, tid))

    channel_names = tuple(f"ch{i + 1:02d}" for i in range(spec.n_channels))
    ts = TrialSet(tuple(trials), channel_names, spec.sampling_rate_hz,
                  spec.class_names)
    truth = {
        "seed": seed,
        "n_train": n_train,
        "irrelevant_ids": [int(i) for i in np.flatnonzero(irrelevant)],
        "spec": spec.to_dict(),
    }
    return ts, truth


def generate_fixture(spec: FixtureSpec, seed: int, out_dir) -> tuple[Path, Path]:
    """Write a synthetic dataset to disk.

    Produces a manifest with one binary file per trial plus a
    fixture_truth.json sidecar recording the planted irrelevant trial ids
    and the intended train/test split.
    """
    out_dir = Path(out_dir)
    ts, truth = synthesize_trialset(spec, seed)
    manifest_path = save_trialset(ts, out_dir)
    truth_path = out_dir / "fixture_truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path, truth_path
