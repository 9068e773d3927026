"""Run metrics: accuracy, task time, Wolpaw ITR, summaries, averaged ERPs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


def task_accuracy(correct: int, incorrect: int) -> float | None:
    """Correct selections over all selections. None when no selections occurred.

    An undefined accuracy is reported as absent, never as 0.
    """
    if correct < 0 or incorrect < 0:
        raise InputError("selection counts must be >= 0")
    total = correct + incorrect
    if total == 0:
        return None
    return correct / total


def task_time(t_start: float, t_end: float) -> float:
    if t_end < t_start:
        raise InputError(f"t_end {t_end} precedes t_start {t_start}")
    return t_end - t_start


def _xlog2x(x: float) -> float:
    return 0.0 if x <= 0.0 else x * np.log2(x)


def bits_per_selection(n_classes: int, p: float) -> float:
    """Wolpaw bits per selection, clamped to 0 at or below chance."""
    if n_classes < 2:
        raise InputError("n_classes must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise InputError("accuracy must lie in [0, 1]")
    if p <= 1.0 / n_classes:
        return 0.0
    if p == 1.0:
        return float(np.log2(n_classes))
    raw = np.log2(n_classes) + _xlog2x(p) + (1.0 - p) * np.log2((1.0 - p) / (n_classes - 1))
    return float(max(raw, 0.0))


@dataclass(frozen=True)
class RunMetrics:
    n_classes: int
    n_trials: int
    accuracy: float | None
    task_time_s: float
    itr_bits_per_selection: float
    itr_bits_per_sec: float
    itr_bits_per_min: float

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_trials": self.n_trials,
            "accuracy": self.accuracy,
            "task_time_s": self.task_time_s,
            "itr_bits_per_selection": self.itr_bits_per_selection,
            "itr_bits_per_sec": self.itr_bits_per_sec,
            "itr_bits_per_min": self.itr_bits_per_min,
        }


def itr(n_classes: int, correct: int, incorrect: int, t_start: float, t_end: float) -> RunMetrics:
    """Per-run metrics from raw tallies.

    Rate = (selections / task time) * bits per selection, in bits/s and
    bits/min. A run with no selections has accuracy None and zero ITR.
    """
    duration = task_time(t_start, t_end)
    acc = task_accuracy(correct, incorrect)
    n_trials = correct + incorrect
    if acc is None:
        bps = 0.0
    else:
        bps = bits_per_selection(n_classes, acc)
    if n_trials > 0 and duration <= 0:
        raise InputError("task duration must be positive when selections occurred")
    rate = (n_trials / duration) * bps if duration > 0 else 0.0
    return RunMetrics(
        n_classes=n_classes,
        n_trials=n_trials,
        accuracy=acc,
        task_time_s=duration,
        itr_bits_per_selection=bps,
        itr_bits_per_sec=rate,
        itr_bits_per_min=rate * 60.0,
    )


def _mad(values: np.ndarray) -> float:
    med = np.median(values)
    return float(np.median(np.abs(values - med)))


def summarize_runs(runs: list[RunMetrics], tag: str = "") -> dict:
    """Mean/SD/median/MAD for accuracy, time, and ITR over a set of runs."""
    if not runs:
        raise InputError("cannot summarize an empty run list")
    out: dict = {"tag": tag, "n_runs": len(runs)}
    fields = {
        "accuracy": [r.accuracy for r in runs if r.accuracy is not None],
        "task_time_s": [r.task_time_s for r in runs],
        "itr_bits_per_selection": [r.itr_bits_per_selection for r in runs],
        "itr_bits_per_min": [r.itr_bits_per_min for r in runs],
    }
    for name, vals in fields.items():
        if not vals:
            out[name] = None
            continue
        arr = np.asarray(vals, dtype=float)
        out[name] = {
            "mean": float(np.mean(arr)),
            "sd": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
            "median": float(np.median(arr)),
            "mad": _mad(arr),
        }
    return out


@dataclass(frozen=True)
class ErpAverage:
    target_mean: np.ndarray | None  # (8, L) uV
    nontarget_mean: np.ndarray | None
    n_target: int
    n_nontarget: int
    fs: float

    @property
    def complete(self) -> bool:
        return self.target_mean is not None and self.nontarget_mean is not None


def average_erps(epochs, fs: float = 250.0) -> ErpAverage:
    """Element-wise per-class mean over labeled epochs.

    Epochs carry .data (8, L) and .label ("target" / "nontarget"). A class
    with no epochs yields a None mean so callers can flag partial results.
    """
    targets = [e.data for e in epochs if e.label == "target"]
    nontargets = [e.data for e in epochs if e.label == "nontarget"]
    t_mean = np.mean(np.stack(targets), axis=0) if targets else None
    n_mean = np.mean(np.stack(nontargets), axis=0) if nontargets else None
    return ErpAverage(
        target_mean=t_mean,
        nontarget_mean=n_mean,
        n_target=len(targets),
        n_nontarget=len(nontargets),
        fs=fs,
    )
