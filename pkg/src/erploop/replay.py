"""Re-run a recorded session from its raw EEG and compare every decision.

The recorded samples are already quantized to CSV precision when the
live pipeline sees them, so a replay drives the identical filter,
classifier, and gate state and must reproduce the same activations,
tallies, and metrics. Any divergence means the recording was altered or
does not match its manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import EngineConfig
from .errors import InputError
from .recorder import SessionLog, encode_trigger, read_session
from .simulate import ProtocolConfig, SessionRunner
from .stimulus import TextureSpec


class ReplaySource:
    """Serves recorded raw blocks; attention hooks are inert."""

    def __init__(self, data: np.ndarray):
        self._data = data

    def block(self, start_sample: int, n: int, triggers=None) -> np.ndarray:
        if start_sample + n > self._data.shape[1]:
            raise InputError("replay ran past the end of the recording")
        return self._data[:, start_sample : start_sample + n]

    def attend(self, target) -> None:
        pass

    def set_run_index(self, run_index: int) -> None:
        pass


@dataclass
class ReplayResult:
    ok: bool
    mismatches: list[str] = field(default_factory=list)
    n_activations: int = 0
    n_runs: int = 0


def _activation_key(ev: dict) -> tuple:
    return (ev["t"], ev["target"], ev["forced"], ev["confidence"])


_METRIC_FIELDS = (
    "task_type",
    "correct",
    "incorrect",
    "accuracy",
    "task_time_s",
    "itr_bits_per_selection",
    "itr_bits_per_min",
)


def replay_session(path) -> ReplayResult:
    log: SessionLog = read_session(path)
    manifest = log.manifest
    data, trigger_col = log.load_eeg()

    engine_config = EngineConfig(**manifest["engine"])
    protocol_config = ProtocolConfig(**manifest["protocol"])
    textures = tuple(TextureSpec.from_dict(d) for d in manifest["texture_order"])

    runner = SessionRunner(
        ReplaySource(data),
        session_id=manifest["session_id"],
        seed=manifest["seed"],
        texture_order=textures,
        engine_config=engine_config,
        protocol_config=protocol_config,
        recorder=None,
        collect_events=True,
    )
    mismatches: list[str] = []
    try:
        result = runner.run()
    except InputError as exc:
        return ReplayResult(ok=False, mismatches=[f"replay diverged: {exc}"])

    fs = engine_config.fs
    replay_triggers = np.zeros_like(trigger_col)
    for ev in runner.events:
        if ev["type"] == "flash":
            sample = int(round(ev["t"] * fs))
            if sample >= replay_triggers.size:
                mismatches.append(f"replayed flash at t={ev['t']} beyond the recording")
                continue
            replay_triggers[sample] = encode_trigger(ev["context"], ev["target"])
    if not np.array_equal(replay_triggers, trigger_col):
        bad = np.flatnonzero(replay_triggers != trigger_col)
        mismatches.append(
            f"trigger column differs at {bad.size} samples (first at index {bad[0]})"
        )

    recorded_acts = [_activation_key(e) for e in log.load_events() if e["type"] == "activation"]
    replayed_acts = [_activation_key(e) for e in runner.events if e["type"] == "activation"]
    if recorded_acts != replayed_acts:
        mismatches.append(
            f"activation sequence differs (recorded {len(recorded_acts)}, "
            f"replayed {len(replayed_acts)})"
        )

    recorded_runs = {r["run_id"]: r for r in log.run_records}
    if len(recorded_runs) != len(result.runs):
        mismatches.append(
            f"run count differs (recorded {len(recorded_runs)}, replayed {len(result.runs)})"
        )
    for run in result.runs:
        rec = recorded_runs.get(run.run_id)
        if rec is None:
            mismatches.append(f"run {run.run_id} absent from the recording")
            continue
        replayed = {
            "task_type": run.task_type,
            "correct": run.correct,
            "incorrect": run.incorrect,
            "accuracy": run.metrics.accuracy,
            "task_time_s": run.metrics.task_time_s,
            "itr_bits_per_selection": run.metrics.itr_bits_per_selection,
            "itr_bits_per_min": run.metrics.itr_bits_per_min,
        }
        for name in _METRIC_FIELDS:
            if replayed[name] != rec[name]:
                mismatches.append(
                    f"{run.run_id}: {name} recorded {rec[name]!r} != replayed {replayed[name]!r}"
                )

    for rec_cal, rep_cal in zip(manifest["calibrations"], result.calibrations):
        if rec_cal != rep_cal:
            mismatches.append(f"calibration record differs: {rec_cal} != {rep_cal}")
    if len(manifest["calibrations"]) != len(result.calibrations):
        mismatches.append("calibration count differs")

    return ReplayResult(
        ok=not mismatches,
        mismatches=mismatches,
        n_activations=len(replayed_acts),
        n_runs=len(result.runs),
    )
