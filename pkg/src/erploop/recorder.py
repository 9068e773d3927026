"""Session persistence: continuous EEG CSV, per-run JSON metadata,
NDJSON event log, and a session manifest tying them together.

One EEG file per session; the trigger column encodes task context so
runs can share the continuous recording. Trigger value is
context_code*100 + target_id + 1 (0 = no event). All JSON is written
with sorted keys so identical inputs serialize byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .dsp import CHANNEL_NAMES
from .errors import RecorderError, SchemaError
from .metrics import RunMetrics
from .stimulus import CONTEXT_CODES, TextureSpec, TriggerEvent
from .tasks import RunTally
from .version import ENGINE_VERSION, FORMAT_VERSION

EEG_HEADER = ["t"] + [c.lower() for c in CHANNEL_NAMES] + ["trigger"]
_CODE_TO_CONTEXT = {v: k for k, v in CONTEXT_CODES.items()}

MANIFEST_NAME = "session.json"
EEG_NAME = "eeg.csv"
EVENTS_NAME = "events.ndjson"


def encode_trigger(context: str, target_id: int) -> int:
    if context not in CONTEXT_CODES:
        raise RecorderError(f"unknown trigger context {context!r}")
    if not 0 <= target_id < 99:
        raise RecorderError(f"target id {target_id} not encodable")
    return CONTEXT_CODES[context] * 100 + target_id + 1


def decode_trigger(code: int) -> tuple[str, int]:
    context = _CODE_TO_CONTEXT.get(code // 100)
    target = code % 100 - 1
    if context is None or target < 0:
        raise SchemaError(f"undecodable trigger value {code}")
    return context, target


def write_eeg(path, data: np.ndarray, trigger_col: np.ndarray, fs: float) -> None:
    """Write the continuous recording. data is (8, n) uV; trigger_col is (n,) ints."""
    n = data.shape[1]
    if trigger_col.shape != (n,):
        raise RecorderError("trigger column length mismatch")
    df = pd.DataFrame({"t": [f"{k / fs:.6f}" for k in range(n)]})
    for i, name in enumerate(EEG_HEADER[1:9]):
        df[name] = data[i]
    df["trigger"] = trigger_col.astype(int)
    try:
        df.to_csv(path, index=False, float_format="%.4f")
    except OSError as exc:
        raise RecorderError(f"cannot write {path}: {exc}") from exc


def read_eeg(path, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Read back (data (8, n), trigger codes (n,)); validates the header."""
    try:
        df = pd.read_csv(path)
    except Exception as exc:
        raise SchemaError(f"unreadable EEG file {path}: {exc}") from exc
    if list(df.columns) != EEG_HEADER:
        raise SchemaError(f"EEG header mismatch in {path}: {list(df.columns)}")
    if df.isna().any().any():
        raise SchemaError(f"EEG file {path} contains missing values (truncated?)")
    data = df[EEG_HEADER[1:9]].to_numpy(dtype=float).T
    triggers = df["trigger"].to_numpy(dtype=int)
    return np.ascontiguousarray(data), triggers


def triggers_from_column(trigger_col: np.ndarray, fs: float) -> list[TriggerEvent]:
    """Reconstruct trigger events from the recorded column.

    Onset time is sample_index / fs; cycle indices are not recoverable
    from the file and are set to -1.
    """
    out = []
    for k in np.flatnonzero(trigger_col):
        context, target = decode_trigger(int(trigger_col[k]))
        out.append(TriggerEvent(t=k / fs, target_id=target, cycle_index=-1, context=context))
    return out


def write_run_metadata(
    path,
    run_id: str,
    tally: RunTally,
    metrics: RunMetrics,
    calibration_attempts: int,
    cv_accuracy: float,
    rng_seed: int,
) -> dict:
    if not tally.complete:
        raise RecorderError(f"run {run_id} has no end time; refusing to write metadata")
    if tally.texture is None:
        raise RecorderError(f"run {run_id} has no texture recorded")
    record = {
        "run_id": run_id,
        "task_type": tally.task_type,
        "t_start": tally.t_start,
        "t_end": tally.t_end,
        "n_classes": tally.n_classes,
        "correct": tally.correct,
        "incorrect": tally.incorrect,
        "accuracy": metrics.accuracy,
        "task_time_s": metrics.task_time_s,
        "itr_bits_per_selection": metrics.itr_bits_per_selection,
        "itr_bits_per_min": metrics.itr_bits_per_min,
        "texture": tally.texture.to_dict(),
        "timed": tally.timed,
        "calibration_attempts": calibration_attempts,
        "cv_accuracy": cv_accuracy,
        "engine_version": ENGINE_VERSION,
        "rng_seed": rng_seed,
    }
    Path(path).write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    return record


RUN_METADATA_FIELDS = {
    "run_id",
    "task_type",
    "t_start",
    "t_end",
    "n_classes",
    "correct",
    "incorrect",
    "accuracy",
    "task_time_s",
    "itr_bits_per_selection",
    "itr_bits_per_min",
    "texture",
    "timed",
    "calibration_attempts",
    "cv_accuracy",
    "engine_version",
    "rng_seed",
}


class SessionRecorder:
    """Accumulates one session in memory; finalize() writes the file tree."""

    def __init__(self, out_dir, session_id: str, fs: float, seed: int, session_info: dict):
        self.out_dir = Path(out_dir)
        self.session_id = session_id
        self.fs = fs
        self.seed = seed
        self.session_info = session_info  # profile/config snapshot for the manifest
        self._blocks: list[np.ndarray] = []
        self._trigger_marks: list[tuple[int, int]] = []
        self._n_samples = 0
        self.events: list[dict] = []
        self.runs: list[dict] = []
        self.calibrations: list[dict] = []
        self.aborted = False

    # engine hook
    def on_block(self, start_sample: int, raw: np.ndarray, trigger: TriggerEvent | None) -> None:
        if start_sample != self._n_samples:
            raise RecorderError(
                f"non-contiguous block at sample {start_sample}, expected {self._n_samples}"
            )
        self._blocks.append(raw)
        self._n_samples += raw.shape[1]
        if trigger is not None:
            sample = int(round(trigger.t * self.fs))
            self._trigger_marks.append((sample, encode_trigger(trigger.context, trigger.target_id)))

    def on_events(self, events: list[dict]) -> None:
        self.events.extend(events)

    def add_calibration(self, phase: str, attempt: int, cue: int, cv_accuracy: float, grade: str):
        self.calibrations.append(
            {
                "phase": phase,
                "attempt": attempt,
                "cue": cue,
                "cv_accuracy": cv_accuracy,
                "grade": grade,
            }
        )

    def add_run(
        self,
        phase: str,
        tally: RunTally,
        metrics: RunMetrics,
        calibration_attempts: int,
        cv_accuracy: float,
    ) -> str:
        run_id = f"run_{len(self.runs):02d}_{tally.task_type}"
        self.runs.append(
            {
                "run_id": run_id,
                "phase": phase,
                "file": f"{run_id}.json",
                "tally": tally,
                "metrics": metrics,
                "calibration_attempts": calibration_attempts,
                "cv_accuracy": cv_accuracy,
            }
        )
        return run_id

    def finalize(self) -> Path:
        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)

        data = np.concatenate(self._blocks, axis=1) if self._blocks else np.zeros((8, 0))
        trigger_col = np.zeros(data.shape[1], dtype=int)
        for sample, code in self._trigger_marks:
            trigger_col[sample] = code
        write_eeg(out / EEG_NAME, data, trigger_col, self.fs)

        with open(out / EVENTS_NAME, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")

        run_entries = []
        for r in self.runs:
            write_run_metadata(
                out / r["file"],
                r["run_id"],
                r["tally"],
                r["metrics"],
                r["calibration_attempts"],
                r["cv_accuracy"],
                rng_seed=self.seed,
            )
            run_entries.append(
                {
                    "run_id": r["run_id"],
                    "phase": r["phase"],
                    "task_type": r["tally"].task_type,
                    "file": r["file"],
                }
            )

        manifest = {
            "kind": "erploop-session",
            "format_version": FORMAT_VERSION,
            "engine_version": ENGINE_VERSION,
            "session_id": self.session_id,
            "fs": self.fs,
            "seed": self.seed,
            "aborted": self.aborted,
            "n_samples": int(data.shape[1]),
            "n_triggers": len(self._trigger_marks),
            "calibrations": self.calibrations,
            "runs": run_entries,
            "files": {"eeg": EEG_NAME, "events": EVENTS_NAME},
            **self.session_info,
        }
        (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        return out


_MANIFEST_REQUIRED = (
    "kind",
    "format_version",
    "engine_version",
    "session_id",
    "fs",
    "seed",
    "aborted",
    "n_samples",
    "n_triggers",
    "calibrations",
    "runs",
    "files",
)


@dataclass
class SessionLog:
    path: Path
    manifest: dict
    run_records: list[dict] = field(default_factory=list)

    @property
    def fs(self) -> float:
        return float(self.manifest["fs"])

    def load_eeg(self) -> tuple[np.ndarray, np.ndarray]:
        data, trig = read_eeg(self.path / self.manifest["files"]["eeg"], self.fs)
        if data.shape[1] != self.manifest["n_samples"]:
            raise SchemaError(
                f"EEG row count {data.shape[1]} != manifest n_samples "
                f"{self.manifest['n_samples']} (truncated file?)"
            )
        if int(np.count_nonzero(trig)) != self.manifest["n_triggers"]:
            raise SchemaError("trigger count does not match manifest n_triggers")
        return data, trig

    def load_events(self) -> list[dict]:
        out = []
        with open(self.path / self.manifest["files"]["events"]) as fh:
            for i, line in enumerate(fh):
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"events line {i + 1} unparseable: {exc}") from exc
        return out


def read_session(path) -> SessionLog:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise SchemaError(f"no {MANIFEST_NAME} in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest unparseable: {exc}") from exc
    for key in _MANIFEST_REQUIRED:
        if key not in manifest:
            raise SchemaError(f"manifest missing field {key!r}")
    if manifest["kind"] != "erploop-session":
        raise SchemaError(f"not a session manifest: kind={manifest['kind']!r}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {manifest['format_version']}")

    run_records = []
    for entry in manifest["runs"]:
        run_path = path / entry["file"]
        if not run_path.exists():
            raise SchemaError(f"missing run metadata file {entry['file']}")
        record = json.loads(run_path.read_text())
        if set(record) != RUN_METADATA_FIELDS:
            extra = set(record) - RUN_METADATA_FIELDS
            missing = RUN_METADATA_FIELDS - set(record)
            raise SchemaError(f"run metadata fields wrong (extra={extra}, missing={missing})")
        run_records.append(record)

    return SessionLog(path=path, manifest=manifest, run_records=run_records)
