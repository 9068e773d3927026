"""Offline reporting: averaged-ERP and ITR figures rendered to PNG files
alongside aligned text, CSV, and JSON summaries.

Works on a single recorded session directory or on a sweep root
containing many of them.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .dsp import CHANNEL_NAMES, FilterChainConfig, build_filter_chain, epoch_length
from .errors import InputError
from .metrics import ErpAverage, average_erps
from .recorder import MANIFEST_NAME, SessionLog, decode_trigger, read_session
from .dsp import Epoch

_SUMMARY_METRICS = ("accuracy", "task_time_s", "itr_bits_per_selection", "itr_bits_per_min")
_STATS = ("mean", "sd", "median", "mad")


def find_sessions(root) -> list[Path]:
    root = Path(root)
    if (root / MANIFEST_NAME).exists():
        return [root]
    found = sorted(p.parent for p in root.glob(f"*/{MANIFEST_NAME}"))
    if not found:
        raise InputError(f"no session manifests under {root}")
    return found


def _stats(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    med = float(np.median(arr))
    return {
        "mean": float(np.mean(arr)),
        "sd": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
        "median": med,
        "mad": float(np.median(np.abs(arr - med))),
    }


def collect_run_table(logs: list[SessionLog]) -> pd.DataFrame:
    rows = []
    for log in logs:
        phase_by_run = {r["run_id"]: r["phase"] for r in log.manifest["runs"]}
        for rec in log.run_records:
            rows.append(
                {
                    "session_id": log.manifest["session_id"],
                    "phase": phase_by_run.get(rec["run_id"], ""),
                    **{k: rec[k] for k in (
                        "run_id", "task_type", "correct", "incorrect", "accuracy",
                        "task_time_s", "itr_bits_per_selection", "itr_bits_per_min", "timed",
                    )},
                    "texture": rec["texture"]["kind"],
                }
            )
    return pd.DataFrame(rows)


def summarize_table(df: pd.DataFrame) -> list[dict]:
    out = []
    for (phase, task_type), group in df.groupby(["phase", "task_type"], sort=False):
        row = {"phase": phase, "task_type": task_type, "n_runs": len(group)}
        for metric in _SUMMARY_METRICS:
            vals = group[metric].dropna().tolist()
            if vals:
                for stat, v in _stats(vals).items():
                    row[f"{metric}_{stat}"] = v
        out.append(row)
    return out


def render_summary_text(rows: list[dict]) -> str:
    header = f"{'phase':<22}{'task':<10}{'n':>4}  {'accuracy':>16}  {'time (s)':>16}  {'ITR (bits/min)':>18}"
    lines = [header, "-" * len(header)]
    for r in rows:
        def cell(metric):
            med = r.get(f"{metric}_median")
            mad = r.get(f"{metric}_mad")
            if med is None:
                return "-"
            return f"{med:.3f} ± {mad:.3f}"

        lines.append(
            f"{r['phase']:<22}{r['task_type']:<10}{r['n_runs']:>4}  "
            f"{cell('accuracy'):>16}  {cell('task_time_s'):>16}  {cell('itr_bits_per_min'):>18}"
        )
    lines.append("")
    lines.append("medians ± median absolute deviation")
    return "\n".join(lines) + "\n"


def calibration_erps(log: SessionLog) -> ErpAverage:
    """Re-filter the recording and average the first calibration's epochs."""
    manifest = log.manifest
    data, trigger_col = log.load_eeg()
    fs = log.fs
    chain = build_filter_chain(FilterChainConfig(fs=fs))
    filtered = chain.process_block(data)
    if not manifest["calibrations"]:
        raise InputError("session has no calibration to average")
    cue = manifest["calibrations"][0]["cue"]
    n_flashes = int(manifest["engine"]["calibration_targets"] * manifest["engine"]["calibration_cycles"])
    L = epoch_length(fs)
    epochs = []
    for sample in np.flatnonzero(trigger_col):
        context, target = decode_trigger(int(trigger_col[sample]))
        if context != "calibration":
            continue
        if sample + L > filtered.shape[1]:
            break
        epochs.append(
            Epoch(
                onset=sample / fs,
                target_id=target,
                data=filtered[:, sample : sample + L],
                label="target" if target == cue else "nontarget",
                context=context,
            )
        )
        if len(epochs) >= n_flashes:
            break
    if not epochs:
        raise InputError("no calibration triggers in the recording")
    return average_erps(epochs, fs=fs)


def plot_erp_average(avg: ErpAverage, path) -> Path:
    L = avg.target_mean.shape[1] if avg.target_mean is not None else avg.nontarget_mean.shape[1]
    t_ms = np.arange(L) / avg.fs * 1000.0
    fig, axes = plt.subplots(2, 4, figsize=(14, 6), sharex=True, sharey=True)
    for i, (ax, name) in enumerate(zip(axes.ravel(), CHANNEL_NAMES)):
        if avg.target_mean is not None:
            ax.plot(t_ms, avg.target_mean[i], label=f"target (n={avg.n_target})", lw=1.4)
        if avg.nontarget_mean is not None:
            ax.plot(t_ms, avg.nontarget_mean[i], label=f"non-target (n={avg.n_nontarget})", lw=1.2)
        ax.axhline(0.0, color="0.8", lw=0.6, zorder=0)
        ax.set_title(name.upper(), fontsize=10)
        ax.grid(alpha=0.25)
    axes[0, 0].legend(fontsize=8, loc="upper right")
    for ax in axes[1]:
        ax.set_xlabel("time after flash (ms)")
    for ax in axes[:, 0]:
        ax.set_ylabel("uV")
    fig.suptitle("Averaged calibration epochs")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_itr_trend(df: pd.DataFrame, path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=False)
    for ax, task in zip(axes, ("complex", "speller")):
        sub = df[df.task_type == task]
        if sub.empty:
            ax.set_visible(False)
            continue
        phases = list(dict.fromkeys(sub.phase))
        data = [sub[sub.phase == ph]["itr_bits_per_min"].dropna().tolist() for ph in phases]
        ax.boxplot(data, tick_labels=[p.replace("_", "\n") for p in phases])
        for x, vals in enumerate(data, start=1):
            ax.plot(np.full(len(vals), x), vals, "o", ms=3, alpha=0.45)
        ax.set_title(f"{task} task")
        ax.set_ylabel("ITR (bits/min)")
        ax.grid(axis="y", alpha=0.25)
    fig.suptitle("Throughput by run")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def write_report(root, out_dir) -> list[Path]:
    """Render figures + summary files for a session or sweep directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    logs = [read_session(p) for p in find_sessions(root)]
    df = collect_run_table(logs)
    written: list[Path] = []

    runs_csv = out / "runs.csv"
    df.to_csv(runs_csv, index=False)
    written.append(runs_csv)

    rows = summarize_table(df) if not df.empty else []
    summary_csv = out / "summary.csv"
    pd.DataFrame(rows).to_csv(summary_csv, index=False)
    written.append(summary_csv)

    summary_json = out / "summary.json"
    summary_json.write_text(json.dumps({"rows": rows}, sort_keys=True, indent=2) + "\n")
    written.append(summary_json)

    summary_txt = out / "summary.txt"
    summary_txt.write_text(render_summary_text(rows))
    written.append(summary_txt)

    if not df.empty:
        written.append(plot_itr_trend(df, out / "itr_by_run.png"))
    try:
        avg = calibration_erps(logs[0])
        written.append(plot_erp_average(avg, out / "erp_average.png"))
    except InputError:
        pass  # aborted or calibration-free session; figure simply absent
    return written
