"""Synthetic subject: seeded 8-channel EEG conditioned on attended target.

Noise is pink (1/f) per channel plus a common-mode 50 Hz line component.
Every flash of the attended target injects a two-bump deflection (negative
bump near 200 ms, positive bump near 310 ms) weighted per channel, with
per-flash latency jitter and per-flash lapses. Amplitudes grow with the
run index to model practice effects.

The noise stream and the per-flash event draws come from independent
child seeds of the profile seed, so the noise is unaffected by how many
triggers occur. Output samples are quantized to 1e-4 uV, the recorder's
CSV precision, which makes recorded sessions replay bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .dsp import N_CHANNELS
from .errors import InputError
from .stimulus import TriggerEvent

# 1/f noise via a pole-zero ladder: one-pole/one-zero sections log-spaced
# across the band, zeros at the geometric midpoints, giving -10 dB/decade
# from ~1 mHz up to ~40 Hz. The low knee keeps the 1/f law holding well
# below the analysis band, as slow electrode drift does.
_PINK_POLE_HZ = (0.0001, 0.0003, 0.0017, 0.0098, 0.056, 0.32, 1.8, 10.5, 60.0)
_PINK_RATIO = 5.73

_ERP_SUPPORT_S = 0.9  # flash events older than this no longer contribute

N200_WIDTH_S = 0.045
P300_WIDTH_S = 0.065

DEFAULT_SPATIAL_WEIGHTS = (0.95, 0.9, 0.97, 0.9, 1.0, 0.97, 0.99, 0.97)

_pink_cache: dict[float, tuple[np.ndarray, float]] = {}


def _pink_filter(fs: float) -> tuple[np.ndarray, float]:
    """SOS ladder and its stationary unit-white output std for this rate."""
    if fs not in _pink_cache:
        nyq = fs / 2.0
        secs = []
        for fp in _PINK_POLE_HZ:
            if fp >= nyq * 0.9:
                continue
            fz = min(fp * np.sqrt(_PINK_RATIO), nyq * 0.95)
            p = np.exp(-2 * np.pi * fp / fs)
            z = np.exp(-2 * np.pi * fz / fs)
            secs.append([1.0, -z, 0.0, 1.0, -p, 0.0])
        sos = np.asarray(secs)
        # impulse long enough for the ~530 s time constant of the lowest pole
        impulse = np.zeros(1 << 21)
        impulse[0] = 1.0
        h = signal.sosfilt(sos, impulse)
        _pink_cache[fs] = (sos, float(np.sqrt(np.sum(h * h))))
    return _pink_cache[fs]


@dataclass(frozen=True)
class SubjectProfile:
    erp_amp: float = 5.0
    n200_amp: float = -3.0
    p300_latency: float = 0.310
    n200_latency: float = 0.200
    latency_jitter_sd: float = 0.030
    lapse_rate: float = 0.10
    noise_rms: float = 10.0
    line_amp: float = 2.0
    line_freq: float = 50.0
    spatial_weights: tuple[float, ...] = DEFAULT_SPATIAL_WEIGHTS
    learning_rate: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lapse_rate <= 1.0:
            raise InputError("lapse_rate must lie in [0, 1]")
        if len(self.spatial_weights) != N_CHANNELS:
            raise InputError(f"need {N_CHANNELS} spatial weights")
        if any(not 0.0 <= w <= 1.0 for w in self.spatial_weights):
            raise InputError("spatial weights must lie in [0, 1]")
        if self.noise_rms < 0:
            raise InputError("noise_rms must be >= 0")

    def to_dict(self) -> dict:
        return {
            "erp_amp": self.erp_amp,
            "n200_amp": self.n200_amp,
            "p300_latency": self.p300_latency,
            "n200_latency": self.n200_latency,
            "latency_jitter_sd": self.latency_jitter_sd,
            "lapse_rate": self.lapse_rate,
            "noise_rms": self.noise_rms,
            "line_amp": self.line_amp,
            "line_freq": self.line_freq,
            "spatial_weights": list(self.spatial_weights),
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectProfile":
        d = dict(d)
        if "spatial_weights" in d:
            d["spatial_weights"] = tuple(d["spatial_weights"])
        return cls(**d)


@dataclass
class AttentionState:
    attended_target: int | None = None
    run_index: int = 0


def apply_learning(profile: SubjectProfile, run_index: int) -> float:
    """Amplitude multiplier after ``run_index`` completed runs: 1 + lambda * k."""
    if run_index < 0:
        raise InputError("run_index must be >= 0")
    return 1.0 + profile.learning_rate * run_index


@dataclass
class _FlashEvent:
    onset: float
    jitter: float
    gain: float  # 0 on lapse, else learning multiplier


class SyntheticSubject:
    """Deterministic streaming EEG source on the global sample grid."""

    def __init__(self, profile: SubjectProfile, fs: float = 250.0):
        self.profile = profile
        self.fs = fs
        self.attention = AttentionState()
        seed_root = np.random.SeedSequence([int(profile.seed), 0x5EED])
        noise_ss, event_ss = seed_root.spawn(2)
        self._noise_rng = np.random.default_rng(noise_ss)
        self._event_rng = np.random.default_rng(event_ss)
        self._pink_sos, unit_std = _pink_filter(fs)
        self._pink_zi = np.zeros((self._pink_sos.shape[0], N_CHANNELS, 2))
        self._noise_scale = profile.noise_rms / unit_std if profile.noise_rms > 0 else 0.0
        self._weights = np.asarray(profile.spatial_weights, dtype=float)
        self._events: list[_FlashEvent] = []

    # -- attention ------------------------------------------------------

    def attend(self, target: int | None) -> None:
        self.attention.attended_target = target

    def set_run_index(self, run_index: int) -> None:
        self.attention.run_index = run_index

    # -- generation -----------------------------------------------------

    def _ingest_trigger(self, trig: TriggerEvent) -> None:
        # Event draws happen for every trigger, attended or not, so the
        # draw sequence depends only on the trigger trace.
        jitter = self._event_rng.normal(0.0, self.profile.latency_jitter_sd)
        lapse = self._event_rng.random() < self.profile.lapse_rate
        if trig.target_id != self.attention.attended_target:
            return
        gain = 0.0 if lapse else apply_learning(self.profile, self.attention.run_index)
        if gain != 0.0:
            self._events.append(_FlashEvent(onset=trig.t, jitter=jitter, gain=gain))

    def _erp_template(self, tau: np.ndarray) -> np.ndarray:
        p = self.profile
        out = p.n200_amp * np.exp(-0.5 * ((tau - p.n200_latency) / N200_WIDTH_S) ** 2)
        out += p.erp_amp * np.exp(-0.5 * ((tau - p.p300_latency) / P300_WIDTH_S) ** 2)
        return out

    def block(
        self,
        start_sample: int,
        n_samples: int,
        triggers: list[TriggerEvent] | None = None,
    ) -> np.ndarray:
        """Generate (8, n) uV for samples [start_sample, start_sample + n).

        ``triggers`` are flash onsets occurring within (or at the start of)
        this block, in time order. The output is invariant to how the
        stream is partitioned into blocks.
        """
        for trig in triggers or ():
            self._ingest_trigger(trig)

        t = (start_sample + np.arange(n_samples)) / self.fs

        # per-sample-major draws keep the stream partition-invariant
        white = self._noise_rng.standard_normal((n_samples, N_CHANNELS)).T
        pink, self._pink_zi = signal.sosfilt(
            self._pink_sos, np.ascontiguousarray(white), axis=1, zi=self._pink_zi
        )
        out = pink * self._noise_scale

        if self.profile.line_amp != 0.0:
            out += self.profile.line_amp * np.sin(2 * np.pi * self.profile.line_freq * t)

        if self._events:
            keep = []
            for ev in self._events:
                rel = t - ev.onset
                # support mask is per sample so blocking cannot change output
                m = (rel >= 0.0) & (rel <= _ERP_SUPPORT_S)
                if m.any():
                    tau = rel[m] - ev.jitter
                    out[:, m] += ev.gain * self._erp_template(tau)[None, :] * self._weights[:, None]
                if rel[-1] <= _ERP_SUPPORT_S:
                    keep.append(ev)
            self._events = keep

        return np.round(out, 4)

    def frame(self, sample_index: int, triggers: list[TriggerEvent] | None = None) -> np.ndarray:
        """Single-sample convenience wrapper around :meth:`block`."""
        return self.block(sample_index, 1, triggers)[:, 0]
