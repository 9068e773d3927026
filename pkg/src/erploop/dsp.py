"""Causal streaming filter chain and trigger-locked epoch extraction.

The chain is one biquad notch per line frequency followed by a Butterworth
band-pass realized as cascaded second-order sections. All filtering is
causal (``sosfilt`` with carried state), applied per channel with identical
coefficients, and deterministic for a given input sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import ConfigError, InputError, OrderingError

N_CHANNELS = 8
CHANNEL_NAMES = ("fz", "c3", "cz", "c4", "pz", "po7", "oz", "po8")

# Slop for time comparisons on the k*0.1 / k/fs grids.
TIME_EPS = 1e-6

NOTCH_Q = 30.0


@dataclass(frozen=True)
class SampleFrame:
    """One multichannel sample: time in seconds, 8 channel values in uV."""

    t: float
    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.shape != (N_CHANNELS,):
            raise InputError(f"expected {N_CHANNELS} channel values, got shape {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise InputError("non-finite channel value")
        object.__setattr__(self, "channels", ch)


@dataclass(frozen=True)
class FilterChainConfig:
    fs: float = 250.0
    notch_freqs: tuple[float, ...] = (50.0, 60.0)
    notch_order: int = 2
    bandpass_low: float = 0.5
    bandpass_high: float = 15.0
    bandpass_order: int = 6

    def validate(self) -> None:
        nyq = self.fs / 2.0
        if self.fs <= 0:
            raise ConfigError("fs must be positive")
        if not (0.0 < self.bandpass_low < self.bandpass_high < nyq):
            raise ConfigError(
                f"band-pass cutoffs must satisfy 0 < low < high < fs/2, "
                f"got ({self.bandpass_low}, {self.bandpass_high}) at fs={self.fs}"
            )
        for f in self.notch_freqs:
            if not (0.0 < f < nyq):
                raise ConfigError(f"notch frequency {f} violates Nyquist at fs={self.fs}")
        if self.bandpass_order % 2 != 0 or self.bandpass_order <= 0:
            raise ConfigError("band-pass order must be a positive even number")
        if self.notch_order != 2:
            raise ConfigError("notch sections are biquads; order must be 2")


@dataclass
class Epoch:
    """Trigger-locked window of filtered EEG: 8 x L matrix in uV."""

    onset: float
    target_id: int
    data: np.ndarray
    label: str | None = None  # "target" | "nontarget" | None (unknown)
    context: str | None = None


def epoch_length(fs: float, epoch_s: float = 0.9) -> int:
    """Samples per epoch: L = round(epoch_s * fs)."""
    return int(round(epoch_s * fs))


class FilterChain:
    """Stateful causal filter: per-channel SOS cascade with zeroed state."""

    def __init__(self, config: FilterChainConfig):
        config.validate()
        self.config = config
        sections = []
        for f in config.notch_freqs:
            b, a = signal.iirnotch(f, NOTCH_Q, fs=config.fs)
            sections.append(np.hstack([b, a]))
        bp = signal.butter(
            config.bandpass_order // 2,
            [config.bandpass_low, config.bandpass_high],
            btype="bandpass",
            output="sos",
            fs=config.fs,
        )
        self.sos = np.vstack([np.array(sections), bp])
        self._check_stability()
        self._zi = np.zeros((self.sos.shape[0], N_CHANNELS, 2))
        self._last_t = None

    def _check_stability(self) -> None:
        for section in self.sos:
            poles = np.roots(section[3:])
            if np.any(np.abs(poles) >= 1.0):
                raise ConfigError("unstable filter section (pole on or outside unit circle)")

    def reset(self) -> None:
        self._zi[:] = 0.0
        self._last_t = None

    def process_block(self, block: np.ndarray, t0: float | None = None) -> np.ndarray:
        """Filter a (8, n) block of consecutive samples, carrying state.

        ``t0`` is the time of the first sample; when given, block starts must
        be monotone across calls.
        """
        block = np.asarray(block, dtype=float)
        if block.ndim != 2 or block.shape[0] != N_CHANNELS:
            raise InputError(f"block must be ({N_CHANNELS}, n), got {block.shape}")
        if t0 is not None:
            if self._last_t is not None and t0 < self._last_t - TIME_EPS:
                raise OrderingError(f"block at t={t0} precedes t={self._last_t}")
            self._last_t = t0
        out, self._zi = signal.sosfilt(self.sos, block, axis=1, zi=self._zi)
        return out

    def process_frame(self, frame: SampleFrame) -> SampleFrame:
        """Filter one frame. Frames must arrive in time order."""
        if self._last_t is not None and frame.t <= self._last_t - TIME_EPS:
            raise OrderingError(f"frame at t={frame.t} precedes t={self._last_t}")
        self._last_t = frame.t
        out, self._zi = signal.sosfilt(self.sos, frame.channels[:, None], axis=1, zi=self._zi)
        return SampleFrame(t=frame.t, channels=out[:, 0])


def build_filter_chain(config: FilterChainConfig | None = None) -> FilterChain:
    return FilterChain(config or FilterChainConfig())


class FilteredHistory:
    """Rolling buffer of filtered samples on the global sample grid.

    Sample k has time k / fs from stream start. Blocks are appended in
    order; a bounded window (``keep_s`` seconds) is retained.
    """

    def __init__(self, fs: float, keep_s: float = 4.0):
        self.fs = fs
        self._keep = max(int(round(keep_s * fs)), epoch_length(fs) + 1)
        self._data = np.zeros((N_CHANNELS, 0))
        self._start = 0  # global index of self._data[:, 0]

    @property
    def n_samples(self) -> int:
        """Total samples appended since stream start."""
        return self._start + self._data.shape[1]

    def append(self, block: np.ndarray) -> None:
        block = np.asarray(block, dtype=float)
        self._data = np.concatenate([self._data, block], axis=1)
        excess = self._data.shape[1] - self._keep
        if excess > 0:
            self._data = self._data[:, excess:]
            self._start += excess

    def slice(self, start: int, length: int) -> np.ndarray | None:
        """Samples [start, start+length) by global index, or None if not all buffered."""
        if start < self._start:
            raise InputError(f"sample {start} already evicted (buffer starts at {self._start})")
        if start + length > self.n_samples:
            return None
        lo = start - self._start
        return self._data[:, lo : lo + length].copy()


def extract_epoch(buffer: FilteredHistory, trigger, epoch_s: float = 0.9) -> Epoch | None:
    """Cut the 0..epoch_s window locked to a trigger.

    Returns None while the buffer does not yet hold the full window (the
    caller retries once more samples arrive). The window starts at the
    first sample with t >= trigger.t.
    """
    fs = buffer.fs
    start = int(np.ceil(trigger.t * fs - TIME_EPS))
    L = epoch_length(fs, epoch_s)
    data = buffer.slice(start, L)
    if data is None:
        return None
    return Epoch(
        onset=trigger.t,
        target_id=trigger.target_id,
        data=data,
        context=getattr(trigger, "context", None),
    )
