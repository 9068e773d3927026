"""Evidence accumulation and the confidence/dwell activation gate.

Per-epoch posteriors enter as log-odds into a short per-target window
(the last C flashes of each target). The per-target window sums pass
through a softmax, giving one distribution over targets. An activation
fires only when the argmax stays at or above the confidence threshold,
on the same target, for an uninterrupted dwell period.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InputError, OrderingError

CONFIDENCE_THRESHOLD = 0.95
DWELL_S = 0.5
WINDOW_CYCLES = 3

_T_EPS = 1e-9


@dataclass(frozen=True)
class Activation:
    target_id: int
    t: float
    confidence: float


class EvidenceState:
    """Per-target windowed log-odds, softmax distribution, dwell bookkeeping."""

    def __init__(
        self,
        n_targets: int,
        window_cycles: int = WINDOW_CYCLES,
        threshold: float = CONFIDENCE_THRESHOLD,
        dwell_s: float = DWELL_S,
        refractory_s: float = 0.0,
    ):
        if n_targets < 2:
            raise InputError("need at least 2 targets")
        self.n_targets = n_targets
        self.window_cycles = window_cycles
        self.threshold = threshold
        self.dwell_s = dwell_s
        self.refractory_s = refractory_s
        self._windows = [deque(maxlen=window_cycles) for _ in range(n_targets)]
        self.focus_target: int | None = None
        self.focus_since: float | None = None
        self.refractory_until: float | None = None
        self._last_update_t: float | None = None
        self._last_tick_t: float | None = None

    # -- evidence -----------------------------------------------------

    @property
    def posterior(self) -> np.ndarray:
        """Softmax of per-target window sums; uniform when all windows are empty."""
        sums = np.array([sum(w) for w in self._windows], dtype=float)
        sums -= sums.max()
        e = np.exp(sums)
        return e / e.sum()

    def update_evidence(self, target_id: int, posterior: float, t_onset: float) -> None:
        if not 0 <= target_id < self.n_targets:
            raise InputError(f"target {target_id} out of range")
        if not 0.0 < posterior < 1.0:
            raise InputError(f"posterior must lie strictly in (0, 1), got {posterior}")
        if self._last_update_t is not None and t_onset < self._last_update_t - _T_EPS:
            raise OrderingError("evidence updates must arrive in onset order")
        self._last_update_t = t_onset
        self._windows[target_id].append(float(np.log(posterior / (1.0 - posterior))))

    # -- gating -------------------------------------------------------

    def gate_tick(self, t_now: float) -> Activation | None:
        if self._last_tick_t is not None and t_now < self._last_tick_t - _T_EPS:
            raise OrderingError("gate time must be non-decreasing")
        self._last_tick_t = t_now

        if self.refractory_until is not None:
            if t_now < self.refractory_until - _T_EPS:
                self.focus_target = None
                self.focus_since = None
                return None
            self.refractory_until = None

        p = self.posterior
        j = int(np.argmax(p))
        if p[j] < self.threshold:
            self.focus_target = None
            self.focus_since = None
            return None

        if self.focus_target != j:
            self.focus_target = j
            self.focus_since = t_now
        if t_now - self.focus_since >= self.dwell_s - _T_EPS:
            act = Activation(target_id=j, t=t_now, confidence=float(p[j]))
            assert act.confidence >= self.threshold - _T_EPS
            assert t_now - self.focus_since >= self.dwell_s - _T_EPS
            self._clear_windows()
            self.focus_target = None
            self.focus_since = None
            if self.refractory_s > 0:
                self.refractory_until = t_now + self.refractory_s
            return act
        return None

    # -- reset --------------------------------------------------------

    def force_selection(self, t_now: float) -> Activation:
        """Select the current argmax without the threshold/dwell checks.

        Used by the engine's liveness timeout. State handling matches a
        gated emission: windows cleared, focus dropped, refractory armed.
        """
        p = self.posterior
        j = int(np.argmax(p))
        act = Activation(target_id=j, t=t_now, confidence=float(p[j]))
        self._clear_windows()
        self.focus_target = None
        self.focus_since = None
        if self.refractory_s > 0:
            self.refractory_until = t_now + self.refractory_s
        return act

    def _clear_windows(self) -> None:
        for w in self._windows:
            w.clear()

    def reset(self) -> None:
        """Empty windows, uniform distribution, no focus, no refractory."""
        self._clear_windows()
        self.focus_target = None
        self.focus_since = None
        self.refractory_until = None
