"""Closed-loop session engine.

One tick = one flash window (100 ms simulated time). Per tick the engine
emits the scheduled flash, pulls the next EEG block from its source,
filters it, classifies every epoch whose 0.9 s window just completed,
updates the evidence gate, and steps the active task. All times live on
the tick grid t = k * tick_s, so runs are deterministic and replayable.

The EEG source only needs block(start_sample, n, triggers) plus no-op
attend()/set_run_index() hooks; the synthetic subject and the replay
reader both satisfy that.

Liveness: a Speller cue that never reaches the confidence gate would
stall the protocol, so after selection_timeout_s without a selection the
engine forces the current argmax as a selection, flagged forced=True in
the activation event. The Complex task needs no timeout; its windows
expire into misses on their own.

After every selection the engine drops in-flight (not yet classified)
epochs: their EEG predates the selection, and scoring them would let
stale evidence re-fire the gate right after the refractory gap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .classifier import (
    CalibrationReport,
    DEFAULT_BINS,
    DEFAULT_FOLDS,
    DEFAULT_GAMMA,
    LABEL_NONTARGET,
    LABEL_TARGET,
    LdaModel,
    cross_validate,
    featurize,
    fit_lda,
    predict_posterior,
)
from .dsp import FilterChainConfig, FilteredHistory, build_filter_chain, extract_epoch
from .errors import ConfigError, EngineError, InputError
from .gate import CONFIDENCE_THRESHOLD, DWELL_S, EvidenceState, WINDOW_CYCLES
from .stimulus import FLASH_S, FlashSchedule
from .tasks import ComplexTask, SpellerTask

CALIBRATION_TARGETS = 10
CALIBRATION_CYCLES = 60


@dataclass(frozen=True)
class EngineConfig:
    fs: float = 250.0
    tick_s: float = FLASH_S
    epoch_s: float = 0.9
    bins: int = DEFAULT_BINS
    gamma: float = DEFAULT_GAMMA
    cv_folds: int = DEFAULT_FOLDS
    threshold: float = CONFIDENCE_THRESHOLD
    dwell_s: float = DWELL_S
    window_cycles: int = WINDOW_CYCLES
    refractory_cycles: float = 1.0
    selection_timeout_s: float = 20.0
    calibration_targets: int = CALIBRATION_TARGETS
    calibration_cycles: int = CALIBRATION_CYCLES
    order_policy: str = "per_cycle_shuffle"
    seed: int = 0

    def samples_per_tick(self) -> int:
        n = self.fs * self.tick_s
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ConfigError(f"fs*tick_s must be a positive integer, got {n}")
        return int(round(n))


class _CalibrationScene:
    kind = "calibration"

    def __init__(self, schedule: FlashSchedule, cue: int, n_flashes: int):
        self.schedule = schedule
        self.cue = cue
        self.n_flashes = n_flashes
        self.flash_count = 0
        self.pending: deque = deque()
        self.epochs: list = []

    def wants_flash(self) -> bool:
        return self.flash_count < self.n_flashes

    @property
    def complete(self) -> bool:
        return self.flash_count >= self.n_flashes and not self.pending


class _TaskScene:
    kind = "task"

    def __init__(self, task, schedule: FlashSchedule, gate: EvidenceState, timeout_s: float | None):
        self.task = task
        self.schedule = schedule
        self.gate = gate
        self.timeout_s = timeout_s
        self.flash_count = 0
        self.pending: deque = deque()
        self.last_selection_t = schedule.t_offset
        self.last_cue: int | None = None

    def wants_flash(self) -> bool:
        return not self.task.done

    @property
    def complete(self) -> bool:
        return self.task.done


class SessionEngine:
    def __init__(self, source, config: EngineConfig | None = None, recorder=None):
        self.config = config or EngineConfig()
        self._n_per_tick = self.config.samples_per_tick()
        self.source = source
        self.chain = build_filter_chain(FilterChainConfig(fs=self.config.fs))
        self.history = FilteredHistory(self.config.fs, keep_s=self.config.epoch_s + 2.0)
        self.recorder = recorder
        self.tick_index = 0
        self.model: LdaModel | None = None
        self.last_report: CalibrationReport | None = None
        self.scene: _CalibrationScene | _TaskScene | None = None
        self._scene_counter = 0

    # -- time ------------------------------------------------------------

    @property
    def t_now(self) -> float:
        """Start time of the next tick to be generated."""
        return self.tick_index * self.config.tick_s

    # -- scene control -----------------------------------------------------

    def _require_idle(self):
        if self.scene is not None:
            raise EngineError("a scene is already active")

    def _next_schedule(self, n_targets: int, context: str) -> FlashSchedule:
        sched = FlashSchedule(
            n_targets=n_targets,
            order_policy=self.config.order_policy,
            seed=self.config.seed + self._scene_counter,
            context=context,
            t_offset=self.t_now,
        )
        self._scene_counter += 1
        return sched

    def start_calibration(self, cue: int | None = None, context: str = "calibration") -> int:
        """Begin a calibration scene; returns the cued position."""
        self._require_idle()
        cfg = self.config
        if cue is None:
            rng = np.random.default_rng(
                np.random.SeedSequence([cfg.seed, 0xCA11, self._scene_counter])
            )
            cue = int(rng.integers(0, cfg.calibration_targets))
        if not 0 <= cue < cfg.calibration_targets:
            raise InputError(f"calibration cue {cue} out of range")
        sched = self._next_schedule(cfg.calibration_targets, context)
        self.scene = _CalibrationScene(
            sched, cue, n_flashes=cfg.calibration_targets * cfg.calibration_cycles
        )
        return cue

    def start_task(self, task, context: str) -> None:
        """Begin a task scene; requires a trained model."""
        self._require_idle()
        if self.model is None:
            raise EngineError("no trained model; run calibration first")
        sched = self._next_schedule(task.n_targets, context)
        gate = EvidenceState(
            n_targets=task.n_targets,
            window_cycles=self.config.window_cycles,
            threshold=self.config.threshold,
            dwell_s=self.config.dwell_s,
            refractory_s=self.config.refractory_cycles * sched.cycle_s,
        )
        timeout = self.config.selection_timeout_s if isinstance(task, SpellerTask) else None
        self.scene = _TaskScene(task, sched, gate, timeout)

    def end_scene(self):
        self.scene = None

    def attend(self, target: int | None) -> None:
        self.source.attend(target)

    # -- tick loop ---------------------------------------------------------

    def tick(self) -> list[dict]:
        cfg = self.config
        k = self.tick_index
        t_tick = k * cfg.tick_s
        events: list[dict] = []
        scene = self.scene

        trigger = None
        if scene is not None and scene.wants_flash():
            trigger = scene.schedule.flash_at(scene.flash_count)
            scene.flash_count += 1
            scene.pending.append(trigger)
            events.append(
                {
                    "type": "flash",
                    "t": trigger.t,
                    "target": trigger.target_id,
                    "cycle": trigger.cycle_index,
                    "context": trigger.context,
                }
            )

        start_sample = k * self._n_per_tick
        raw = self.source.block(start_sample, self._n_per_tick, [trigger] if trigger else None)
        filtered = self.chain.process_block(raw, t0=start_sample / cfg.fs)
        self.history.append(filtered)
        if self.recorder is not None:
            self.recorder.on_block(start_sample, raw, trigger)

        self.tick_index += 1
        t_end = self.tick_index * cfg.tick_s

        if scene is None:
            return events
        if scene.kind == "calibration":
            self._tick_calibration(scene, events)
        else:
            self._tick_task(scene, t_end, events)
        return events

    # -- calibration -------------------------------------------------------

    def _tick_calibration(self, scene: _CalibrationScene, events: list[dict]) -> None:
        while scene.pending:
            epoch = extract_epoch(self.history, scene.pending[0], self.config.epoch_s)
            if epoch is None:
                break
            scene.pending.popleft()
            epoch.label = LABEL_TARGET if epoch.target_id == scene.cue else LABEL_NONTARGET
            scene.epochs.append(epoch)
        if scene.complete:
            self._finish_calibration(scene, events)
            self.scene = None

    def _finish_calibration(self, scene: _CalibrationScene, events: list[dict]) -> None:
        cfg = self.config
        feats = np.stack([featurize(e, cfg.bins) for e in scene.epochs])
        labels = np.array([e.label for e in scene.epochs])
        report = cross_validate(
            feats,
            labels,
            gamma=cfg.gamma,
            folds=cfg.cv_folds,
            seed=cfg.seed + self._scene_counter,
            bins=cfg.bins,
        )
        self.model = fit_lda(feats, labels, gamma=cfg.gamma, bins=cfg.bins)
        self.last_report = report
        events.append(
            {
                "type": "calibration",
                "t": self.t_now,
                "cue": scene.cue,
                "cv_accuracy": report.cv_accuracy,
                "grade": report.grade,
                "n_target": report.n_target,
                "n_nontarget": report.n_nontarget,
            }
        )

    # -- tasks ---------------------------------------------------------------

    def _tick_task(self, scene: _TaskScene, t_end: float, events: list[dict]) -> None:
        while scene.pending:
            epoch = extract_epoch(self.history, scene.pending[0], self.config.epoch_s)
            if epoch is None:
                break
            scene.pending.popleft()
            p = predict_posterior(self.model, featurize(epoch, self.config.bins))
            scene.gate.update_evidence(epoch.target_id, p, epoch.onset)

        activation = None
        forced = False
        if not scene.task.done:
            activation = scene.gate.gate_tick(t_end)
            if (
                activation is None
                and scene.timeout_s is not None
                and t_end - scene.last_selection_t >= scene.timeout_s
            ):
                activation = scene.gate.force_selection(t_end)
                forced = True
            if activation is not None:
                scene.last_selection_t = t_end
                scene.pending.clear()
                events.append(
                    {
                        "type": "activation",
                        "t": activation.t,
                        "target": activation.target_id,
                        "confidence": round(activation.confidence, 6),
                        "forced": forced,
                    }
                )

        for fb in scene.task.step(t_end, activation):
            events.append({"type": "feedback", "t": fb.t, "correct": fb.correct, "cue": fb.cue})

        cue = getattr(scene.task, "current_cue", None)
        if cue != scene.last_cue and not scene.task.done:
            scene.last_cue = cue
            if cue is not None:
                events.append({"type": "cue", "t": t_end, "target": cue})

        events.append(
            {
                "type": "confidence",
                "t": t_end,
                "distribution": [round(float(x), 4) for x in scene.gate.posterior],
            }
        )

        if scene.task.done:
            tally = scene.task.tally
            events.append({"type": "task_complete", "t": t_end, "task_type": tally.task_type})
            self.scene = None

    # -- idle helper ---------------------------------------------------------

    def run_idle(self, seconds: float) -> list[dict]:
        """Advance time with no scene (breaks between runs); recording continues."""
        n = int(round(seconds / self.config.tick_s))
        events: list[dict] = []
        for _ in range(n):
            events.extend(self.tick())
        return events
