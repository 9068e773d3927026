"""Scripted full-protocol simulation: one subject end to end, and seeded
multi-subject sweeps with a tables-shaped summary.

The scripted player attends the correct cue or NPC color with a
per-cycle compliance probability (default 0.95) and looks at nothing
otherwise. Attention is updated at tick boundaries, so a feedback event
changes behavior from the next flash onward.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .classifier import GRADE_RED
from .engine import EngineConfig, SessionEngine
from .errors import EngineError
from .metrics import RunMetrics, itr, summarize_runs
from .protocol import (
    CALIBRATION_PHASES,
    MAX_CALIBRATION_ATTEMPTS,
    Phase,
    ProtocolState,
    advance_protocol,
)
from .recorder import SessionRecorder
from .stimulus import TextureSpec
from .subject import SubjectProfile, SyntheticSubject
from .tasks import (
    ComplexTask,
    ComplexTaskConfig,
    SpellerTask,
    SpellerTaskConfig,
    default_complex_schedule,
)

TEXTURE_POLICIES = ("checker", "grain", "alternate")


@dataclass(frozen=True)
class ProtocolConfig:
    n_cues: int = 6
    complex_windows: int = 7
    complex_window_s: float = 3.0
    complex_gap_s: float = 2.5
    complex_lead_in_s: float = 2.5
    tutorial_speller_targets: int = 4
    tutorial_speller_cues: int = 2
    tutorial_complex_targets: int = 2
    tutorial_complex_windows: int = 3
    timed_deadline_s: float = 90.0
    accept_free_play: bool = False
    compliance: float = 0.95
    inter_scene_idle_s: float = 2.0
    max_calibration_attempts: int = MAX_CALIBRATION_ATTEMPTS

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimConfig:
    n_subjects: int = 1
    master_seed: int = 0
    texture_policy: str = "alternate"
    out_dir: str | None = None
    profile_overrides: dict = field(default_factory=dict)
    engine: EngineConfig = field(default_factory=EngineConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self):
        if self.n_subjects < 1:
            raise EngineError("n_subjects must be >= 1")
        if self.texture_policy not in TEXTURE_POLICIES:
            raise EngineError(f"texture_policy must be one of {TEXTURE_POLICIES}")


@dataclass
class RunRecord:
    run_id: str
    phase: str
    task_type: str
    run_index: int
    metrics: RunMetrics
    correct: int
    incorrect: int
    timed: bool
    forced_selections: int


@dataclass
class SessionResult:
    session_id: str
    seed: int
    aborted: bool
    calibrations: list[dict]
    runs: list[RunRecord]
    phase_trace: list[str]
    path: Path | None = None
    events: list[dict] | None = None


def texture_order_for(policy: str, subject_index: int, seed: int) -> tuple[TextureSpec, TextureSpec]:
    """Session texture pair; the two sessions always differ in kind."""
    checker = TextureSpec(kind="checkerboard", grid=16, density=0.5, seed=0)
    grain = TextureSpec(kind="grain", grid=16, density=0.5, seed=seed)
    if policy == "checker":
        return (checker, grain)
    if policy == "grain":
        return (grain, checker)
    return (checker, grain) if subject_index % 2 == 0 else (grain, checker)


class _ScriptedDriver:
    """Per-cycle compliance coin; attends the scripted focus or nothing."""

    def __init__(self, subject, compliance: float, seed: int):
        self.subject = subject
        self.compliance = compliance
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD21]))
        self._cycle_coins: dict[int, bool] = {}

    def new_scene(self) -> None:
        self._cycle_coins.clear()

    def set_attention(self, focus: int | None, cycle: int) -> None:
        if cycle not in self._cycle_coins:
            self._cycle_coins[cycle] = bool(self._rng.random() < self.compliance)
        self.subject.attend(focus if self._cycle_coins[cycle] else None)


class SessionRunner:
    """Drives one subject through the full protocol."""

    def __init__(
        self,
        source,
        session_id: str,
        seed: int,
        texture_order: tuple[TextureSpec, TextureSpec],
        engine_config: EngineConfig | None = None,
        protocol_config: ProtocolConfig | None = None,
        recorder: SessionRecorder | None = None,
        collect_events: bool = False,
    ):
        self.session_id = session_id
        self.seed = seed
        self.pconf = protocol_config or ProtocolConfig()
        self.engine = SessionEngine(source, engine_config or EngineConfig(), recorder=recorder)
        self.protocol = ProtocolState(
            texture_order=texture_order, max_attempts=self.pconf.max_calibration_attempts
        )
        self.recorder = recorder
        self.driver = _ScriptedDriver(source, self.pconf.compliance, seed)
        self._seed_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A5E]))
        self.phase_trace: list[str] = []
        self.calibrations: list[dict] = []
        self.runs: list[RunRecord] = []
        self.run_index = 0  # completed main runs, drives the learning effect
        self.events: list[dict] | None = [] if collect_events else None
        self._current_cv = float("nan")

    # -- plumbing ---------------------------------------------------------

    def _emit(self, events: list[dict]) -> None:
        if self.recorder is not None:
            self.recorder.on_events(events)
        if self.events is not None:
            self.events.extend(events)

    def _mark_phase(self) -> None:
        name = self.protocol.phase.value
        self.phase_trace.append(name)
        self._emit([{"type": "phase", "t": self.engine.t_now, "name": name}])

    def _advance(self, event: str, **payload) -> None:
        advance_protocol(self.protocol, event, **payload)
        self._mark_phase()

    def _task_seed(self) -> int:
        return int(self._seed_rng.integers(0, 2**31))

    def _idle(self) -> None:
        self._emit(self.engine.run_idle(self.pconf.inter_scene_idle_s))

    # -- scenes -------------------------------------------------------------

    def _do_calibration(self, phase: Phase) -> None:
        self._idle()
        cue = self.engine.start_calibration()
        scene = self.engine.scene
        n = scene.schedule.n_targets
        self.driver.new_scene()
        result = None
        while self.engine.scene is not None:
            self.driver.set_attention(cue, scene.flash_count // n)
            events = self.engine.tick()
            self._emit(events)
            for ev in events:
                if ev["type"] == "calibration":
                    result = ev
        assert result is not None
        attempt = self.protocol.calibration_attempts.get(phase.value, 0) + 1
        record = {
            "phase": phase.value,
            "attempt": attempt,
            "cue": cue,
            "cv_accuracy": result["cv_accuracy"],
            "grade": result["grade"],
        }
        self.calibrations.append(record)
        if self.recorder is not None:
            self.recorder.add_calibration(**record)
        self._current_cv = result["cv_accuracy"]
        self._advance("calibration_result", grade=result["grade"])
        if self.protocol.aborted and self.recorder is not None:
            self.recorder.aborted = True

    def _run_task(self, task, context: str, phase: Phase) -> RunRecord:
        self.engine.source.set_run_index(self.run_index)
        self.engine.start_task(task, context)
        scene = self.engine.scene
        n = task.n_targets
        self.driver.new_scene()
        forced = 0
        while self.engine.scene is not None:
            t_next = self.engine.t_now
            self.driver.set_attention(task.scripted_focus(t_next), scene.flash_count // n)
            events = self.engine.tick()
            self._emit(events)
            forced += sum(1 for ev in events if ev["type"] == "activation" and ev["forced"])
        tally = task.tally
        metrics = itr(tally.n_classes, tally.correct, tally.incorrect, tally.t_start, tally.t_end)
        attempts = self.protocol.attempts_for_current_model()
        run_id = f"run_{len(self.runs):02d}_{tally.task_type}"
        if self.recorder is not None:
            rid = self.recorder.add_run(phase.value, tally, metrics, attempts, self._current_cv)
            run_id = rid
        summary = {
            "type": "run_summary",
            "t": self.engine.t_now,
            "run_id": run_id,
            "phase": phase.value,
            "task_type": tally.task_type,
            "correct": tally.correct,
            "incorrect": tally.incorrect,
            **metrics.to_dict(),
        }
        self._emit([summary])
        record = RunRecord(
            run_id=run_id,
            phase=phase.value,
            task_type=tally.task_type,
            run_index=self.run_index,
            metrics=metrics,
            correct=tally.correct,
            incorrect=tally.incorrect,
            timed=tally.timed,
            forced_selections=forced,
        )
        self.runs.append(record)
        return record

    def _make_complex(self, phase: Phase, tutorial: bool) -> ComplexTask:
        p = self.pconf
        if tutorial:
            schedule = default_complex_schedule(
                seed=self._task_seed(),
                n_windows=p.tutorial_complex_windows,
                n_targets=p.tutorial_complex_targets,
            )
            cfg = ComplexTaskConfig(n_targets=p.tutorial_complex_targets, schedule=schedule)
        else:
            schedule = default_complex_schedule(seed=self._task_seed(), n_windows=p.complex_windows,
                                                window_s=p.complex_window_s, gap_s=p.complex_gap_s,
                                                lead_in_s=p.complex_lead_in_s)
            cfg = ComplexTaskConfig(schedule=schedule)
        deadline = p.timed_deadline_s if phase is Phase.TIMED_RUN else None
        return ComplexTask(cfg, t_start=self.engine.t_now,
                           texture=self.protocol.current_texture(), deadline_s=deadline)

    def _make_speller(self, phase: Phase, tutorial: bool) -> SpellerTask:
        p = self.pconf
        if tutorial:
            cfg = SpellerTaskConfig(
                n_targets=p.tutorial_speller_targets,
                n_cues=p.tutorial_speller_cues,
                seed=self._task_seed(),
            )
        else:
            cfg = SpellerTaskConfig(n_cues=p.n_cues, seed=self._task_seed())
        deadline = p.timed_deadline_s if phase is Phase.TIMED_RUN else None
        return SpellerTask(cfg, t_start=self.engine.t_now,
                           texture=self.protocol.current_texture(), deadline_s=deadline)

    def _do_run_phase(self, phase: Phase) -> None:
        tutorial = phase is Phase.TUTORIAL
        self._idle()
        task_a = self._make_complex(phase, tutorial)
        self._run_task(task_a, "tutorial" if tutorial else "task_a", phase)
        self._advance("task_done", task="a")
        self._idle()
        task_b = self._make_speller(phase, tutorial)
        self._run_task(task_b, "tutorial" if tutorial else "task_b", phase)
        self._advance("task_done", task="b")
        if not tutorial:
            self.run_index += 1

    # -- top level ----------------------------------------------------------

    def run(self) -> SessionResult:
        self._mark_phase()
        self._advance("setup_done")
        while not self.protocol.done:
            phase = self.protocol.phase
            if phase in CALIBRATION_PHASES:
                self._do_calibration(phase)
            elif phase in (Phase.TUTORIAL, Phase.RUN_1, Phase.RUN_2, Phase.TIMED_RUN, Phase.FREE_PLAY):
                self._do_run_phase(phase)
            elif phase is Phase.QUESTIONNAIRE_1:
                self._advance("questionnaire_done")
            elif phase is Phase.QUESTIONNAIRE_2:
                self._advance("free_play_choice", accept=self.pconf.accept_free_play)
            else:
                raise EngineError(f"runner stuck in phase {phase.value}")
        path = None
        if self.recorder is not None:
            path = self.recorder.finalize()
        return SessionResult(
            session_id=self.session_id,
            seed=self.seed,
            aborted=self.protocol.aborted,
            calibrations=self.calibrations,
            runs=self.runs,
            phase_trace=self.phase_trace,
            path=path,
            events=self.events,
        )


def subject_seed_for(master_seed: int, subject_index: int) -> int:
    ss = np.random.SeedSequence([master_seed, subject_index])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate_subject(config: SimConfig, subject_index: int, collect_events: bool = False) -> SessionResult:
    seed = subject_seed_for(config.master_seed, subject_index)
    session_id = f"subject_{subject_index:02d}"
    profile = SubjectProfile(seed=seed, **config.profile_overrides)
    engine_config = EngineConfig(
        **{**{f.name: getattr(config.engine, f.name) for f in config.engine.__dataclass_fields__.values()}, "seed": seed}
    )
    source = SyntheticSubject(profile, fs=engine_config.fs)
    textures = texture_order_for(config.texture_policy, subject_index, seed)
    recorder = None
    if config.out_dir is not None:
        recorder = SessionRecorder(
            Path(config.out_dir) / session_id,
            session_id=session_id,
            fs=engine_config.fs,
            seed=seed,
            session_info={
                "profile": profile.to_dict(),
                "engine": asdict(engine_config),
                "protocol": config.protocol.to_dict(),
                "texture_order": [t.to_dict() for t in textures],
                "texture_policy": config.texture_policy,
                "subject_index": subject_index,
                "master_seed": config.master_seed,
            },
        )
    runner = SessionRunner(
        source,
        session_id=session_id,
        seed=seed,
        texture_order=textures,
        engine_config=engine_config,
        protocol_config=config.protocol,
        recorder=recorder,
        collect_events=collect_events,
    )
    return runner.run()


def run_sweep(config: SimConfig) -> tuple[list[SessionResult], dict]:
    t0 = time.perf_counter()
    results = [simulate_subject(config, i) for i in range(config.n_subjects)]
    elapsed = time.perf_counter() - t0
    summary = summarize_sweep(results)
    summary["wall_time_s"] = round(elapsed, 3)
    summary["n_subjects"] = config.n_subjects
    summary["aborted_subjects"] = [r.session_id for r in results if r.aborted]
    return results, summary


def summarize_sweep(results: list[SessionResult]) -> dict:
    """Group runs by (phase, task type) and summarize like the result tables."""
    groups: dict[tuple[str, str], list[RunMetrics]] = {}
    for r in results:
        if r.aborted:
            continue
        for run in r.runs:
            groups.setdefault((run.phase, run.task_type), []).append(run.metrics)
    rows = []
    order = {p.value: i for i, p in enumerate(Phase)}
    for (phase, task_type), metrics in sorted(groups.items(), key=lambda kv: (order[kv[0][0]], kv[0][1])):
        rows.append(summarize_runs(metrics, tag=f"{phase}/{task_type}"))
    return {"rows": rows}
