"""Session protocol state machine: two calibrated task blocks with a
texture swap, a timed challenge, and an optional free-play extension.

Questionnaire phases are ordering markers only; no content is modeled.
A calibration graded red repeats; too many consecutive reds abort the
session. The second questionnaire exits through the free-play choice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .classifier import GRADE_GREEN, GRADE_RED, GRADE_YELLOW
from .errors import ProtocolError
from .stimulus import TextureSpec

MAX_CALIBRATION_ATTEMPTS = 10
RUN_TASKS = ("a", "b")


class Phase(str, enum.Enum):
    SETUP = "setup"
    CALIBRATION_1 = "calibration_1"
    TUTORIAL = "tutorial"
    RUN_1 = "run_1"
    QUESTIONNAIRE_1 = "questionnaire_1"
    CALIBRATION_2 = "calibration_2"
    RUN_2 = "run_2"
    TIMED_RUN = "timed_run"
    QUESTIONNAIRE_2 = "questionnaire_2"
    OPTIONAL_CALIBRATION = "optional_calibration"
    FREE_PLAY = "free_play"
    DONE = "done"


CALIBRATION_PHASES = (Phase.CALIBRATION_1, Phase.CALIBRATION_2, Phase.OPTIONAL_CALIBRATION)
TASK_PHASES = (Phase.TUTORIAL, Phase.RUN_1, Phase.RUN_2, Phase.TIMED_RUN, Phase.FREE_PLAY)

# phase reached when a calibration passes
_AFTER_CALIBRATION = {
    Phase.CALIBRATION_1: Phase.TUTORIAL,
    Phase.CALIBRATION_2: Phase.RUN_2,
    Phase.OPTIONAL_CALIBRATION: Phase.FREE_PLAY,
}
_AFTER_TASKS = {
    Phase.TUTORIAL: Phase.RUN_1,
    Phase.RUN_1: Phase.QUESTIONNAIRE_1,
    Phase.RUN_2: Phase.TIMED_RUN,
    Phase.TIMED_RUN: Phase.QUESTIONNAIRE_2,
    Phase.FREE_PLAY: Phase.DONE,
}


@dataclass
class ProtocolState:
    texture_order: tuple[TextureSpec, TextureSpec]
    phase: Phase = Phase.SETUP
    pending_tasks: tuple[str, ...] = ()
    calibration_attempts: dict = field(default_factory=dict)
    consecutive_reds: int = 0
    max_attempts: int = MAX_CALIBRATION_ATTEMPTS
    aborted: bool = False
    free_play_accepted: bool | None = None

    @property
    def done(self) -> bool:
        return self.phase is Phase.DONE

    def current_texture(self) -> TextureSpec:
        first = (Phase.SETUP, Phase.CALIBRATION_1, Phase.TUTORIAL, Phase.RUN_1, Phase.QUESTIONNAIRE_1)
        return self.texture_order[0] if self.phase in first else self.texture_order[1]

    def attempts_for_current_model(self) -> int:
        # attempts at the most recent calibration phase reached so far
        for phase in reversed(CALIBRATION_PHASES):
            if phase.value in self.calibration_attempts:
                return self.calibration_attempts[phase.value]
        return 0


def _enter(state: ProtocolState, phase: Phase) -> None:
    state.phase = phase
    state.pending_tasks = RUN_TASKS if phase in TASK_PHASES else ()
    if phase in CALIBRATION_PHASES:
        state.consecutive_reds = 0


def advance_protocol(state: ProtocolState, event: str, **payload) -> ProtocolState:
    """Apply one protocol event; mutates and returns ``state``.

    Events: setup_done, calibration_result(grade=...), task_done(task=...),
    questionnaire_done, free_play_choice(accept=...).
    """
    if state.done:
        raise ProtocolError(f"event {event!r} after protocol completion")
    phase = state.phase

    if event == "setup_done":
        if phase is not Phase.SETUP:
            raise ProtocolError(f"setup_done in phase {phase.value}")
        _enter(state, Phase.CALIBRATION_1)
        return state

    if event == "calibration_result":
        if phase not in CALIBRATION_PHASES:
            raise ProtocolError(f"calibration_result in phase {phase.value}")
        grade = payload["grade"]
        if grade not in (GRADE_RED, GRADE_YELLOW, GRADE_GREEN):
            raise ProtocolError(f"unknown grade {grade!r}")
        attempts = state.calibration_attempts.get(phase.value, 0) + 1
        state.calibration_attempts[phase.value] = attempts
        if grade == GRADE_RED:
            state.consecutive_reds += 1
            if state.consecutive_reds >= state.max_attempts:
                state.aborted = True
                _enter(state, Phase.DONE)
            return state  # repeat the calibration in place
        _enter(state, _AFTER_CALIBRATION[phase])
        return state

    if event == "task_done":
        if phase not in TASK_PHASES:
            raise ProtocolError(f"task_done in phase {phase.value}")
        task = payload["task"]
        if not state.pending_tasks or state.pending_tasks[0] != task:
            raise ProtocolError(f"task {task!r} out of order in {phase.value}")
        state.pending_tasks = state.pending_tasks[1:]
        if not state.pending_tasks:
            _enter(state, _AFTER_TASKS[phase])
        return state

    if event == "questionnaire_done":
        if phase is not Phase.QUESTIONNAIRE_1:
            raise ProtocolError(f"questionnaire_done in phase {phase.value}")
        _enter(state, Phase.CALIBRATION_2)
        return state

    if event == "free_play_choice":
        if phase is not Phase.QUESTIONNAIRE_2:
            raise ProtocolError(f"free_play_choice in phase {phase.value}")
        accept = bool(payload["accept"])
        state.free_play_accepted = accept
        _enter(state, Phase.OPTIONAL_CALIBRATION if accept else Phase.DONE)
        return state

    raise ProtocolError(f"unknown protocol event {event!r}")
