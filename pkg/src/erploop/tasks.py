"""Game task state machines: Speller, Complex (NPC windows), run tallies.

Scoring rules:
  Speller: an activation equal to the current cue scores a correct
  selection and advances the cue; anything else scores an error and the
  cue stays. The run ends after n_cues correct selections.
  Complex: an activation matching the color of an open NPC window scores
  a hit; a window that closes without a matching activation scores a
  miss; activations of non-matching colors are ignored entirely.

A timed deadline never changes the rules, it only ends the run early:
the Speller simply stops (no extra errors), the Complex task counts every
unresolved window as a miss. T_end is then the deadline itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .gate import Activation
from .stimulus import TextureSpec

SPELLER_N_TARGETS = 10
COMPLEX_N_TARGETS = 5


@dataclass
class RunTally:
    n_classes: int
    t_start: float
    task_type: str
    correct: int = 0
    incorrect: int = 0
    t_end: float | None = None
    timed: bool = False
    texture: TextureSpec | None = None

    @property
    def n_selections(self) -> int:
        return self.correct + self.incorrect

    @property
    def complete(self) -> bool:
        return self.t_end is not None


@dataclass(frozen=True)
class Feedback:
    correct: bool
    cue: int
    t: float


@dataclass(frozen=True)
class SpellerTaskConfig:
    n_targets: int = SPELLER_N_TARGETS
    n_cues: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.n_targets < 2:
            raise ConfigError("speller needs at least 2 targets")
        if self.n_cues < 1:
            raise ConfigError("n_cues must be >= 1")

    def cue_sequence(self) -> list[int]:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5C]))
        return [int(c) for c in rng.integers(0, self.n_targets, size=self.n_cues)]


@dataclass(frozen=True)
class ComplexTaskConfig:
    n_targets: int = COMPLEX_N_TARGETS
    # (color id, window start, window end), offsets relative to run start
    schedule: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if not self.schedule:
            raise ConfigError("complex task needs a non-empty NPC schedule")
        per_color: dict[int, list[tuple[float, float]]] = {}
        for color, start, end in self.schedule:
            if not 0 <= color < self.n_targets:
                raise ConfigError(f"NPC color {color} out of range")
            if end <= start:
                raise ConfigError("NPC window must have positive length")
            per_color.setdefault(color, []).append((start, end))
        for color, windows in per_color.items():
            windows.sort()
            for (s0, e0), (s1, e1) in zip(windows, windows[1:]):
                if s1 < e0:
                    raise ConfigError(f"overlapping windows for color {color}")


def default_complex_schedule(
    seed: int = 0,
    n_windows: int = 7,
    window_s: float = 3.0,
    gap_s: float = 2.5,
    lead_in_s: float = 2.5,
    n_targets: int = COMPLEX_N_TARGETS,
) -> tuple[tuple[int, float, float], ...]:
    """Sequential NPC windows with seeded colors; no two windows overlap."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
    colors = rng.integers(0, n_targets, size=n_windows)
    out = []
    for k, color in enumerate(colors):
        start = lead_in_s + k * (window_s + gap_s)
        out.append((int(color), start, start + window_s))
    return tuple(out)


class SpellerTask:
    def __init__(
        self,
        config: SpellerTaskConfig,
        t_start: float,
        texture: TextureSpec | None = None,
        deadline_s: float | None = None,
    ):
        self.config = config
        self.cues = config.cue_sequence()
        self._cue_index = 0
        self.deadline_t = None if deadline_s is None else t_start + deadline_s
        self.tally = RunTally(
            n_classes=config.n_targets,
            t_start=t_start,
            task_type="speller",
            timed=deadline_s is not None,
            texture=texture,
        )

    @property
    def n_targets(self) -> int:
        return self.config.n_targets

    @property
    def done(self) -> bool:
        return self.tally.complete

    @property
    def current_cue(self) -> int | None:
        if self._cue_index >= len(self.cues):
            return None
        return self.cues[self._cue_index]

    def scripted_focus(self, t_now: float) -> int | None:
        return None if self.done else self.current_cue

    def step(self, t_now: float, activation: Activation | None) -> list[Feedback]:
        if self.done:
            return []
        feedback: list[Feedback] = []
        cue = self.current_cue
        if activation is not None:
            if activation.target_id >= self.n_targets:
                raise InputError("activation target outside task range")
            if activation.target_id == cue:
                self.tally.correct += 1
                feedback.append(Feedback(correct=True, cue=cue, t=activation.t))
                self._cue_index += 1
                if self._cue_index >= len(self.cues):
                    self.tally.t_end = activation.t
            else:
                self.tally.incorrect += 1
                feedback.append(Feedback(correct=False, cue=cue, t=activation.t))
        if not self.done and self.deadline_t is not None and t_now >= self.deadline_t:
            self.tally.t_end = self.deadline_t
        return feedback


@dataclass
class _Window:
    color: int
    start: float
    end: float
    hit: bool = False
    missed: bool = False

    @property
    def resolved(self) -> bool:
        return self.hit or self.missed


class ComplexTask:
    def __init__(
        self,
        config: ComplexTaskConfig,
        t_start: float,
        texture: TextureSpec | None = None,
        deadline_s: float | None = None,
    ):
        self.config = config
        self._windows = [
            _Window(color, t_start + s, t_start + e) for color, s, e in config.schedule
        ]
        self.deadline_t = None if deadline_s is None else t_start + deadline_s
        self.tally = RunTally(
            n_classes=config.n_targets,
            t_start=t_start,
            task_type="complex",
            timed=deadline_s is not None,
            texture=texture,
        )

    @property
    def n_targets(self) -> int:
        return self.config.n_targets

    @property
    def done(self) -> bool:
        return self.tally.complete

    def active_window(self, t_now: float) -> _Window | None:
        for w in self._windows:
            if not w.resolved and w.start <= t_now <= w.end:
                return w
        return None

    def scripted_focus(self, t_now: float) -> int | None:
        w = self.active_window(t_now)
        return None if w is None else w.color

    def step(self, t_now: float, activation: Activation | None) -> list[Feedback]:
        if self.done:
            return []
        feedback: list[Feedback] = []
        if activation is not None:
            if activation.target_id >= self.n_targets:
                raise InputError("activation target outside task range")
            w = self.active_window(activation.t)
            if w is not None and w.color == activation.target_id:
                w.hit = True
                self.tally.correct += 1
                feedback.append(Feedback(correct=True, cue=w.color, t=activation.t))
            # wrong-color activations are not penalized
        for w in self._windows:
            if not w.resolved and t_now > w.end:
                w.missed = True
                self.tally.incorrect += 1
                feedback.append(Feedback(correct=False, cue=w.color, t=w.end))
        if self.deadline_t is not None and t_now >= self.deadline_t and not self.done:
            for w in self._windows:
                if not w.resolved:
                    w.missed = True
                    self.tally.incorrect += 1
                    feedback.append(Feedback(correct=False, cue=w.color, t=self.deadline_t))
            self.tally.t_end = self.deadline_t
        if not self.done and all(w.resolved for w in self._windows):
            self.tally.t_end = t_now
        return feedback
