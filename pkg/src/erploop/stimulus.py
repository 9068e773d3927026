"""Sequential flicker scheduling and stimulation texture construction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

FLASH_S = 0.1

CONTEXT_CODES = {"calibration": 1, "task_a": 2, "task_b": 3, "tutorial": 4}


@dataclass(frozen=True)
class TriggerEvent:
    t: float
    target_id: int
    cycle_index: int
    context: str = "calibration"


@dataclass
class FlashSchedule:
    """Flash windows of ``flash_s`` seconds, each target once per cycle.

    RoundRobin emits 0..N-1 in fixed order. PerCycleShuffle draws a seeded
    permutation per cycle, re-rolled so the first target of a cycle never
    equals the last target of the previous one.
    """

    n_targets: int
    order_policy: str = "round_robin"  # "round_robin" | "per_cycle_shuffle"
    seed: int = 0
    flash_s: float = FLASH_S
    context: str = "calibration"
    t_offset: float = 0.0  # stream time of flash index 0

    def __post_init__(self):
        if self.n_targets < 2:
            raise ConfigError("need at least 2 targets")
        if self.order_policy not in ("round_robin", "per_cycle_shuffle"):
            raise ConfigError(f"unknown order policy {self.order_policy!r}")
        self._orders: list[np.ndarray] = []

    @property
    def cycle_s(self) -> float:
        return self.n_targets * self.flash_s

    def _order(self, cycle: int) -> np.ndarray:
        if self.order_policy == "round_robin":
            return np.arange(self.n_targets)
        while len(self._orders) <= cycle:
            c = len(self._orders)
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, c]))
            perm = rng.permutation(self.n_targets)
            if c > 0:
                prev_last = int(self._orders[c - 1][-1])
                if perm[0] == prev_last:
                    # deterministic repair: swap head with a random later slot
                    j = 1 + int(rng.integers(self.n_targets - 1))
                    perm[0], perm[j] = perm[j], perm[0]
            self._orders.append(perm)
        return self._orders[cycle]

    def flash_at(self, index: int) -> TriggerEvent:
        """Trigger for flash number ``index`` since schedule start."""
        if index < 0:
            raise InputError("flash index must be >= 0")
        cycle, pos = divmod(index, self.n_targets)
        target = int(self._order(cycle)[pos])
        return TriggerEvent(
            t=self.t_offset + index * self.flash_s,
            target_id=target,
            cycle_index=cycle,
            context=self.context,
        )

    def next_flash(self, t_now: float) -> TriggerEvent:
        """Trigger whose flash window contains ``t_now``."""
        rel = t_now - self.t_offset
        if rel < 0:
            raise InputError("t_now precedes schedule start")
        index = int(np.floor(rel / self.flash_s + 1e-9))
        return self.flash_at(index)


@dataclass(frozen=True)
class TextureSpec:
    kind: str  # "checkerboard" | "grain"
    grid: int = 16
    density: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("checkerboard", "grain"):
            raise ConfigError(f"unknown texture kind {self.kind!r}")
        if not 0.0 <= self.density <= 1.0:
            raise ConfigError("density must be in [0, 1]")
        if self.grid < 2:
            raise ConfigError("grid must be at least 2x2")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "grid": self.grid, "density": self.density, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TextureSpec":
        return cls(kind=d["kind"], grid=int(d["grid"]), density=float(d["density"]), seed=int(d["seed"]))


def gen_texture(spec: TextureSpec) -> np.ndarray:
    """Boolean (n, n) grid, True = dark cell.

    Checkerboard alternates cells ((i + j) even is dark). Grain places
    exactly round(density * n^2) dark cells by a seeded shuffle, so both
    textures have identical dark-cell density for even grids.
    """
    n = spec.grid
    if spec.kind == "checkerboard":
        i, j = np.indices((n, n))
        return (i + j) % 2 == 0
    n_dark = int(round(spec.density * n * n))
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x7E37]))
    order = rng.permutation(n * n)
    grid = np.zeros(n * n, dtype=bool)
    grid[order[:n_dark]] = True
    return grid.reshape(n, n)


def texture_density(grid: np.ndarray) -> float:
    return float(np.count_nonzero(grid)) / grid.size
