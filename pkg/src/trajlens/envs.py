"""Deterministic discrete-time environments plus observation discretization.

Two built-in environments are provided:

``GridWorld``
    A rectangular grid with four move actions, a single goal cell and
    optional walls.  Every step costs -1; bumping a wall or the boundary
    leaves the agent in place and still costs -1.  The episode ends on
    reaching the goal or on hitting the step cap.

``MiniLander``
    A one-dimensional powered-descent task.  The physical state is
    (altitude, velocity); after every step it is snapped to the center of
    its discretizer cell, which makes the environment an exact finite MDP
    and keeps replay and dynamic-programming oracles bit-deterministic.
    Touching down with |velocity| <= safe_speed pays +100, touching down
    faster pays -100, every other step costs -0.1.  Running out the step
    cap ends the episode with no terminal bonus.

Both environments expose the same small interface: ``reset()``,
``step(action)``, ``transition_model(state, action)`` for exhaustive
enumeration, ``terminal_kind(transition)`` for outcome classification,
and ``config_descriptor()`` whose hash stamps every derived artifact.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EpisodeFinishedError

Cell = tuple[int, int]


@dataclass(frozen=True)
class EnvSpec:
    """Static facts about an environment instance."""

    name: str
    state_count: int
    action_count: int
    max_steps: int
    reward_range: tuple[float, float]

    def __post_init__(self):
        if self.state_count < 1:
            raise ConfigError("state_count must be positive")
        if self.action_count < 2:
            raise ConfigError("at least 2 actions are required")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


@dataclass(frozen=True)
class Transition:
    """One environment step: (s, a, r, s', done)."""

    state: int
    action: int
    reward: float
    next_state: int
    done: bool

    def to_list(self) -> list:
        return [self.state, self.action, self.reward, self.next_state, int(self.done)]

    @classmethod
    def from_list(cls, row: Sequence) -> "Transition":
        if len(row) != 5:
            raise ValueError(f"transition row needs 5 fields, got {len(row)}")
        return cls(int(row[0]), int(row[1]), float(row[2]), int(row[3]), bool(row[4]))


class Discretizer:
    """Maps real-valued observations to discrete cell ids.

    Each dimension is split into ``bins[d]`` half-open intervals over the
    nominal range [low, high); a value exactly on an interior edge lands in
    the higher bin, and out-of-range values clamp to the outermost bins, so
    the mapping is total.  Cell ids are the row-major index over the
    per-dimension bin indices (first dimension most significant).
    """

    def __init__(self, lows: Sequence[float], highs: Sequence[float], bins: Sequence[int]):
        if not (len(lows) == len(highs) == len(bins)):
            raise ConfigError("lows, highs and bins must have equal length")
        self.lows = [float(x) for x in lows]
        self.highs = [float(x) for x in highs]
        self.bins = [int(b) for b in bins]
        for lo, hi, b in zip(self.lows, self.highs, self.bins):
            if b < 1:
                raise ConfigError("each dimension needs at least one bin")
            if not lo < hi:
                raise ConfigError("low must be strictly below high")
        # boundary points; interior points are the bin edges
        self._points = [np.linspace(lo, hi, b + 1) for lo, hi, b in zip(self.lows, self.highs, self.bins)]
        self.edges = [pts[1:-1].copy() for pts in self._points]
        for e in self.edges:
            if e.size > 1 and not np.all(np.diff(e) > 0):
                raise ConfigError("bin edges must be strictly increasing")

    @property
    def dims(self) -> int:
        return len(self.bins)

    @property
    def cell_count(self) -> int:
        n = 1
        for b in self.bins:
            n *= b
        return n

    def bin_index(self, dim: int, value: float) -> int:
        # searchsorted with side='right' gives the half-open [lo, hi)
        # convention and clamps automatically: below-all -> 0, above-all ->
        # the last bin.
        return int(np.searchsorted(self.edges[dim], value, side="right"))

    def discretize(self, obs: Sequence[float]) -> int:
        if len(obs) != self.dims:
            raise ValueError(f"expected {self.dims}-dim observation, got {len(obs)}")
        cell = 0
        for d, value in enumerate(obs):
            cell = cell * self.bins[d] + self.bin_index(d, float(value))
        return cell

    def bin_indices(self, cell: int) -> tuple[int, ...]:
        if not 0 <= cell < self.cell_count:
            raise ValueError(f"cell id {cell} out of range")
        out = []
        for b in reversed(self.bins):
            out.append(cell % b)
            cell //= b
        return tuple(reversed(out))

    def representative(self, cell: int) -> tuple[float, ...]:
        """Center of the cell's nominal segment (its canonical member)."""
        idxs = self.bin_indices(cell)
        return tuple(
            float((self._points[d][i] + self._points[d][i + 1]) / 2.0)
            for d, i in enumerate(idxs)
        )


def _hash_descriptor(descriptor: dict[str, str]) -> str:
    canonical = "\n".join(f"{k}={descriptor[k]}" for k in sorted(descriptor))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class GridWorld:
    """Deterministic shortest-path grid.

    Actions: 0=up (y-1), 1=down (y+1), 2=left (x-1), 3=right (x+1).
    State id of cell (x, y) is ``y * width + x``.  Construction verifies by
    flood fill that the goal is reachable from the start.
    """

    ACTION_NAMES = ("up", "down", "left", "right")
    _MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))

    def __init__(
        self,
        width: int,
        height: int,
        start: Cell,
        goal: Cell,
        walls: Iterable[Cell] = (),
        max_steps: int | None = None,
    ):
        if width < 1 or height < 1:
            raise ConfigError("grid dimensions must be positive")
        self.width = int(width)
        self.height = int(height)
        self.start = (int(start[0]), int(start[1]))
        self.goal = (int(goal[0]), int(goal[1]))
        self.walls = frozenset((int(x), int(y)) for x, y in walls)
        for label, cell in (("start", self.start), ("goal", self.goal)):
            if not self._in_bounds(cell):
                raise ConfigError(f"{label} cell {cell} out of bounds")
        if self.start == self.goal:
            raise ConfigError("start and goal must differ")
        if self.start in self.walls or self.goal in self.walls:
            raise ConfigError("start and goal must not be walls")
        for w in self.walls:
            if not self._in_bounds(w):
                raise ConfigError(f"wall cell {w} out of bounds")
        if not self._reachable(self.start, self.goal):
            raise ConfigError("goal is not reachable from start")
        cap = int(max_steps) if max_steps is not None else 4 * self.width * self.height
        self.spec = EnvSpec(
            name="grid",
            state_count=self.width * self.height,
            action_count=4,
            max_steps=cap,
            reward_range=(-1.0, -1.0),
        )
        self._pos = self.start
        self._steps = 0
        self._done = False

    # -- construction helpers -------------------------------------------

    def _in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def _reachable(self, src: Cell, dst: Cell) -> bool:
        seen = {src}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            if cur == dst:
                return True
            for dx, dy in self._MOVES:
                nxt = (cur[0] + dx, cur[1] + dy)
                if self._in_bounds(nxt) and nxt not in self.walls and nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return False

    # -- id mapping ------------------------------------------------------

    def state_id(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def cell(self, state: int) -> Cell:
        return (state % self.width, state // self.width)

    # -- episode API -----------------------------------------------------

    def reset(self) -> int:
        self._pos = self.start
        self._steps = 0
        self._done = False
        return self.state_id(self._pos)

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps_taken(self) -> int:
        return self._steps

    def step(self, action: int) -> Transition:
        if self._done:
            raise EpisodeFinishedError("episode already finished; call reset()")
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"invalid action {action}")
        state = self.state_id(self._pos)
        reward, next_state, terminal = self.transition_model(state, action)
        self._pos = self.cell(next_state)
        self._steps += 1
        done = terminal or self._steps >= self.spec.max_steps
        self._done = done
        return Transition(state, action, reward, next_state, done)

    def transition_model(self, state: int, action: int) -> tuple[float, int, bool]:
        """Pure one-step dynamics: (reward, next_state, true_terminal)."""
        x, y = self.cell(state)
        dx, dy = self._MOVES[action]
        target = (x + dx, y + dy)
        if not self._in_bounds(target) or target in self.walls:
            target = (x, y)
        next_state = self.state_id(target)
        return -1.0, next_state, target == self.goal

    def model_states(self) -> list[int]:
        """Non-wall, non-goal states (sources for transition enumeration)."""
        out = []
        for y in range(self.height):
            for x in range(self.width):
                if (x, y) not in self.walls and (x, y) != self.goal:
                    out.append(self.state_id((x, y)))
        return out

    def terminal_kind(self, t: Transition) -> str | None:
        if not t.done:
            return None
        if self.cell(t.next_state) == self.goal:
            return "goal"
        return "cap"

    def layout(self) -> dict:
        return {
            "type": "grid",
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "goal": list(self.goal),
            "walls": sorted(list(w) for w in self.walls),
            "max_steps": self.spec.max_steps,
        }

    def config_descriptor(self) -> dict[str, str]:
        walls = ";".join(f"{x},{y}" for x, y in sorted(self.walls))
        return {
            "env": "grid",
            "width": str(self.width),
            "height": str(self.height),
            "start": f"{self.start[0]},{self.start[1]}",
            "goal": f"{self.goal[0]},{self.goal[1]}",
            "walls": walls,
            "max_steps": str(self.spec.max_steps),
        }

    @property
    def config_hash(self) -> str:
        return _hash_descriptor(self.config_descriptor())


class MiniLander:
    """1-D powered descent over a discretized (altitude, velocity) state.

    Dynamics per step (dt = 1): velocity gains ``thrust - gravity`` when
    thrusting (action 1) and ``-gravity`` otherwise (action 0); altitude
    then advances by the new velocity.  If altitude crosses zero the episode
    ends: +100 when |velocity| <= safe_speed, -100 otherwise.  Non-terminal
    steps cost -0.1.  After each non-terminal step the state snaps to the
    center of its discretizer cell, so the reachable state set is finite and
    the transition model can be enumerated exactly.
    """

    ACTION_NAMES = ("noop", "thrust")
    STEP_COST = -0.1
    LAND_REWARD = 100.0
    CRASH_REWARD = -100.0

    def __init__(
        self,
        gravity: float = 0.8,
        thrust: float = 1.6,
        bins_h: int = 10,
        bins_v: int = 9,
        safe_speed: float = 1.0,
        start_altitude: float = 10.0,
        h_max: float = 15.0,
        v_max: float = 4.5,
        max_steps: int = 120,
    ):
        if gravity <= 0:
            raise ConfigError("gravity must be positive")
        if thrust <= gravity:
            raise ConfigError("thrust must exceed gravity")
        if bins_h < 4 or bins_v < 4:
            raise ConfigError("need at least 4 bins per dimension")
        if safe_speed <= 0:
            raise ConfigError("safe_speed must be positive")
        if start_altitude < 0:
            raise ConfigError("start_altitude must be non-negative")
        if h_max <= 0 or v_max <= 0:
            raise ConfigError("state ranges must be positive")
        self.gravity = float(gravity)
        self.thrust = float(thrust)
        self.safe_speed = float(safe_speed)
        self.start_altitude = float(start_altitude)
        self.discretizer = Discretizer(
            lows=[0.0, -float(v_max)],
            highs=[float(h_max), float(v_max)],
            bins=[int(bins_h), int(bins_v)],
        )
        self.spec = EnvSpec(
            name="lander",
            state_count=self.discretizer.cell_count,
            action_count=2,
            max_steps=int(max_steps),
            reward_range=(self.CRASH_REWARD, self.LAND_REWARD),
        )
        self._h = 0.0
        self._v = 0.0
        self._steps = 0
        self._done = False

    def reset(self) -> int:
        if self.start_altitude <= 0.0:
            # degenerate start: already on the ground, first step touches down
            self._h, self._v = 0.0, 0.0
            cell = self.discretizer.discretize((0.0, 0.0))
        else:
            cell = self.discretizer.discretize((self.start_altitude, 0.0))
            self._h, self._v = self.discretizer.representative(cell)
        self._steps = 0
        self._done = False
        return cell

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps_taken(self) -> int:
        return self._steps

    def _integrate(self, h: float, v: float, action: int) -> tuple[float, float]:
        accel = (self.thrust if action == 1 else 0.0) - self.gravity
        v2 = v + accel
        h2 = h + v2
        return h2, v2

    def step(self, action: int) -> Transition:
        if self._done:
            raise EpisodeFinishedError("episode already finished; call reset()")
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"invalid action {action}")
        state = self.discretizer.discretize((self._h, self._v))
        if self._h <= 0.0:
            # already landed (degenerate start); judge current velocity
            reward = self.LAND_REWARD if abs(self._v) <= self.safe_speed else self.CRASH_REWARD
            self._steps += 1
            self._done = True
            return Transition(state, action, reward, state, True)
        h2, v2 = self._integrate(self._h, self._v, action)
        self._steps += 1
        if h2 <= 0.0:
            next_state = self.discretizer.discretize((0.0, v2))
            reward = self.LAND_REWARD if abs(v2) <= self.safe_speed else self.CRASH_REWARD
            self._done = True
            return Transition(state, action, reward, next_state, True)
        next_state = self.discretizer.discretize((h2, v2))
        self._h, self._v = self.discretizer.representative(next_state)
        done = self._steps >= self.spec.max_steps
        self._done = done
        return Transition(state, action, self.STEP_COST, next_state, done)

    def transition_model(self, state: int, action: int) -> tuple[float, int, bool]:
        """Pure one-step dynamics from the cell representative."""
        h, v = self.discretizer.representative(state)
        h2, v2 = self._integrate(h, v, action)
        if h2 <= 0.0:
            next_state = self.discretizer.discretize((0.0, v2))
            reward = self.LAND_REWARD if abs(v2) <= self.safe_speed else self.CRASH_REWARD
            return reward, next_state, True
        return self.STEP_COST, self.discretizer.discretize((h2, v2)), False

    def model_states(self) -> list[int]:
        return list(range(self.spec.state_count))

    def terminal_kind(self, t: Transition) -> str | None:
        if not t.done:
            return None
        if t.reward == self.LAND_REWARD:
            return "landed"
        if t.reward == self.CRASH_REWARD:
            return "crashed"
        return "cap"

    def layout(self) -> dict:
        return {
            "type": "lander",
            "bins_h": self.discretizer.bins[0],
            "bins_v": self.discretizer.bins[1],
            "h_edges": [float(x) for x in self.discretizer.edges[0]],
            "v_edges": [float(x) for x in self.discretizer.edges[1]],
            "h_range": [self.discretizer.lows[0], self.discretizer.highs[0]],
            "v_range": [self.discretizer.lows[1], self.discretizer.highs[1]],
            "gravity": self.gravity,
            "thrust": self.thrust,
            "safe_speed": self.safe_speed,
            "start_altitude": self.start_altitude,
            "max_steps": self.spec.max_steps,
        }

    def config_descriptor(self) -> dict[str, str]:
        return {
            "env": "lander",
            "gravity": repr(self.gravity),
            "thrust": repr(self.thrust),
            "bins_h": str(self.discretizer.bins[0]),
            "bins_v": str(self.discretizer.bins[1]),
            "safe_speed": repr(self.safe_speed),
            "start_altitude": repr(self.start_altitude),
            "h_max": repr(self.discretizer.highs[0]),
            "v_max": repr(self.discretizer.highs[1]),
            "max_steps": str(self.spec.max_steps),
        }

    @property
    def config_hash(self) -> str:
        return _hash_descriptor(self.config_descriptor())


Env = GridWorld | MiniLander


# ---------------------------------------------------------------------------
# plain-text config files
# ---------------------------------------------------------------------------

def parse_config_file(path) -> dict[str, str]:
    """Parse a ``key = value`` config file.

    Blank lines and ``#`` comments are ignored; later keys override earlier
    ones.  Values keep their raw string form; typed access is up to the
    caller.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _parse_cell(text: str) -> Cell:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected 'x,y' cell, got {text!r}")
    return (int(parts[0]), int(parts[1]))


def _parse_cells(text: str) -> list[Cell]:
    text = text.strip()
    if not text:
        return []
    return [_parse_cell(chunk) for chunk in text.split(";") if chunk.strip()]


def build_env(cfg: dict[str, str]) -> Env:
    """Construct an environment from parsed config keys."""
    kind = cfg.get("env")
    if kind == "grid":
        try:
            return GridWorld(
                width=int(cfg["width"]),
                height=int(cfg["height"]),
                start=_parse_cell(cfg["start"]),
                goal=_parse_cell(cfg["goal"]),
                walls=_parse_cells(cfg.get("walls", "")),
                max_steps=int(cfg["max_steps"]) if "max_steps" in cfg else None,
            )
        except KeyError as exc:
            raise ConfigError(f"grid config missing key {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"bad grid config value: {exc}") from exc
    if kind == "lander":
        kwargs = {}
        for key, conv in (
            ("gravity", float),
            ("thrust", float),
            ("bins_h", int),
            ("bins_v", int),
            ("safe_speed", float),
            ("start_altitude", float),
            ("h_max", float),
            ("v_max", float),
            ("max_steps", int),
        ):
            if key in cfg:
                try:
                    kwargs[key] = conv(cfg[key])
                except ValueError as exc:
                    raise ConfigError(f"bad lander config value for {key}: {cfg[key]!r}") from exc
        return MiniLander(**kwargs)
    raise ConfigError(f"unknown env kind {kind!r} (expected 'grid' or 'lander')")
