"""Grid environments compiled to :class:`TabularMdp`.

Actions are 0=left, 1=right, 2=up, 3=down. Moving into a wall or off the grid
keeps the agent in place; moving onto a portal cell relocates the agent to the
twin cell of that portal. Every step costs -1 until the goal, which is an
absorbing terminal state with reward 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ValidationError
from .mdp import TabularMdp
from .rng import make_rng

Cell = tuple[int, int]

ACTIONS: tuple[Cell, ...] = ((0, -1), (0, 1), (-1, 0), (1, 0))
ACTION_NAMES = ("left", "right", "up", "down")
MAX_GENERATION_RETRIES = 100


@dataclass(frozen=True)
class MazeSpec:
    """Concrete maze layout on a ``height x width`` grid of cells."""

    height: int
    width: int
    walls: frozenset[Cell]
    start: Cell
    goal: Cell
    portals: tuple[tuple[Cell, Cell], ...] = ()
    seed: int | None = None

    @property
    def size(self) -> int:
        return max(self.height, self.width)

    def is_open(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width and cell not in self.walls

    def open_cells(self) -> list[Cell]:
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if (r, c) not in self.walls]

    def validate(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValidationError("maze dimensions must be positive")
        if self.start == self.goal:
            raise ValidationError("start and goal must differ")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self.is_open(cell):
                raise ValidationError(f"{name} {cell} is not an open cell")
        used: set[Cell] = set()
        for a, b in self.portals:
            if a == b:
                raise ValidationError("portal pair must join distinct cells")
            for cell in (a, b):
                if not self.is_open(cell):
                    raise ValidationError(f"portal {cell} is not an open cell")
                if cell in used or cell in (self.start, self.goal):
                    raise ValidationError(f"portal {cell} overlaps another feature")
                used.add(cell)


def _portal_map(spec: MazeSpec) -> dict[Cell, Cell]:
    twins: dict[Cell, Cell] = {}
    for a, b in spec.portals:
        twins[a] = b
        twins[b] = a
    return twins


def maze_successor(spec: MazeSpec, cell: Cell, action: int, twins: dict[Cell, Cell] | None = None) -> Cell:
    twins = _portal_map(spec) if twins is None else twins
    dr, dc = ACTIONS[action]
    nxt = (cell[0] + dr, cell[1] + dc)
    if not spec.is_open(nxt):
        return cell
    return twins.get(nxt, nxt)


def reachable_cells(spec: MazeSpec) -> set[Cell]:
    """Flood fill over the actual dynamics (portals included, goal absorbing)."""
    twins = _portal_map(spec)
    seen = {spec.start}
    queue = deque([spec.start])
    while queue:
        cell = queue.popleft()
        if cell == spec.goal:
            continue
        for a in range(len(ACTIONS)):
            nxt = maze_successor(spec, cell, a, twins)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def is_connected(spec: MazeSpec) -> bool:
    return reachable_cells(spec) == set(spec.open_cells())


def _carve(size: int, rng: np.random.Generator) -> set[Cell]:
    """Recursive backtracker on rooms at even coordinates; returns open cells."""
    rooms = [(r, c) for r in range(0, size, 2) for c in range(0, size, 2)]
    opened = {rooms[0]}
    stack = [rooms[0]]
    while stack:
        r, c = stack[-1]
        nbrs = [(r + 2 * dr, c + 2 * dc) for dr, dc in ACTIONS
                if 0 <= r + 2 * dr < size and 0 <= c + 2 * dc < size
                and (r + 2 * dr, c + 2 * dc) not in opened]
        if not nbrs:
            stack.pop()
            continue
        nr, nc = nbrs[int(rng.integers(len(nbrs)))]
        opened.add(((r + nr) // 2, (c + nc) // 2))
        opened.add((nr, nc))
        stack.append((nr, nc))
    return opened


def _bfs_farthest(spec_cells: set[Cell], start: Cell) -> Cell:
    dist = {start: 0}
    queue = deque([start])
    far = start
    while queue:
        cell = queue.popleft()
        if (dist[cell], cell) > (dist[far], far):
            far = cell
        for dr, dc in ACTIONS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in spec_cells and nxt not in dist:
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return far


def generate_maze(size: int, seed: int, n_portals: int = 1, loop_prob: float = 0.1) -> MazeSpec:
    """Random ``size x size`` maze.

    Passages are carved by a recursive backtracker over rooms at even
    coordinates; each wall cell separating two open cells in a straight line is
    then removed with probability ``loop_prob`` to create loops. The start is
    the top-left cell, the goal the open cell farthest from it, and
    ``n_portals`` portal pairs are placed on random open cells. Layouts that
    fail the flood-fill check are regenerated from the next seed.
    """
    if size < 2:
        raise ValidationError("maze size must be at least 2")
    for attempt in range(MAX_GENERATION_RETRIES):
        s = seed + attempt
        rng = make_rng(s, 0x6D617A65)
        opened = _carve(size, rng)
        for r in range(size):
            for c in range(size):
                if (r, c) in opened:
                    continue
                horiz = (r, c - 1) in opened and (r, c + 1) in opened
                vert = (r - 1, c) in opened and (r + 1, c) in opened
                if (horiz or vert) and rng.random() < loop_prob:
                    opened.add((r, c))
        start = (0, 0)
        goal = _bfs_farthest(opened, start)
        free = sorted(cell for cell in opened if cell not in (start, goal))
        portals: list[tuple[Cell, Cell]] = []
        if n_portals > 0:
            if len(free) < 2 * n_portals:
                raise ValidationError("maze too small for the requested portals")
            picks = rng.choice(len(free), size=2 * n_portals, replace=False)
            portals = [(free[picks[2 * i]], free[picks[2 * i + 1]]) for i in range(n_portals)]
        walls = frozenset((r, c) for r in range(size) for c in range(size) if (r, c) not in opened)
        spec = MazeSpec(size, size, walls, start, goal, tuple(portals), seed=s)
        spec.validate()
        if is_connected(spec):
            return spec
    raise ValidationError(f"no connected maze after {MAX_GENERATION_RETRIES} seeds from {seed}")


def _grid_mdp(spec: MazeSpec, discount: float) -> TabularMdp:
    cells = spec.open_cells()
    index = {cell: i for i, cell in enumerate(cells)}
    twins = _portal_map(spec)
    n, m = len(cells), len(ACTIONS)
    T = np.zeros((n, m, n))
    R = np.full((n, m), -1.0)
    terminal = np.zeros(n, dtype=bool)
    for cell, s in index.items():
        if cell == spec.goal:
            T[s, :, s] = 1.0
            R[s] = 0.0
            terminal[s] = True
            continue
        for a in range(m):
            T[s, a, index[maze_successor(spec, cell, a, twins)]] = 1.0
    rho = np.zeros(n)
    rho[index[spec.start]] = 1.0
    return TabularMdp(T, R, rho, discount, terminal, tuple(cells))


def build_maze(spec: MazeSpec, discount: float = 0.99) -> TabularMdp:
    """One state per open cell; raises if some open cell is unreachable."""
    spec.validate()
    if not is_connected(spec):
        raise ValidationError("maze has open cells unreachable from the start")
    return _grid_mdp(spec, discount)


def gridworld_spec(size: int) -> MazeSpec:
    if size < 2:
        raise ValidationError("GridWorld size must be at least 2")
    return MazeSpec(size, size, frozenset(), (0, 0), (size - 1, size - 1))


def build_gridworld(size: int, discount: float = 0.99) -> TabularMdp:
    """Open ``size x size`` grid from the top-left corner to the bottom-right."""
    return build_maze(gridworld_spec(size), discount)


def render_maze(spec: MazeSpec) -> str:
    """ASCII art: '#' wall, '.' open, 'S' start, 'G' goal, portal pairs share a
    lower-case letter."""
    grid = [["#" if (r, c) in spec.walls else "." for c in range(spec.width)]
            for r in range(spec.height)]
    for i, (a, b) in enumerate(spec.portals):
        for r, c in (a, b):
            grid[r][c] = chr(ord("a") + i)
    grid[spec.start[0]][spec.start[1]] = "S"
    grid[spec.goal[0]][spec.goal[1]] = "G"
    return "\n".join("".join(row) for row in grid) + "\n"


def parse_maze(text: str) -> MazeSpec:
    rows = [ln.rstrip("\n") for ln in text.strip("\n").splitlines()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError("maze art must be a non-empty rectangle")
    walls, marks = set(), {}
    start = goal = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                walls.add((r, c))
            elif ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch.islower():
                marks.setdefault(ch, []).append((r, c))
            elif ch != ".":
                raise ValidationError(f"unknown maze character {ch!r}")
    if start is None or goal is None:
        raise ValidationError("maze art needs both 'S' and 'G'")
    portals = []
    for ch in sorted(marks):
        if len(marks[ch]) != 2:
            raise ValidationError(f"portal {ch!r} must appear exactly twice")
        portals.append(tuple(marks[ch]))
    spec = MazeSpec(len(rows), len(rows[0]), frozenset(walls), start, goal, tuple(portals))
    spec.validate()
    return spec


def shortest_path_length(mdp: TabularMdp, start: int) -> int:
    """BFS over the support of the transition kernel to the nearest terminal."""
    dist = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if mdp.terminal[s]:
            return dist[s]
        for nxt in np.flatnonzero(mdp.transition[s].sum(axis=0) > 0):
            if int(nxt) not in dist:
                dist[int(nxt)] = dist[s] + 1
                queue.append(int(nxt))
    raise ValidationError("no terminal state reachable")


def chain_mdp(n: int = 3, discount: float = 0.9, slip: float = 0.0) -> TabularMdp:
    """Chain of ``n`` states with actions 0=left and 1=right, starting at the
    left end. With ``slip`` > 0 a move goes the other way with that probability."""
    if n < 1:
        raise ValidationError("chain needs at least one state")
    T = np.zeros((n, 2, n))
    for s in range(n):
        left, right = max(s - 1, 0), min(s + 1, n - 1)
        T[s, 0, left] += 1.0 - slip
        T[s, 0, right] += slip
        T[s, 1, right] += 1.0 - slip
        T[s, 1, left] += slip
    rho = np.zeros(n)
    rho[0] = 1.0
    return TabularMdp(T, np.zeros((n, 2)), rho, discount)


def swap_mdp(discount: float = 0.9) -> TabularMdp:
    """Two states, action 0 stays and action 1 swaps; uniform start."""
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = T[1, 0, 1] = 1.0
    T[0, 1, 1] = T[1, 1, 0] = 1.0
    return TabularMdp(T, np.zeros((2, 2)), np.full(2, 0.5), discount)


# ---------------------------------------------------------------------------
# sampling interface


def step(mdp: TabularMdp, state: int, action: int, rng: np.random.Generator) -> tuple[int, float, bool]:
    """Sample one transition of ``mdp``. Deterministic rows ignore ``rng``."""
    if mdp.terminal[state]:
        raise ContractViolation("cannot step from a terminal state")
    row = mdp.transition[state, action]
    support = np.flatnonzero(row)
    if len(support) == 1:
        nxt = int(support[0])
    else:
        u = rng.random()
        nxt = int(support[min(np.searchsorted(np.cumsum(row[support]), u, side="right"), len(support) - 1)])
    return nxt, float(mdp.reward[state, action]), bool(mdp.terminal[nxt])


class TabularEnv:
    """Episodic stepping over a :class:`TabularMdp`.

    Deterministic rows are cached as a successor table so the hot loop in
    the maze benchmark avoids sampling.
    """

    def __init__(self, mdp: TabularMdp, max_steps: int | None = None) -> None:
        self.mdp = mdp
        self.max_steps = max_steps
        T = mdp.transition
        self._det = bool(np.all(T.max(axis=2) == 1.0))
        self._succ = T.argmax(axis=2).tolist() if self._det else None
        self._reward = mdp.reward.tolist()
        self._terminal = mdp.terminal.tolist()
        self.state: int | None = None
        self.done = True
        self.t = 0

    @property
    def deterministic(self) -> bool:
        return self._det

    def reset(self, rng: np.random.Generator) -> int:
        rho = self.mdp.initial_dist
        support = np.flatnonzero(rho)
        if len(support) == 1:
            s = int(support[0])
        else:
            s = int(rng.choice(self.mdp.n_states, p=rho))
        self.state, self.done, self.t = s, bool(self._terminal[s]), 0
        return s

    def step(self, action: int, rng: np.random.Generator) -> tuple[int, float, bool]:
        if self.done or self.state is None:
            raise ContractViolation("episode has terminated; call reset() first")
        s = self.state
        if self._det:
            nxt = self._succ[s][action]
            reward, done = self._reward[s][action], self._terminal[nxt]
        else:
            nxt, reward, done = step(self.mdp, s, action, rng)
        self.state, self.done = nxt, done
        self.t += 1
        return nxt, reward, done

    @property
    def truncated(self) -> bool:
        return self.max_steps is not None and self.t >= self.max_steps and not self.done


@dataclass
class CoverageCounter:
    """Tracks which states have been visited and the step count at which the
    last one was first seen."""

    n_states: int
    visited: np.ndarray = field(init=False)
    steps_taken: int = 0
    completed_at: int | None = None
    discoveries: list[int] = field(init=False, repr=False)  # step of each first visit
    _remaining: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.visited = np.zeros(self.n_states, dtype=bool)
        self.discoveries = []
        self._remaining = self.n_states

    def visit(self, state: int) -> None:
        if not self.visited[state]:
            self.visited[state] = True
            self.discoveries.append(self.steps_taken)
            self._remaining -= 1
            if self._remaining == 0 and self.completed_at is None:
                self.completed_at = self.steps_taken

    def tick(self, next_state: int) -> None:
        """Count one environment step landing in ``next_state``."""
        self.steps_taken += 1
        self.visit(next_state)

    @property
    def coverage_complete(self) -> bool:
        return self._remaining == 0

    @property
    def fraction(self) -> float:
        return 1.0 - self._remaining / self.n_states

    def curve(self, grid) -> np.ndarray:
        """Fraction of states visited after each step count in ``grid``."""
        found = np.searchsorted(np.asarray(self.discoveries), np.asarray(grid), side="right")
        return found / self.n_states
