from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rise_explore.envs import (
    ACTIONS,
    CoverageCounter,
    MazeSpec,
    TabularEnv,
    build_gridworld,
    build_maze,
    chain_mdp,
    generate_maze,
    parse_maze,
    render_maze,
    shortest_path_length,
    step,
)
from rise_explore.errors import ContractViolation, ValidationError
from rise_explore.mdp import TabularMdp, value_iteration
from rise_explore.rng import make_rng


def flood_fill(spec):
    """Reachable cells with portals, written independently of the library."""
    twin = {}
    for a, b in spec.portals:
        twin[a], twin[b] = b, a
    seen, queue = {spec.start}, deque([spec.start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            n = (r + dr, c + dc)
            if not (0 <= n[0] < spec.height and 0 <= n[1] < spec.width) or n in spec.walls:
                continue
            n = twin.get(n, n)
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen


def grid_bfs(size):
    dist = {(0, 0): 0}
    queue = deque([(0, 0)])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ACTIONS:
            n = (r + dr, c + dc)
            if 0 <= n[0] < size and 0 <= n[1] < size and n not in dist:
                dist[n] = dist[(r, c)] + 1
                queue.append(n)
    return dist[(size - 1, size - 1)]


class TestMaze:
    def test_corridor(self):
        mdp = build_maze(parse_maze("SG"))
        assert mdp.n_states == 2
        s0 = int(np.argmax(mdp.initial_dist))
        nxt, reward, done = step(mdp, s0, 1, np.random.default_rng(0))
        assert done and reward == -1.0 and mdp.terminal[nxt]
        # into the west wall keeps position
        assert step(mdp, s0, 0, np.random.default_rng(0))[0] == s0

    def test_portal_relocates(self):
        spec = parse_maze("Sa.\n###\n.aG")
        mdp = build_maze(spec)
        idx = {cell: i for i, cell in enumerate(mdp.cells)}
        row = mdp.transition[idx[(0, 0)], 1]
        assert row[idx[(2, 1)]] == 1.0

    def test_seed7_flood_fill(self):
        spec = generate_maze(10, 7)
        mdp = build_maze(spec)
        assert mdp.n_states == 100 - len(spec.walls)
        assert set(mdp.cells) == flood_fill(spec)
        np.testing.assert_allclose(mdp.transition.sum(axis=-1), 1.0, atol=1e-12)

    @given(st.integers(0, 10_000), st.integers(3, 12))
    def test_generation_is_pure(self, seed, size):
        a, b = generate_maze(size, seed), generate_maze(size, seed)
        assert a == b
        ma, mb = build_maze(a), build_maze(b)
        np.testing.assert_array_equal(ma.transition, mb.transition)
        assert flood_fill(a) == set(a.open_cells())
        assert a.start != a.goal
        np.testing.assert_allclose(ma.transition.sum(axis=-1), 1.0, atol=1e-12)

    def test_goal_terminal_and_costs(self):
        mdp = build_maze(generate_maze(8, 3))
        g = int(np.flatnonzero(mdp.terminal)[0])
        assert np.all(mdp.transition[g, :, g] == 1.0) and np.all(mdp.reward[g] == 0)
        others = np.delete(mdp.reward, g, axis=0)
        assert np.all(others == -1.0)

    def test_render_round_trip(self):
        spec = generate_maze(10, 11, n_portals=2)
        art = render_maze(spec)
        back = parse_maze(art)
        assert back.walls == spec.walls and back.start == spec.start and back.goal == spec.goal
        assert set(map(frozenset, back.portals)) == set(map(frozenset, spec.portals))
        assert set(art) <= set("#.SGab\n")

    def test_disconnected_rejected(self):
        spec = parse_maze("S#.\n.#G")
        with pytest.raises(ValidationError):
            build_maze(spec)

    @pytest.mark.parametrize("art", ["SS", "S.\n..", "S.x\n..G", "Sa.G", "S.\n.G.", ""])
    def test_bad_art(self, art):
        with pytest.raises(ValidationError):
            parse_maze(art)

    def test_spec_invariants(self):
        with pytest.raises(ValidationError):
            MazeSpec(1, 2, frozenset(), (0, 0), (0, 0)).validate()
        with pytest.raises(ValidationError):
            MazeSpec(1, 3, frozenset({(0, 1)}), (0, 0), (0, 2), (((0, 1), (0, 0)),)).validate()

    def test_too_small(self):
        with pytest.raises(ValidationError):
            generate_maze(1, 0)


class TestGridWorld:
    def test_two_by_two(self):
        mdp = build_gridworld(2)
        assert mdp.n_states == 4
        assert shortest_path_length(mdp, 0) == 2

    @pytest.mark.parametrize("size", [2, 3, 5, 10])
    def test_optimal_return_is_minus_distance(self, size):
        mdp = build_gridworld(size)
        # gamma close to 1 with an exact integer answer: round -V
        vt = value_iteration(mdp.with_discount(1 - 1e-9), tol=1e-10)
        assert round(-vt.v[0]) == grid_bfs(size) == 2 * (size - 1)

    def test_ten_by_ten_steps(self):
        mdp = build_gridworld(10)
        q = value_iteration(mdp, tol=1e-10).q
        s, steps = 0, 0
        while not mdp.terminal[s]:
            s = int(np.argmax(mdp.transition[s, int(np.argmax(q[s]))]))
            steps += 1
        assert steps == 18 == grid_bfs(10)

    def test_size_check(self):
        with pytest.raises(ValidationError):
            build_gridworld(1)


def two_way(p):
    t = np.zeros((3, 1, 3))
    t[0, 0, 1], t[0, 0, 2] = p, 1 - p
    t[1, 0, 1] = t[2, 0, 2] = 1.0
    return TabularMdp(t, np.zeros((3, 1)), np.array([1.0, 0, 0]), 0.9)


class TestStep:
    def test_deterministic_ignores_rng(self):
        mdp = chain_mdp(3)
        rng = np.random.default_rng(0)
        before = rng.bit_generator.state
        assert step(mdp, 0, 1, rng)[0] == 1
        assert rng.bit_generator.state == before

    def test_reproducible(self):
        mdp = two_way(0.5)
        r1, r2 = make_rng(3), make_rng(3)
        seq1 = [step(mdp, 0, 0, r1)[0] for _ in range(50)]
        seq2 = [step(mdp, 0, 0, r2)[0] for _ in range(50)]
        assert seq1 == seq2
        assert set(seq1) == {1, 2}

    def test_frequencies(self):
        mdp = two_way(0.3)
        rng = make_rng(1)
        draws = np.array([step(mdp, 0, 0, rng)[0] for _ in range(100_000)])
        assert abs(np.mean(draws == 1) - 0.3) < 0.01

    def test_stepping_terminal(self):
        mdp = build_maze(parse_maze("SG"))
        with pytest.raises(ContractViolation):
            step(mdp, int(np.flatnonzero(mdp.terminal)[0]), 0, np.random.default_rng(0))
        env = TabularEnv(mdp)
        env.reset(np.random.default_rng(0))
        env.step(1, np.random.default_rng(0))
        assert env.done
        with pytest.raises(ContractViolation):
            env.step(0, np.random.default_rng(0))

    def test_env_matches_step(self):
        mdp = two_way(0.4)
        env = TabularEnv(mdp)
        assert not env.deterministic
        r1, r2 = make_rng(5), make_rng(5)
        env.reset(r1)
        assert env.step(0, r1) == step(mdp, 0, 0, r2)

    def test_truncation(self):
        env = TabularEnv(chain_mdp(3), max_steps=2)
        rng = np.random.default_rng(0)
        env.reset(rng)
        env.step(0, rng)
        assert not env.truncated
        env.step(0, rng)
        assert env.truncated


class TestCoverage:
    @given(st.integers(2, 6), st.integers(0, 1000))
    def test_random_walk_lower_bound(self, size, seed):
        mdp = build_gridworld(size)
        rng = np.random.default_rng(seed)
        cov = CoverageCounter(mdp.n_states)
        env = TabularEnv(mdp)
        cov.visit(env.reset(rng))
        while not cov.coverage_complete:
            if env.done:
                cov.visit(env.reset(rng))
            cov.tick(env.step(int(rng.integers(4)), rng)[0])
        assert cov.completed_at >= mdp.n_states - 1
        assert cov.visited.all() and cov.fraction == 1.0

    def test_curve(self):
        cov = CoverageCounter(4)
        cov.visit(0)
        for s in (0, 1, 1, 2, 3):
            cov.tick(s)
        assert cov.discoveries == [0, 2, 4, 5]
        np.testing.assert_allclose(cov.curve([0, 1, 2, 4, 10]), [0.25, 0.25, 0.5, 0.75, 1.0])
        assert cov.completed_at == 5
