import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_mdp(rng, n_states=4, n_actions=3, discount=0.9, sparse=False):
    from rise_explore.mdp import TabularMdp

    t = rng.random((n_states, n_actions, n_states))
    if sparse:
        t *= rng.random(t.shape) < 0.5
        t[..., 0] += 1e-3
    t /= t.sum(axis=-1, keepdims=True)
    rho = rng.random(n_states)
    return TabularMdp(t, rng.normal(size=(n_states, n_actions)), rho / rho.sum(), discount)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an end-to-end check."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{number}] {title}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
