import numpy as np
import pytest

from hmimo_leo import ChannelSet

ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail=""):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_problem(rng, S=1, N=4, L=2, Q=1, K=4, I=2):
    """Unit-scale Gaussian channels, reference waves and a random state."""
    channels = ChannelSet(crandn(rng, Q * K, S * N), crandn(rng, I, Q * K), crandn(rng, I, S * N))
    refs = [np.exp(2j * np.pi * rng.random((N, L))) for _ in range(S)]
    F = crandn(rng, S * L, I)
    w = np.exp(2j * np.pi * rng.random(S * N))
    theta = 2 * np.pi * rng.random(Q * K)
    return channels, refs, F, w, theta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
