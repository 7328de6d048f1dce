import numpy as np
import pytest

from fsanm import BandSystem, DimsSpec, SpectralModel

FIG1_F = np.array([[0.35, 0.51], [0.31, 0.59], [0.37, 0.57]])


@pytest.fixture
def dims88():
    return DimsSpec((8, 8))


@pytest.fixture
def fig1_bands():
    return BandSystem.single((0.3, 0.4), (0.5, 0.6))


@pytest.fixture
def fig1_model():
    return SpectralModel.create(FIG1_F, np.exp(2j * np.pi * np.array([0.1, 0.45, 0.8])))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
