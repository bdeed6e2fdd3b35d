import numpy as np
import pytest

from typlab.ensembles import EnsembleSpec, constant_profile, exponential_band_profile, sample_hamiltonian
from typlab.spectral import diagonalize


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spectrum(D, seed, s=None):
    prof = constant_profile(D) if s is None else exponential_band_profile(D, s)
    return diagonalize(sample_hamiltonian(EnsembleSpec(prof), seed))


@pytest.fixture
def spectrum60():
    return random_spectrum(60, 7)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion, then assert it."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
