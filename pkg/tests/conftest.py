import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid, rng, kmax=None, components=None):
    """Random complex field whose spectrum vanishes above ``kmax`` (default: n/4 lattice modes)."""
    shape = grid.shape if components is None else (components,) + grid.shape
    spec = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    cut = grid.frequencies[grid.n // 4] if kmax is None else kmax
    spec = spec * (grid.kabs <= cut)
    return np.fft.ifftn(spec, axes=tuple(range(-grid.dim, 0)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
