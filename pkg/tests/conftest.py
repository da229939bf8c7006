import numpy as np
import pytest

from hybridrelay.network import (EnhancedChannels, PathLossModel, Topology, enhance_channels,
                                 generate_channels, relay_config)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_enhanced(rng, K=2, n_active=1, scale=1.0, g_scale=1.0):
    """Synthetic enhanced channels with every relay active (noise-normalized units)."""
    f0 = scale * crandn(rng, K)
    f = scale * crandn(rng, n_active, K)
    g = g_scale * crandn(rng, n_active)
    return EnhancedChannels(f0, f, g, np.arange(n_active))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_enhanced():
    """All-active relays on the default scenario (p_t = 0 dBm, L_e = 35 dB)."""
    ch = generate_channels(Topology(), PathLossModel(direct_extra_attenuation_db=35.0), 0)
    return enhance_channels(ch, relay_config(np.zeros(ch.N, dtype=int)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
