import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def blind_stream(h, M, P, n_blocks, rng, noise_var=0.0, constellation="qam16"):
    """Prefixed OFDM blocks of i.i.d. constellation symbols through taps `h`."""
    from ofdmest.channel import complex_noise, convolve_stream
    from ofdmest.modem import Constellation

    pts = Constellation.from_name(constellation).points
    a = pts[rng.integers(0, pts.size, (n_blocks, M))]
    body = np.fft.ifft(a, axis=1, norm="ortho")
    tx = np.concatenate([body[:, M - P:], body], axis=1).ravel()
    rx = convolve_stream(tx, h)
    return rx + complex_noise(rng, rx.shape, noise_var)


def correlation(a, b):
    return abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))


_VERDICTS = []


class Verdict:
    """Collects one PASS/FAIL line for an acceptance test."""

    def __init__(self, label):
        self.label = label
        self.line = None

    def __call__(self, ok, detail):
        self.line = f"{'PASS' if ok else 'FAIL'}  {self.label}: {detail}"
        _VERDICTS.append(self.line)
        print(self.line)
        assert ok, detail


@pytest.fixture
def verdict(request):
    marker = request.node.get_closest_marker("criterion")
    v = Verdict(marker.args[0] if marker else request.node.name)
    yield v
    if v.line is None:
        _VERDICTS.append(f"FAIL  {v.label}: did not complete")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
