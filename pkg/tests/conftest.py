import numpy as np
import pytest

from surface_mwpm.lattice import LatticeConfig, Syndrome, sample_flips, syndrome_array


def random_syndrome(rng, d, k):
    """``k`` distinct stabilizer coordinates on the distance-``d`` grid."""
    rows, cols = d - 1, d
    flat = rng.choice(rows * cols, size=k, replace=False)
    return Syndrome(frozenset((int(f // cols), int(f % cols)) for f in flat))


def sampled_syndrome(rng, d, p):
    cfg = LatticeConfig(d)
    data = sample_flips(cfg, p, rng)
    return data, Syndrome.from_array(syndrome_array(data))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
