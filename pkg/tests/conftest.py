import re
from collections import defaultdict

import numpy as np
import pytest

from laser_mpemba import generator, spectral
from laser_mpemba.model import LaserParams, stationary_distribution


def dense_generator(gain, kappa, n_sat, n_max):
    """Dense M written out entry by entry from the master equation (test oracle)."""
    m = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        g_in = n * gain / (1 + n / n_sat)
        g_out = (n + 1) * gain / (1 + (n + 1) / n_sat) if n < n_max else 0.0
        m[n, n] = -(n * kappa + g_out)
        if n >= 1:
            m[n, n - 1] = g_in
        if n < n_max:
            m[n, n + 1] = (n + 1) * kappa
    return m


@pytest.fixture(scope="session")
def canonical():
    return LaserParams(1.2, 1.0, 1600.0)


@pytest.fixture(scope="session")
def canonical_gen(canonical):
    return generator.build(canonical)


@pytest.fixture(scope="session")
def canonical_ps(canonical):
    return stationary_distribution(canonical)


@pytest.fixture(scope="session")
def canonical_dec(canonical_gen, canonical_ps):
    """Full decomposition of the G = 1.2 generator."""
    return spectral.decompose(generator.symmetrize(canonical_gen, canonical_ps))


@pytest.fixture(scope="session")
def strong():
    return LaserParams(2.0, 1.0, 1600.0)


@pytest.fixture(scope="session")
def strong_dec(strong):
    return spectral.decompose_model(strong)


# ---- acceptance summary: one line per criterion ---------------------------

_results = defaultdict(list)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        m = re.search(r"::test_c(\d+)_", report.nodeid)
        if m:
            _results[int(m.group(1))].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_results):
        checks = _results[crit]
        failed = [name for name, outcome in checks if outcome != "passed"]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {crit:2d}: {status}  ({len(checks) - len(failed)}/{len(checks)} checks)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)
