import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from loewner_lab.driving import make_family

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def catalog():
    """One representative per family (tabulated built from a linear sample)."""
    t = np.linspace(0.0, 1.0, 257)
    return {
        "constant": make_family("constant", {"c": 0.0}),
        "linear": make_family("linear", {"b": 1.0}),
        "polynomial": make_family("polynomial", {"coeffs": [0.0, 0.3, 0.1]}),
        "spiral": make_family("spiral", {"kappa": 1.0}),
        "power": make_family("power", {"M": 1.0, "beta": 0.75}),
        "weierstrass": make_family("weierstrass", {"M": 0.5, "beta": 0.75, "seed": 7}),
        "midpoint-random": make_family("midpoint-random", {"sigma": 0.5, "seed": 3}),
        "tabulated": make_family("tabulated", {"t": t, "lambda": 0.5 * np.sin(3 * t)}),
    }


@pytest.fixture(scope="session")
def drivers():
    return catalog()


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one acceptance line; printed now and again in the terminal summary."""
    def record(tag, ok, detail=""):
        line = f"{tag} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
