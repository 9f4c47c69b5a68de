import numpy as np
import pytest

from membrane_contact import build_icosphere, derive_params
from membrane_contact.forms import SurfaceDiscretization

R = 0.75


@pytest.fixture(scope="session")
def params():
    return derive_params(100.0, 0.5)


@pytest.fixture(scope="session")
def sphere_meshes():
    cache = {}

    def get(level, radius=R):
        key = (level, radius)
        if key not in cache:
            cache[key] = build_icosphere(level, radius)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def sphere_disc(sphere_meshes):
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = SurfaceDiscretization(sphere_meshes(level))
        return cache[level]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# criterion -> list of (check, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(criterion: int, check: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        parts = "; ".join(f"{name} {'ok' if ok else 'FAILED'} ({detail})" for name, ok, detail in checks)
        terminalreporter.write_line(f"criterion {crit}: {status} - {parts}")
