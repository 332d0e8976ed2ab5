import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list = []


@pytest.fixture
def report_ac():
    """Record one ``ACn PASS/FAIL`` line; printed again in the terminal summary."""

    def record(n: int, ok: bool, text: str):
        line = f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_sparse_measure(rng: np.random.Generator, level: int, max_atoms: int, span: int | None = None):
    from lqdim import DyadicMeasure

    span = span or 2**level
    n = int(rng.integers(1, max_atoms + 1))
    n = min(n, span)
    idx = np.sort(rng.choice(span, size=n, replace=False))
    w = rng.exponential(size=n) ** rng.uniform(0.5, 3.0)
    w = np.maximum(w, 1e-300)
    return DyadicMeasure.from_atoms(level, idx, w, normalize=True)


@pytest.fixture(scope="session")
def fuzz_pairs():
    """500 seeded sparse pairs of mixed levels, spans and atom counts."""
    rng = np.random.default_rng(20240611)
    out = []
    for _ in range(500):
        level = int(rng.integers(4, 21))
        span = int(min(2**level, rng.choice([16, 256, 4096, 2**level])))
        mu = random_sparse_measure(rng, level, 300, span)
        nu = random_sparse_measure(rng, level, 300, span)
        out.append((mu, nu))
    return out
