import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from calweight._core import available_backends  # noqa: E402
from calweight.design import FinitePopulation, SrsworDesign, make_srswor_sample  # noqa: E402

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, ok, detail in rows:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")


@pytest.fixture
def criterion(request):
    """Record one acceptance line; returns ``ok`` so tests can ``assert criterion(...)``."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        request.config.stash[ACCEPTANCE].append((label, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
        return bool(ok)

    return record


@pytest.fixture(params=sorted(available_backends()))
def kernels(request):
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def pop4():
    return FinitePopulation([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])


def random_srswor(rng, N=None, n=None, intercept=5.0):
    """Random population and SRSWOR sample with non-constant x."""
    N = N or int(rng.integers(max(6, (n or 0) + 1), 51))
    n = n or int(rng.integers(3, min(12, N - 1) + 1))
    x = rng.uniform(1.0, 30.0, N)
    y = intercept + 2.0 * x + rng.normal(0.0, 3.0, N)
    pop = FinitePopulation(y, x)
    design = SrsworDesign(N, n)
    idx = rng.choice(N, n, replace=False)
    return pop, design, make_srswor_sample(pop, design, idx)
