import os
import warnings
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from encenergy.benchgen import SynthSpec, default_true_coeffs, generate
from encenergy.catalog import build_catalog
from encenergy.errors import RankDeficientWarning

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=50, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def catalog():
    return build_catalog()


@pytest.fixture(scope="session")
def sm_noiseless():
    spec = SynthSpec("SM", default_true_coeffs("SM"), noise_rel=0.0, seed=11)
    return spec, generate(spec)


@pytest.fixture(scope="session")
def sm_noisy():
    spec = SynthSpec("SM", default_true_coeffs("SM"), noise_rel=0.02, seed=12)
    return spec, generate(spec)


@pytest.fixture
def quiet_rank():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        yield


def random_system(seed: int, max_rows: int = 200, max_cols: int = 20):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_cols + 1))
    m = int(rng.integers(n + 1, max_rows + 1))
    X = rng.normal(size=(m, n)) * 10.0 ** rng.uniform(-2, 2, n)
    w = rng.uniform(0.1, 10.0, m)
    return rng, X, w
