import os

import numpy as np
import pytest

from slpsim.stats_core import DEFAULT_ALPHAS, DEFAULT_SIZES, load_or_generate

SMALL_SIZES = (5, 10, 20, 50, 100, 200)


def _cache_dir(request):
    override = os.environ.get("SLPSIM_TABLE_DIR")
    if override:
        os.makedirs(override, exist_ok=True)
        return override
    return str(request.config.cache.mkdir("slpsim"))


@pytest.fixture(scope="session")
def table(request):
    """Full default critical-value table, built once (about a minute) and cached."""
    path = os.path.join(_cache_dir(request), "critvals_full.txt")
    return load_or_generate(path, DEFAULT_SIZES, DEFAULT_ALPHAS)


@pytest.fixture(scope="session")
def small_table(request):
    """Table restricted to the sizes the CLI smoke tests need."""
    path = os.path.join(_cache_dir(request), "critvals_small.txt")
    return load_or_generate(path, SMALL_SIZES, DEFAULT_ALPHAS)


@pytest.fixture(scope="session")
def small_table_path(request, small_table):
    return os.path.join(_cache_dir(request), "critvals_small.txt")


@pytest.fixture
def rng():
    return np.random.default_rng(20100)


@pytest.fixture(scope="session")
def table_path(request, table):
    return os.path.join(_cache_dir(request), "critvals_full.txt")


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one ``PASS``/``FAIL`` line per acceptance criterion."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
