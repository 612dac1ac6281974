import numpy as np
import pytest
from hypothesis import settings

from idcompress.bounds import lemma_check
from idcompress.idcore import add_id_observer, remove_id_observer

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


class IdAudit:
    """Counts every ID the suite produces after hard-checking the identity
    block and full-rank exactness on it."""

    def __init__(self):
        self.checked = 0
        self.full_rank = 0

    def __call__(self, factors, a):
        rep = lemma_check(factors, a, diagnostics=False)
        self.checked += 1
        self.full_rank += rep["full_rank_exact"] is True


AUDIT = IdAudit()


def pytest_configure(config):
    add_id_observer(AUDIT)


def pytest_unconfigure(config):
    remove_id_observer(AUDIT)


@pytest.fixture
def id_audit():
    return AUDIT


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
