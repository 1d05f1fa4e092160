import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def frozen_build():
    from badflow.cantor.config import frozen_config
    from badflow.cantor.tree import build_sequence
    return build_sequence(frozen_config())


@pytest.fixture(scope="session")
def small_build():
    from badflow.cantor.config import small_config
    from badflow.cantor.tree import build_sequence
    return build_sequence(small_config())


# acceptance criteria report -----------------------------------------------------

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request, capsys):
    """Context manager factory: ``with criterion("AC1") as info`` records one
    PASS/FAIL line; any exception inside the block (a failed assert) is a FAIL."""
    from contextlib import contextmanager

    @contextmanager
    def run(name):
        info = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            line = f"{name} FAIL: {info['detail']} | {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            raise
        else:
            line = f"{name} PASS: {info['detail']}"
        finally:
            request.config.stash[ACCEPTANCE].append(line)
            with capsys.disabled():
                print(f"\n{line}")

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
