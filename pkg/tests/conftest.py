import functools

import pytest

from fragsolve.instance import oracle_optimum, random_instance, small_paper_instance

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str = ""):
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"acceptance criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())


@pytest.fixture
def small():
    return small_paper_instance()


SWEEP_SEEDS = range(34)  # 3 sizes x 34 seeds = 102 instances


@functools.lru_cache(maxsize=None)
def sweep_instance(pairs: int, seed: int):
    return random_instance(pairs, seed)


@functools.lru_cache(maxsize=None)
def sweep_oracle(pairs: int, seed: int):
    return oracle_optimum(sweep_instance(pairs, seed))


def sweep_cases():
    return [(n, s) for n in (2, 3, 4) for s in SWEEP_SEEDS]
