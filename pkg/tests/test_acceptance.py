"""Acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line. The lines are also collected
and shown together in the terminal summary. The main evolution run is shared
between experiments, so the whole module takes several minutes.

Run directly with ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import sys

import pytest

from vrlab.config import RunConfig
from vrlab.harness import run_experiment

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

OWNER = {
    1: "short_time",
    2: "short_time",
    3: "ring_speed",
    4: "short_time",
    5: "bs_crosscheck",
    6: "kernel_suite",
    7: "linear_smoothing",
    8: "uniqueness_proxy",
    9: "short_time",
    10: "short_time",
    11: "uniqueness_proxy",
    12: "aronson_suite",
    13: "bs_crosscheck",
    14: "short_time",
}


class Reports:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.shared: dict = {}
        self._done: dict = {}

    def __getitem__(self, exp: str):
        if exp not in self._done:
            self._done[exp] = run_experiment(exp, self.cfg, shared=self.shared)
        return self._done[exp]


@pytest.fixture(scope="session")
def reports():
    return Reports(RunConfig())


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(OWNER))
def test_criterion(reports, number):
    c = reports[OWNER[number]].criterion(number)
    line = c.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert c.status != "NOT_RUN", line
    assert c.passed, line


def main() -> int:
    r = Reports(RunConfig())
    ok = True
    for n in sorted(OWNER):
        c = r[OWNER[n]].criterion(n)
        print(c.line(), flush=True)
        ok &= bool(c.passed)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
