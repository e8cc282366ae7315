import hypothesis
import numpy as np
import pytest

from lodwave.assembly import build_fine_operators, sample_coefficient
from lodwave.interpolation import build_clement
from lodwave.mesh import UNIT_SQUARE, build_two_level
from lodwave.problems import get_problem

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.load_profile("default")


class Level:
    """Hierarchy, fine operators and Clement operator for one (problem, H, h)."""

    def __init__(self, problem, H_exp, h_exp):
        self.problem = problem
        self.hier = build_two_level(problem.domain, 2.0**-H_exp, 2.0**-h_exp)
        self.field = sample_coefficient(problem.coefficient, self.hier.fine)
        self.ops = build_fine_operators(self.hier.fine, self.field)
        self.clement = build_clement(self.hier)


@pytest.fixture(scope="session")
def mp2_small():
    """MP2 coefficient at (H, h) = (2^-2, 2^-4)."""
    return Level(get_problem("MP2"), 2, 4)


@pytest.fixture(scope="session")
def unit_level():
    """Constant coefficient at (H, h) = (2^-2, 2^-4)."""
    from lodwave.problems import ModelProblem

    problem = ModelProblem("unit", UNIT_SQUARE, lambda x: np.ones(len(x)), lambda x, t=0.0: np.ones(len(x)))
    return Level(problem, 2, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 13):
        if n in mod.RESULTS:
            ok, detail = mod.RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
