import functools

import pytest

from resetinv.bids import solve
from resetinv.config import load_config, reference_configs
from resetinv.demand import DemandModel
from resetinv.model import CostParameters, ProblemSpec

REFERENCE = reference_configs()


@functools.lru_cache(maxsize=None)
def reference_spec(name):
    return load_config(REFERENCE[name]).to_spec()


@functools.lru_cache(maxsize=None)
def solved(name, n=201):
    return solve(reference_spec(name), n=n)


@pytest.fixture(params=sorted(REFERENCE))
def ref_name(request):
    return request.param


def water_spec(gamma=0.9, demand=None, q=None, **kw):
    costs = dict(c=1.0, p=5.0, reset_unit=0.5, q=q or tuple(1 + 0.3 * t for t in range(7)))
    costs.update(kw)
    return ProblemSpec("water", CostParameters(**costs), demand or DemandModel.truncated_normal(2, 1), 6.0, 7, gamma)


def retail_spec(gamma=0.9, demand=None, k=7, c_max=6.0, **kw):
    costs = dict(c=1.0, K=0.0, p=4.0, q=1.0, reset_unit=0.5, reset_fixed=0.0)
    costs.update(kw)
    return ProblemSpec("retail", CostParameters(**costs), demand or DemandModel.exponential(1.0), c_max, k, gamma)


def zero_spec(kind="retail"):
    return ProblemSpec(kind, CostParameters(), DemandModel.exponential(1.0), 4.0, 3, 0.9)


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
