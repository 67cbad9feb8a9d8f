import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import sagebench.evaluation as evaluation_mod
import sagebench.sage as sage_mod

TRACE_REL_TOL = 1e-9


@pytest.fixture(autouse=True, scope="session")
def check_every_sage_trace():
    """Assert the residual-power trace is non-increasing for every run
    executed anywhere in the suite, including runs inside sweep cells."""
    original = sage_mod.run_sage

    def checked(data, geom, cfg):
        result = original(data, geom, cfg)
        trace = result.objective_trace
        scale = max(trace[0], 1e-300)
        for a, b in zip(trace, trace[1:]):
            assert b <= a + TRACE_REL_TOL * scale, (
                f"objective trace increased: {a} -> {b} (trace={trace})"
            )
        return result

    sage_mod.run_sage = checked
    evaluation_mod.run_sage = checked
    yield
    sage_mod.run_sage = original
    evaluation_mod.run_sage = original
