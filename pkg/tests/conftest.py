import pytest

from diskbeam.config import config_from_dict
from diskbeam.dynamics import simulate
from diskbeam.functionals import evaluate_trace
from diskbeam.model import PhysicalParams
from diskbeam.spatial import assemble


@pytest.fixture(scope="session")
def ops64():
    return assemble(PhysicalParams(), 64)


@pytest.fixture(scope="session")
def ops32():
    return assemble(PhysicalParams(), 32)


def run_dict(d):
    """Simulate a config mapping; returns (config, trace, operators, functional series)."""
    cfg = config_from_dict(d)
    trace = simulate(cfg)
    ops = assemble(cfg.params, cfg.grid)
    return cfg, trace, ops, evaluate_trace(trace, ops, cfg.law)


def small_config(**over):
    d = {"mode": "subsystem", "params": {"varpi": 1.0},
         "law": {"damping": {"kind": "linear", "c": 0.5}},
         "grid": {"n_elements": 16}, "time": {"dt": 1e-3, "T": 0.5, "cadence": 10},
         "initial": {"displacement": {"shape": "first_mode"}}}
    for key, value in over.items():
        d[key] = value
    return d




def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
