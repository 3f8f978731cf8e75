import time

import numpy as np
import pytest

from noninertial.dynamics import run_branches
from noninertial.factory import scenario_hamiltonian
from noninertial.hilbert import make_model, thermal_weights

# heavy-mass interferometer: theta = omega_int * t, so V(pi) is the spot value
HEAVY = dict(D_cm=32, D_int=16, M=1e4, omega_cm=1e-4, omega_int=1.0, c=10.0, g=1e-3)
HEAVY_DX = 1e5
HEAVY_STEPS = 314
HEAVY_DT = np.pi / HEAVY_STEPS
HEAVY_TAIL = 1e-4

ACCEPTANCE_LINES: list[str] = []
HEAVY_SECONDS: dict[str, float] = {}


def heavy_model():
    return make_model(**HEAVY)


def heavy_weights(tail=HEAVY_TAIL):
    return thermal_weights(1.0, tail=tail)


@pytest.fixture(scope="session")
def heavy_runs():
    """Full-propagator runs of the four constellations, computed once per session."""
    from noninertial.ehrenfest import symbolic_acceleration, tuned_classical_support

    m = heavy_model()
    w = heavy_weights()
    out = {}
    for key, tag, support in [("a", "a", "none"), ("b", "b", "none"), ("c", "c", "none"),
                              ("d", "d", "quantum_operator"), ("d_classical", "d", "classical_tuned")]:
        H = scenario_hamiltonian(tag, 1, support=support)
        control = None
        if support == "classical_tuned":
            def control(t, mo):
                return {"u1": tuned_classical_support(mo, m.M, m.g)}
        start = time.perf_counter()
        out[key] = (H, run_branches(H, m, w, center=0.0, dx=HEAVY_DX, width=None, momentum=0.0,
                                    dt=HEAVY_DT, steps=HEAVY_STEPS, control=control,
                                    extra={"acc": symbolic_acceleration(H)}))
        HEAVY_SECONDS[key] = time.perf_counter() - start
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
