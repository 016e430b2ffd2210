import numpy as np
import pytest

from loewner_shm.beam import BeamConfig, analytical_modes, assemble, plane_inputs, preset_scenarios, simulate_step_response
from loewner_shm.frf import (
    ChannelKind,
    ChannelMeta,
    FrfDataset,
    estimate_frf,
    select_band,
    split_run,
)
from loewner_shm.stabilization import consolidate, sweep

BAND = (1.0, 4000.0)
ORDERS = range(24, 51, 2)


def random_rational_system(rng, order, m, p):
    """Real stable (A, B, C) with ``order/2`` underdamped pole pairs."""
    A = np.zeros((order, order))
    for i in range(order // 2):
        w = 2 * np.pi * rng.uniform(5.0, 200.0)
        z = rng.uniform(0.01, 0.1)
        A[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[-z * w, w], [-w, -z * w]]
    B = rng.standard_normal((order, m))
    C = rng.standard_normal((p, order))
    return A, B, C


def direct_frf(A, B, C, freqs):
    """``C (sI - A)^-1 B`` by dense solves; the oracle for synthetic data."""
    n = A.shape[0]
    return np.stack([C @ np.linalg.solve(2j * np.pi * f * np.eye(n) - A, B) for f in freqs], axis=-1)


def as_dataset(values, freqs):
    p, m, _ = values.shape
    outs = tuple(ChannelMeta(f"o{i}", ChannelKind.DISPLACEMENT_OUTPUT) for i in range(p))
    ins = tuple(ChannelMeta(f"i{j}", ChannelKind.FORCE_INPUT) for j in range(m))
    return FrfDataset(np.asarray(freqs, float), values, outs, ins)


def simulated_frf(scenario=None, config=BeamConfig()):
    system = assemble(config, scenario) if scenario is not None else assemble(config)
    runs = [split_run(simulate_step_response(system, inp)) for inp in plane_inputs()]
    frf = estimate_frf([r[0] for r in runs], [r[1] for r in runs], increments=True)
    return system, select_band(frf, *BAND)


@pytest.fixture(scope="session")
def baseline_system():
    return assemble()


@pytest.fixture(scope="session")
def baseline_frf():
    return simulated_frf()[1]


@pytest.fixture(scope="session")
def baseline_diagram(baseline_frf):
    return sweep(baseline_frf, ORDERS, seed=0, band=BAND)


@pytest.fixture(scope="session")
def preset_results():
    """Identified and analytical modal sets for every preset case."""
    out = {}
    for cid, scenario in preset_scenarios().items():
        system, frf = simulated_frf(scenario)
        diagram = sweep(frf, ORDERS, seed=0, band=BAND)
        out[cid] = {
            "system": system,
            "frf": frf,
            "diagram": diagram,
            "identified": consolidate(diagram),
            "analytical": analytical_modes(system, BAND),
        }
    return out


@pytest.fixture(scope="session")
def white_noise_frf(baseline_frf):
    rng = np.random.default_rng(2024)
    shape = baseline_frf.values.shape
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return FrfDataset(baseline_frf.frequencies, values, baseline_frf.output_meta, baseline_frf.input_meta)


# one line per acceptance criterion, filled by test_acceptance and echoed in the terminal summary
ACCEPTANCE_LINES: dict[str, str] = {}


def record_acceptance(key: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
