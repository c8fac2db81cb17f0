import numpy as np
import pytest

from gpgas.models import DiscreteHmmModel, DiscreteHmmSpec, KalmanModelSpec, LinearGaussianModel, SV_THETA, SvModel
from gpgas.ssm import ObservationSeries, simulate_dataset


@pytest.fixture
def hmm2():
    spec = DiscreteHmmSpec([0.6, 0.4], [[0.7, 0.3], [0.2, 0.8]], [-1.0, 1.0], [1.0, 0.5])
    return DiscreteHmmModel(2), spec, ObservationSeries([0.3, -0.8, 1.2])


@pytest.fixture
def hmm3():
    spec = DiscreteHmmSpec(
        [0.5, 0.3, 0.2],
        [[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.05, 0.15, 0.8]],
        [-2.0, 0.0, 2.0],
        [1.0, 1.0, 1.0],
    )
    model = DiscreteHmmModel(3)
    _, y = simulate_dataset(model, spec, 50, seed=11)
    return model, spec, y


@pytest.fixture
def lg():
    spec = KalmanModelSpec(a=0.9, q=0.5, c=1.0, r=1.0, m0=0.0, p0=1.0)
    model = LinearGaussianModel()
    _, y = simulate_dataset(model, spec, 50, seed=3)
    return model, spec, y


@pytest.fixture
def sv_data():
    model = SvModel()
    path, y = simulate_dataset(model, SV_THETA, 100, seed=1)
    return model, SV_THETA, path, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- one summary line per acceptance criterion ---------------------------------------------------

_criteria: dict[int, list[str]] = {}


def _criterion_of(nodeid: str):
    name = nodeid.split("::")[-1]
    if "test_acceptance" not in nodeid or not name.startswith("test_criterion_"):
        return None
    return int(name.split("_")[2])


def pytest_runtest_logreport(report):
    n = _criterion_of(report.nodeid)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.setdefault(n, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcomes = _criteria[n]
        if all(o == "passed" for o in outcomes):
            status = "PASS"
        elif any(o == "failed" for o in outcomes):
            status = "FAIL"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"criterion {n}: {status} ({len(outcomes)} checks)")
