import numpy as np
import pytest

from ltcrank.dataset import (
    DataConfig,
    LengthFilter,
    ModelRecord,
    ModelSet,
    Objective,
    PretrainConfig,
    ProxyVector,
    SftVector,
    load_canonical,
)

_acceptance_lines = []


def record_acceptance_line(line: str) -> None:
    """Collected by test_acceptance; replayed in the terminal summary."""
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def canonical():
    return load_canonical()


def make_record(model_id, proxies, sft, objective=Objective.CLM, data_config=DataConfig.DC0,
                lr=2.5e-4, tagging=False, length=LengthFilter.ALL):
    return ModelRecord(
        id=model_id,
        config=PretrainConfig(
            objective=objective,
            data_config=data_config,
            learning_rate=lr,
            domain_tagging=tagging,
            length_filter=length,
        ),
        proxies=ProxyVector(*proxies),
        sft=SftVector(*sft),
    )


def make_set(rows):
    """rows: list of (id, proxies 5-tuple, sft 3-tuple) or ModelRecord."""
    records = []
    for row in rows:
        if isinstance(row, ModelRecord):
            records.append(row)
        else:
            model_id, proxies, sft = row
            records.append(make_record(model_id, proxies, sft))
    return ModelSet(records=tuple(records))


@pytest.fixture
def tiny_set():
    """Three models with strictly ordered scores on every task."""
    return make_set(
        [
            (1, (0.2, 0.1, 50.0, 30.0, 10.0), (60.0, 40.0, 30.0)),
            (2, (0.3, 0.2, 55.0, 35.0, 15.0), (65.0, 45.0, 35.0)),
            (3, (0.4, 0.3, 60.0, 40.0, 20.0), (70.0, 50.0, 40.0)),
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
