import dataclasses

import pytest

from ctxrerank.datasim import SynthConfig, feature_schema, simulate
from ctxrerank.train import TrainConfig

TINY_SYNTH = SynthConfig(num_users=120, num_items=40, num_categories=4, m=5, n_max=6,
                         sessions_per_user=3, warmup_sessions=3)
TINY_TRAIN = TrainConfig(embed_dim=3, hidden=6, d=4, d_h=4, n_max=6, max_epochs=3,
                         batch_size=32, ks=(3, 5), ranker_hidden=6)


@pytest.fixture(scope="session")
def tiny_data():
    data = simulate(TINY_SYNTH)
    return feature_schema(TINY_SYNTH), {k: [r for r, _ in v] for k, v in data.items()}


@pytest.fixture
def tiny_config():
    return dataclasses.replace(TINY_TRAIN)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
