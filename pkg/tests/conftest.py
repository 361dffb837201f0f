import pytest

from graphfl.config import config_from_string

TINY = """
[run]
rounds = 3
seed = {seed}

[graph]
num_devices = 6
num_rooms = 2
devices_per_room = 2, 4

[data]
per_class = 200
train_per_device = 60
local_test_per_device = 20
global_test_size = 20

[model]
hidden = 16
"""


def tiny_config(seed: int = 0, extra: str = ""):
    return config_from_string(TINY.format(seed=seed) + extra)


@pytest.fixture
def tiny():
    return tiny_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
