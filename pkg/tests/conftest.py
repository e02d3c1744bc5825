import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from qmetro.channels import ChannelFamily

settings.register_profile("qmetro", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("qmetro")


def random_direction(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_unital_channel(rng):
    """One of flip / depolarizing / unitary with random parameters."""
    kind = rng.integers(3)
    if kind == 0:
        return ChannelFamily.flip(rng.uniform(0, 1), random_direction(rng))
    if kind == 1:
        return ChannelFamily.depolarizing(rng.uniform(0, 1))
    return ChannelFamily.unitary(rng.uniform(-np.pi, np.pi), random_direction(rng))


def random_probe(rng):
    kind = rng.integers(4)
    if kind == 0:
        return ChannelFamily.phase_shift(rng.uniform(-np.pi, np.pi))
    if kind == 1:
        return ChannelFamily.flip(rng.uniform(0.05, 0.95), random_direction(rng))
    if kind == 2:
        return ChannelFamily.depolarizing(rng.uniform(0.05, 0.95))
    return ChannelFamily.unitary(rng.uniform(-np.pi, np.pi), random_direction(rng))


directions = (
    st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)
    .map(np.array)
    .filter(lambda v: np.linalg.norm(v) > 0.1)
    .map(lambda v: v / np.linalg.norm(v))
)

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance reporting -------------------------------------------------------

CRITERIA: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        title, ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num} {title}: {'PASS' if ok else 'FAIL'}  {detail}")
