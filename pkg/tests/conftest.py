import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from charp_hodge.poly import Poly, monomials_upto

settings.register_profile(
    "charp",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("charp")

PRIMES = (2, 3, 5, 7)


@st.composite
def polys(draw, p, ring=("s", "t"), max_deg=3, max_terms=4):
    monos = monomials_upto(len(ring), max_deg)
    terms = draw(
        st.dictionaries(st.sampled_from(monos), st.integers(1, p - 1), max_size=max_terms)
    )
    return Poly(p, ring, terms)


@pytest.fixture
def rng():
    return random.Random(20261015)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
