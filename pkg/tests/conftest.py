from __future__ import annotations

import numpy as np
import pytest

from causalchannels import (
    compile_circuit,
    pq_steering_alpha_channel,
    pq_steering_pr_channel,
    pr_box_channel,
    singlet_tsirelson_channel,
)


@pytest.fixture(scope="session")
def pr_channel():
    return compile_circuit(pr_box_channel())


@pytest.fixture(scope="session")
def singlet_channel():
    return compile_circuit(singlet_tsirelson_channel())


@pytest.fixture(scope="session")
def pq_pr_channel():
    return compile_circuit(pq_steering_pr_channel())


@pytest.fixture(scope="session")
def pq_alpha_channel():
    return compile_circuit(pq_steering_alpha_channel(1.0 / 6.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pr_table() -> np.ndarray:
    table = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            for a in range(2):
                table[a, a ^ (x & y), x, y] = 0.5
    return table
