import numpy as np
import pytest

from wrongway.portfolio import Counterparty, ExposureMatrix
from wrongway._prob import uniform


@pytest.fixture
def rng():
    return np.random.default_rng(20140501)


@pytest.fixture
def tiny_portfolio():
    ids = ("A", "B", "C")
    y = np.array([[1.0, 4.0, 2.0, 8.0],
                  [3.0, 0.0, 1.0, 2.0],
                  [0.5, 0.5, 6.0, 1.0]])
    x = ExposureMatrix(ids, y, uniform(4))
    cps = [Counterparty("A", 0.02, 0.2, 0.6), Counterparty("B", 0.05, 0.15, 0.45),
           Counterparty("C", 0.01, 0.25, 1.0)]
    return x, cps
