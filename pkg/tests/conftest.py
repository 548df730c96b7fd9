import numpy as np
import pytest

from mphs.ph import build_ph_system


def lc_oscillator(R=None, with_input=False):
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    R = np.zeros((2, 2)) if R is None else np.asarray(R, dtype=float)
    B = np.array([[0.0], [1.0]]) if with_input else np.zeros((2, 0))
    return build_ph_system(
        2, B.shape[1], np.eye(2), lambda x: x, J, R, B,
        lambda x: 0.5 * float(x @ x), lambda x: x.copy(),
        effort_jacobian=np.eye(2), linear=True, name="lc",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
