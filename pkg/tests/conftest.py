import pytest

from randrk.core import make_problem
from randrk.experiments import convergence_study

N_LIST = [100 * 2**k for k in range(8)]
REPS = 500


@pytest.fixture(scope="session")
def sir_noiseless():
    return convergence_study(make_problem("sir"), "rrk2", N_LIST, M=REPS)


@pytest.fixture(scope="session")
def example1_tables():
    """Noiseless tables for example1, keyed by ``(gamma, scheme)``.

    Euler draws nothing random, so one replicate gives its exact error.
    """
    out = {}
    for gamma in (2.0, 10.0):
        p = make_problem("example1", gamma=gamma)
        out[gamma, "rrk2"] = convergence_study(p, "rrk2", N_LIST, M=REPS)
        out[gamma, "euler"] = convergence_study(p, "euler", N_LIST, M=1)
    return out
