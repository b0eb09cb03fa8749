import numpy as np
import pytest

from bincorr.constructions import cglmp_instance, rac_instance
from bincorr.qcore import haar_random_basis, haar_random_state
from bincorr.scenarios import Behavior, BellScenario, VisibilityFamily


@pytest.fixture(scope="session")
def cglmp2():
    return cglmp_instance(2)


@pytest.fixture(scope="session")
def cglmp3():
    return cglmp_instance(3)


@pytest.fixture(scope="session")
def rac3():
    return rac_instance(3)


def random_quantum_bell_family(seed, n_out=2, n_in=2, dim=2):
    """Random Born-rule Bell family against uniform noise."""
    from bincorr.qcore import born_bipartite

    ss = np.random.SeedSequence(seed).spawn(2 * n_in + 1)
    state = haar_random_state(dim * dim, 1, ss[0])
    meas_a = [haar_random_basis(dim, ss[1 + x]) for x in range(n_in)]
    meas_b = [haar_random_basis(dim, ss[1 + n_in + y]) for y in range(n_in)]
    quantum = born_bipartite(state, meas_a, meas_b)
    s = quantum.scenario
    noise = Behavior(s, np.full(s.shape, 1.0 / (s.outcomes_a * s.outcomes_b)))
    return VisibilityFamily(quantum, noise)


def random_quantum_pm_family(seed, n_prep=4, n_meas=2, dim=2):
    """Random Born-rule PM family against uniform noise."""
    from bincorr.qcore import born_prepare_measure

    ss = np.random.SeedSequence(seed).spawn(n_prep + n_meas)
    states = [haar_random_state(dim, 1, ss[i]) for i in range(n_prep)]
    meas = [haar_random_basis(dim, ss[n_prep + y]) for y in range(n_meas)]
    quantum = born_prepare_measure(states, meas)
    s = quantum.scenario
    noise = Behavior(s, np.full(s.shape, 1.0 / s.outcomes))
    return VisibilityFamily(quantum, noise)


def random_local_behavior(seed, scenario: BellScenario, n_mix=6):
    """Random convex mixture of deterministic product points (always local)."""
    rng = np.random.default_rng(seed)
    t = np.zeros(scenario.shape)
    w = rng.dirichlet(np.ones(n_mix))
    for k in range(n_mix):
        table = np.zeros(scenario.shape)
        fa = rng.integers(0, scenario.outcomes_a, scenario.inputs_a)
        fb = rng.integers(0, scenario.outcomes_b, scenario.inputs_b)
        for x in range(scenario.inputs_a):
            for y in range(scenario.inputs_b):
                table[fa[x], fb[y], x, y] = 1.0
        t += w[k] * table
    return Behavior(scenario, t)
