import numpy as np
import pytest

from supobs.model import (
    ConfigurationError,
    InputComponent,
    InputSpec,
    PlantConfig,
    benchmark_plant,
    bounded_noise_sequence,
    pe_input,
)
from supobs.observer import (
    GainSchedule,
    ObserverBank,
    bank_step,
    observer_step,
    reinitialize_bank,
)

INPUT = InputSpec(
    components=(InputComponent(0.35, 1.0, 0.7), InputComponent(0.15, 2.7, 0.2)),
    budget=1.0,
)


def zero_schedule(n_x=2, n_y=2, n_phi=1):
    z = np.zeros((n_x, n_y))
    zk = np.zeros((n_phi, n_y))
    return GainSchedule(l0=z, l1=z, k0=zk, k1=zk)


class StubPlant:
    """Plant-family variant with a removable nonlinearity channel, for structure tests."""

    n_x, n_u, n_y, n_v, n_w, n_p, n_phi = 2, 1, 2, 1, 2, 1, 1

    def __init__(self, base: PlantConfig, zero_g=False):
        self.base = base
        self.zero_g = zero_g

    def a_matrix(self, p):
        return self.base.a_matrix(p)

    def g_matrix(self, p):
        if self.zero_g:
            return np.zeros((2, 1))
        return self.base.g_matrix(p)

    def b_matrix(self, p):
        return self.base.b_matrix(p)

    c_matrix = property(lambda self: self.base.c_matrix)
    h_matrix = property(lambda self: self.base.h_matrix)
    slope_matrix = property(lambda self: self.base.slope_matrix)


def test_zero_error_invariance(plant, certificate):
    # exact model, exact initialization, no noise: the observer shadows the plant
    system = benchmark_plant(plant)
    p = np.array([17.0])
    x = np.array([0.3, -0.2])
    x_hat = x.copy()
    for k in range(100):
        u = pe_input(INPUT, k)
        y = system.output(x, p, u, np.zeros(2))
        x_hat, y_hat = observer_step(x_hat, p, u, y, certificate.schedule, plant)
        x = system.step(x, p, u, np.zeros(1))
        np.testing.assert_array_equal(y_hat, y)
        np.testing.assert_array_equal(x_hat, x)


def test_zero_gains_zero_g_reduce_to_open_loop(plant):
    stub = StubPlant(plant, zero_g=True)
    schedule = zero_schedule()
    x_hat = np.array([1.0, -2.0])
    u = np.array([0.7])
    y = np.array([5.0, 5.0])  # ignored with zero gains
    p = 13.0
    x_next, y_hat = observer_step(x_hat, p, u, y, schedule, stub)
    np.testing.assert_array_equal(x_next, plant.a_matrix(p) @ x_hat + plant.b_matrix(p) @ u)
    np.testing.assert_array_equal(y_hat, x_hat)


def test_bank_of_one_matches_observer_step(plant, certificate):
    x0 = np.array([0.4, 0.1])
    bank = ObserverBank(states=x0[None, :], parameters=np.array([[9.0]]), schedule=certificate.schedule)
    u = np.array([0.2])
    y = np.array([0.5, -0.5])
    stepped, errors = bank_step(bank, u, y, plant)
    x_ref, y_ref = observer_step(x0, np.array([9.0]), u, y, certificate.schedule, plant)
    np.testing.assert_array_equal(stepped.states[0], x_ref)
    np.testing.assert_array_equal(errors[0], y_ref - y)


def test_bank_permutation_equivariance(plant, certificate):
    rng = np.random.default_rng(5)
    states = rng.normal(size=(6, 2))
    params = rng.uniform(1.0, 50.0, size=(6, 1))
    u = np.array([0.3])
    y = rng.normal(size=2)
    perm = np.array([4, 2, 0, 5, 1, 3])
    bank = ObserverBank(states=states, parameters=params, schedule=certificate.schedule)
    permuted = ObserverBank(states=states[perm], parameters=params[perm], schedule=certificate.schedule)
    stepped, errors = bank_step(bank, u, y, plant)
    stepped_p, errors_p = bank_step(permuted, u, y, plant)
    np.testing.assert_array_equal(stepped.states[perm], stepped_p.states)
    np.testing.assert_array_equal(errors[perm], errors_p)


def test_bank_step_matches_naive_loop(plant, certificate):
    rng = np.random.default_rng(17)
    states = rng.normal(size=(8, 2))
    params = rng.uniform(1.0, 50.0, size=(8, 1))
    bank = ObserverBank(states=states, parameters=params, schedule=certificate.schedule)
    u = np.array([-0.4])
    y = rng.normal(size=2)
    stepped, errors = bank_step(bank, u, y, plant)
    for i in range(8):
        x_ref, y_ref = observer_step(states[i], params[i], u, y, certificate.schedule, plant)
        np.testing.assert_array_equal(stepped.states[i], x_ref)
        np.testing.assert_array_equal(errors[i], y_ref - y)


def test_reinitialize_bank(plant, certificate):
    rng = np.random.default_rng(23)
    states = rng.normal(size=(5, 2))
    params = rng.uniform(1.0, 50.0, size=(5, 1))
    bank = ObserverBank(states=states, parameters=params, schedule=certificate.schedule)
    new_params = rng.uniform(10.0, 20.0, size=(5, 1))
    fresh = reinitialize_bank(bank, new_params, carry_state_from=3)
    np.testing.assert_array_equal(fresh.parameters, new_params)
    for row in fresh.states:
        np.testing.assert_array_equal(row, states[2])
    with pytest.raises(ValueError):
        reinitialize_bank(bank, new_params, carry_state_from=0)
    with pytest.raises(ValueError):
        reinitialize_bank(bank, new_params[:3], carry_state_from=1)


def test_matched_observer_decays(plant, certificate):
    system = benchmark_plant(plant)
    p = np.array([20.0])
    x = np.zeros(2)
    x_hat = x + np.array([0.6, 0.8])
    big_p = certificate.p_matrix
    values = []
    norms = []
    for k in range(400):
        err = x_hat - x
        values.append(float(err @ big_p @ err))
        norms.append(float(np.linalg.norm(err)))
        u = pe_input(INPUT, k)
        y = system.output(x, p, u, np.zeros(2))
        x_hat, _ = observer_step(x_hat, p, u, y, certificate.schedule, plant)
        x = system.step(x, p, u, np.zeros(1))
    values = np.array(values)
    norms = np.array(norms)
    assert norms[0] == pytest.approx(1.0, abs=1e-12)
    assert norms.min() < 1e-6
    assert np.all(np.diff(values) <= 0.0)


def test_matched_observer_stays_bounded_under_noise(plant, certificate):
    # dissipation bound: V+ <= V - kx ||e||^2 + kv ||v||^2 + kw ||w||^2,
    # so V can never exceed max(V0, lmax(P)/kx * (kv dv^2 + kw dw^2)).
    system = benchmark_plant(plant)
    p = np.array([20.0])
    delta = 0.01
    v_seq = bounded_noise_sequence(delta, 2000, 1, seed=1)
    w_seq = bounded_noise_sequence(delta, 2000, 2, seed=2)
    big_p = certificate.p_matrix
    eigs = np.linalg.eigvalsh(big_p)
    supply = certificate.kappa_v * delta**2 + certificate.kappa_w * delta**2
    v_cap = max(float(np.array([0.6, 0.8]) @ big_p @ np.array([0.6, 0.8])),
                eigs[-1] / certificate.kappa_x * supply)
    bound = np.sqrt(v_cap / eigs[0]) * 1.01
    x = np.zeros(2)
    x_hat = x + np.array([0.6, 0.8])
    for k in range(2000):
        err = x_hat - x
        assert np.linalg.norm(err) <= bound
        u = pe_input(INPUT, k)
        y = system.output(x, p, u, w_seq[k])
        x_hat, _ = observer_step(x_hat, p, u, y, certificate.schedule, plant)
        x = system.step(x, p, u, v_seq[k])


def test_gain_schedule_validation():
    with pytest.raises(ConfigurationError):
        GainSchedule(l0=np.zeros((2, 2)), l1=np.zeros((2, 1)), k0=np.zeros((1, 2)), k1=np.zeros((1, 2)))
    with pytest.raises(ConfigurationError):
        GainSchedule(l0=np.full((2, 2), np.nan), l1=np.zeros((2, 2)), k0=np.zeros((1, 2)), k1=np.zeros((1, 2)))
    sched = GainSchedule(l0=np.eye(2), l1=2 * np.eye(2), k0=np.ones((1, 2)), k1=np.zeros((1, 2)))
    np.testing.assert_array_equal(sched.l_gain(3.0), np.eye(2) * 7.0)
    np.testing.assert_array_equal(sched.k_gain(3.0), np.ones((1, 2)))
