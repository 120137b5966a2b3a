import itertools

import numpy as np
import pytest
from scipy.linalg import block_diag

from dynamics import (
    ActionSpace,
    CarrierState,
    TargetModel,
    TargetState,
    apply_action,
    chain_sampler,
    feasible_actions,
    join_models,
    propagate,
    reachable_offsets,
    step_target,
)
from utils.errors import ConfigurationError, ContractViolation


def make_model(T=60.0, sigma_eps=0.0, depth=300.0, mu0=(0, 0, 0, 0), Sigma0=None):
    return TargetModel(
        T=T,
        sigma_eps=sigma_eps,
        mu0=np.array(mu0, dtype=float),
        Sigma0=np.zeros((4, 4)) if Sigma0 is None else Sigma0,
        depth=depth,
    )


def test_step_target_zero_noise():
    model = make_model(T=60.0)
    state = step_target(model, TargetState(w=np.array([0.0, 5.0, 0.0, 0.0]), depth=300.0), [0.0, 0.0])
    np.testing.assert_allclose(state.w, [300.0, 5.0, 0.0, 0.0])
    assert state.depth == 300.0


def test_step_target_unit_impulse():
    model = make_model(T=2.0, sigma_eps=1.0)
    state = step_target(model, TargetState(w=np.zeros(4), depth=100.0), [1.0, 0.0])
    np.testing.assert_allclose(state.w, [2.0, 2.0, 0.0, 0.0])


def test_position_increment_variance():
    T, sigma = 10.0, 0.3
    model = make_model(T=T, sigma_eps=sigma)
    rng = np.random.default_rng(1)
    noise = rng.standard_normal((100000, 2)) * sigma
    w_next = propagate(model.F, model.K, np.zeros((100000, 4)), noise)
    expected = (T * T / 2.0) ** 2 * sigma ** 2
    assert np.var(w_next[:, 0]) == pytest.approx(expected, rel=0.05)


def test_zero_noise_map_is_linear():
    model = make_model(T=30.0)
    rng = np.random.default_rng(3)
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    F = model.F
    np.testing.assert_allclose(F @ (w1 + w2), F @ w1 + F @ w2)


def test_target_model_validation():
    with pytest.raises(ConfigurationError):
        make_model(T=0.0)
    with pytest.raises(ConfigurationError):
        make_model(sigma_eps=-1.0)
    with pytest.raises(ConfigurationError):
        make_model(Sigma0=-np.eye(4))


def test_joint_model_is_block_diagonal():
    m1 = make_model(sigma_eps=0.1, Sigma0=np.eye(4))
    m2 = make_model(sigma_eps=0.2, Sigma0=2.0 * np.eye(4), depth=500.0)
    joint = join_models(m1, m2)
    np.testing.assert_array_equal(joint.F, block_diag(m1.F, m2.F))
    np.testing.assert_array_equal(joint.K, block_diag(m1.K, m2.K))
    np.testing.assert_array_equal(joint.Sigma0, block_diag(m1.Sigma0, m2.Sigma0))
    assert joint.depths == (300.0, 500.0)

    rng = np.random.default_rng(5)
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    n1, n2 = rng.normal(size=2), rng.normal(size=2)
    stacked = propagate(joint.F, joint.K, np.concatenate([w1, w2]), np.concatenate([n1, n2]))
    np.testing.assert_allclose(stacked[:4], propagate(m1.F, m1.K, w1, n1))
    np.testing.assert_allclose(stacked[4:], propagate(m2.F, m2.K, w2, n2))


def test_join_models_rejects_mismatched_steps():
    with pytest.raises(ConfigurationError):
        join_models(make_model(T=60.0), make_model(T=30.0))
    with pytest.raises(ConfigurationError):
        join_models(make_model())


def test_joint_cross_covariance_vanishes():
    m1 = make_model(T=10.0, sigma_eps=0.5, Sigma0=np.eye(4))
    m2 = make_model(T=10.0, sigma_eps=0.5, Sigma0=np.eye(4))
    paths = chain_sampler(join_models(m1, m2)).sample(100000, 3, np.random.default_rng(11))
    final = paths[:, -1]
    cross = np.cov(final.T)[:4, 4:]
    scale = np.sqrt(np.outer(np.var(final[:, :4], axis=0), np.var(final[:, 4:], axis=0)))
    assert np.all(np.abs(cross / scale) < 0.02)


def test_feasible_actions_near_surface():
    space = ActionSpace(deltas=(100.0, 100.0, 100.0), ranges=(0, 0, 1), depth_bounds=(0.0, 1000.0))
    actions = feasible_actions(space, CarrierState(0.0, 0.0, 50.0))
    assert actions == [(0.0, 0.0, 0.0), (0.0, 0.0, 100.0)]


def test_feasible_actions_interior_and_order():
    space = ActionSpace(deltas=(100.0, 100.0, 50.0), ranges=(1, 1, 1), depth_bounds=(0.0, 1000.0))
    actions = feasible_actions(space, CarrierState(0.0, 0.0, 500.0))
    assert len(actions) == 27 == space.cardinality
    assert actions == sorted(actions)
    assert actions[0] == (-100.0, -100.0, -50.0)


def test_feasible_counts_match_brute_force():
    space = ActionSpace(deltas=(1.0, 1.0, 1.0), ranges=(1, 1, 1), depth_bounds=(0.0, 4.0),
                        horizontal_bounds=((0.0, 4.0), (0.0, 4.0)))
    for x, y, z in itertools.product(range(5), repeat=3):
        expected = sum(
            1
            for a in itertools.product((-1, 0, 1), repeat=3)
            if 0 <= x + a[0] <= 4 and 0 <= y + a[1] <= 4 and 0 <= z + a[2] <= 4
        )
        assert len(feasible_actions(space, CarrierState(x, y, z))) == expected


def test_apply_action():
    space = ActionSpace(deltas=(500.0, 500.0, 100.0), ranges=(1, 1, 1), depth_bounds=(0.0, 1000.0))
    s = CarrierState(0.0, 0.0, 300.0)
    assert apply_action(s, (0.0, 0.0, 0.0), space) == s
    assert apply_action(s, (500.0, 0.0, -100.0), space) == CarrierState(500.0, 0.0, 200.0)
    with pytest.raises(ContractViolation):
        apply_action(s, (0.0, 0.0, -400.0), space)
    with pytest.raises(ContractViolation):
        apply_action(s, (250.0, 0.0, 0.0), space)


def test_reachable_grid_matches_box():
    space = ActionSpace(deltas=(10.0, 10.0, 10.0), ranges=(1, 2, 1), depth_bounds=(0.0, 1000.0))
    s0 = CarrierState(0.0, 0.0, 500.0)
    layers = reachable_offsets(space, s0, 3)
    for t, layer in enumerate(layers):
        box = sorted(itertools.product(*(range(-t * n, t * n + 1) for n in space.ranges)))
        assert layer == box

    # the layers are exactly what repeated feasible moves reach
    frontier = {s0}
    for t in range(1, 4):
        frontier = {apply_action(s, a, space) for s in frontier for a in feasible_actions(space, s)}
        assert len(frontier) == len(layers[t])


def test_sampler_shapes_and_determinism():
    model = make_model(T=60.0, sigma_eps=0.01, Sigma0=np.diag([1e6, 4.0, 1e6, 4.0]))
    sampler = chain_sampler(model)
    a = sampler.sample(50, 4, np.random.default_rng(9))
    b = sampler.sample(50, 4, np.random.default_rng(9))
    assert a.shape == (50, 5, 4)
    assert np.array_equal(a, b)
