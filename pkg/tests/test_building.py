import numpy as np
import pytest

from loadshift.building import augment, lift, lift_matrices, per_room_views
from loadshift.thermal import Comfort, DisturbanceProfile, HvacParams, build_room_model, default_thermal_params
from oracles import step_recursion

ROOM = build_room_model(HvacParams(), default_thermal_params(), Comfort.room_band(20.0, 23.0))


def test_block_diagonal_structure():
    b = augment(ROOM, 2, 3, rng_seed=4)
    assert b.n_br == 6
    assert b.A_b.shape == (30, 30)
    for i in range(6):
        for j in range(6):
            block = b.A_b[5 * i:5 * i + 5, 5 * j:5 * j + 5]
            expected = ROOM.A if i == j else np.zeros((5, 5))
            np.testing.assert_array_equal(block, expected)
    assert b.B_b.shape == (30, 6)


def test_multipliers_seeded_and_in_range():
    a = augment(ROOM, 4, 5, rng_seed=11)
    b = augment(ROOM, 4, 5, rng_seed=11)
    c = augment(ROOM, 4, 5, rng_seed=12)
    np.testing.assert_array_equal(a.disturbance_multipliers, b.disturbance_multipliers)
    assert not np.array_equal(a.disturbance_multipliers, c.disturbance_multipliers)
    m = a.disturbance_multipliers
    assert m[0] == 1.0
    assert np.all((m >= 0.5) & (m <= 1.5))
    assert a.rng_algorithm == "numpy.random.PCG64"


def test_participation_zeroes_reserve_columns():
    b = augment(ROOM, 3, 2, participation_mask=[1, 0, 1])
    np.testing.assert_array_equal(b.room_participates, [1, 1, 0, 0, 1, 1])
    np.testing.assert_array_equal(b.B_r[:, 2:4], 0.0)
    np.testing.assert_array_equal(b.B_r[:, :2], b.B_b[:, :2])


@pytest.mark.parametrize("args", [(0, 2), (2, 0)])
def test_empty_building_rejected(args):
    with pytest.raises(ValueError):
        augment(ROOM, *args)


def test_bad_mask_rejected():
    with pytest.raises(ValueError):
        augment(ROOM, 2, 2, participation_mask=[1, 0, 1])


def test_lifted_prediction_matches_recursion():
    rng = np.random.default_rng(0)
    b = augment(ROOM, 1, 3, rng_seed=2, participation_mask=[1])
    N = 5
    L = lift(b, N)
    for _ in range(50):
        x0 = rng.uniform(15, 25, b.A_b.shape[0])
        u = rng.uniform(0, 0.2, (N, 3))
        d = rng.uniform(-200, 600, (N, b.E_b.shape[1]))
        r = rng.uniform(0, 0.1, (N, 3))
        ref = step_recursion(b.A_b, b.B_b, b.E_b, b.B_r, x0, u, d, r)
        np.testing.assert_allclose(L.predict(x0, u, d, r), ref, rtol=0, atol=1e-10)


def test_lift_first_block_row():
    A = np.array([[0.5, 0.1], [0.0, 0.9]])
    B = np.array([[1.0], [2.0]])
    L = lift_matrices(A, B, np.eye(2), B, 3)
    np.testing.assert_array_equal(L.Phi_x0[:2], A)
    np.testing.assert_array_equal(L.Phi_u[:2, 1:], 0.0)  # causality
    np.testing.assert_allclose(L.Phi_u[4:6, 0:1], A @ A @ B)
    with pytest.raises(ValueError):
        lift_matrices(A, B, np.eye(2), B, 0)


def test_building_disturbance_scaling():
    b = augment(ROOM, 1, 2, rng_seed=3)
    prof = DisturbanceProfile(np.full(4, 5.0), np.full((4, 4), 100.0), np.full(4, 200.0))
    d = b.building_disturbance(prof)
    assert d.shape == (4, 10)
    np.testing.assert_allclose(d[:, :5], ROOM.disturbance_inputs(prof))
    np.testing.assert_allclose(d[:, 5:], ROOM.disturbance_inputs(prof.scaled(b.disturbance_multipliers[1])))


def test_room_views():
    b = augment(ROOM, 2, 2, rng_seed=5, participation_mask=[0, 1])
    prof = DisturbanceProfile(np.zeros(2), np.ones((2, 4)), np.ones(2))
    views = per_room_views(b, prof)
    assert [v.floor for v in views] == [0, 0, 1, 1]
    assert [v.participates for v in views] == [False, False, True, True]
    assert views[0].disturbance is prof
    np.testing.assert_allclose(views[3].disturbance.solar, b.disturbance_multipliers[3])
