import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dclust.config import ScenarioConfig
from d2dclust.scenario import (FTP, MACRO, SMALL, VOIP, Bounds, DeploymentError, TrafficProfile, UserSet,
                               deploy, scenario_bounds, step_mobility)


def test_default_deployment_layout():
    bss, users = deploy(ScenarioConfig())
    macros = [b for b in bss if b.kind == MACRO]
    smalls = [b for b in bss if b.kind == SMALL]
    assert len(macros) == 7 and len(smalls) == 28
    assert macros[0].position == (0.0, 0.0)
    for b in macros[1:]:
        assert math.hypot(*b.position) == pytest.approx(500.0)
    assert len(users) == 7 * 60


def test_table_one_bs_figures():
    bss, _ = deploy(ScenarioConfig(users_per_macro_area=0))
    for b in bss:
        if b.kind == MACRO:
            assert (b.max_tx_power, b.bandwidth, b.prb_budget_dl, b.prb_budget_ul) == (46.0, 10.0, 50, 50)
        else:
            assert (b.max_tx_power, b.bandwidth, b.prb_budget_dl, b.prb_budget_ul) == (27.0, 5.0, 25, 25)
    assert {b.band_id for b in bss if b.kind == MACRO}.isdisjoint({b.band_id for b in bss if b.kind == SMALL})


def test_no_small_cells():
    bss, _ = deploy(ScenarioConfig(small_cells_per_macro=0))
    assert [b.kind for b in bss] == [MACRO] * 7


def test_same_seed_is_bitwise_identical():
    a_b, a_u = deploy(ScenarioConfig(rng_seed=9))
    b_b, b_u = deploy(ScenarioConfig(rng_seed=9))
    assert a_b == b_b
    for f in ("x", "y", "heading", "speed", "rate_dl", "alpha"):
        assert np.array_equal(getattr(a_u, f), getattr(b_u, f))
    c_b, _ = deploy(ScenarioConfig(rng_seed=10))
    assert c_b != a_b


def test_traffic_mix():
    _, u = deploy(ScenarioConfig())
    voip = u.kind == VOIP
    assert voip.mean() == pytest.approx(0.5)
    assert np.all(u.rate_dl[voip] == 64e3) and np.all(u.alpha[voip] == 1.0)
    assert np.all(u.rate_dl[u.kind == FTP] == 700e3) and np.all(u.alpha[u.kind == FTP] == 0.05)
    assert np.array_equal(u.rate_ul, u.alpha * u.rate_dl)


def test_small_cell_distances():
    cfg = ScenarioConfig()
    for seed in range(5):
        bss, _ = deploy(ScenarioConfig(rng_seed=seed))
        for m in range(cfg.num_macro):
            sc = [np.array(b.position) for b in bss if b.kind == SMALL and b.macro_id == m]
            for p in sc:
                assert np.hypot(*(p - np.array(bss[m].position))) >= 125.0
            for i in range(len(sc)):
                for j in range(i + 1, len(sc)):
                    assert np.hypot(*(sc[i] - sc[j])) >= 25.0


def test_degenerate_config_raises():
    with pytest.raises(DeploymentError):
        deploy(ScenarioConfig(min_enb_sc_distance=400.0))


def test_traffic_profile_validation():
    assert TrafficProfile(700e3, 0.05).rate_ul == pytest.approx(35e3)
    with pytest.raises(ValueError):
        TrafficProfile(1.0, 1.5)


def _one_user(x, y, heading, speed):
    return UserSet.from_arrays([[x, y]], 1.0, 0.0, heading=[heading], speed=speed)


def test_mobility_displacement():
    u = _one_user(0.0, 0.0, 0.3, 3.0 / 3.6)
    b = Bounds(-100, 100, -100, 100)
    v = step_mobility(u, 1.0, b, np.random.default_rng(0))
    d = math.hypot(v.x[0], v.y[0])
    assert d == pytest.approx(3000 / 3600)
    assert math.atan2(v.y[0], v.x[0]) == pytest.approx(0.3)


def test_zero_speed_stays_put():
    u = _one_user(5.0, -3.0, 1.0, 0.0)
    v = step_mobility(u, 1.0, Bounds(-10, 10, -10, 10), np.random.default_rng(0))
    assert (v.x[0], v.y[0]) == (5.0, -3.0)


def test_bounce_near_edge():
    b = Bounds(-10, 10, -10, 10)
    u = _one_user(9.9, 0.0, 0.0, 1.0)
    v = step_mobility(u, 1.0, b, np.random.default_rng(0))
    assert b.contains(v.x, v.y)[0]
    assert math.cos(v.heading[0]) < 0  # points back inward


def test_hundred_thousand_steps_stay_inside():
    rng = np.random.default_rng(5)
    b = Bounds(-5, 5, -5, 5)
    n = 200
    u = UserSet.from_arrays(rng.uniform(-5, 5, (n, 2)) * 0.99, 1.0, 0.0,
                            heading=rng.uniform(0, 2 * np.pi, n), speed=rng.uniform(0, 20, n))
    for _ in range(500):  # 200 users x 500 steps = 1e5 user-steps
        u = step_mobility(u, 1.0, b, rng)
        assert np.all(b.contains(u.x, u.y))
    assert len(u) == n


@given(st.floats(-9.99, 9.99), st.floats(-9.99, 9.99), st.floats(0, 2 * np.pi), st.floats(0, 50),
       st.integers(0, 2**32 - 1))
def test_mobility_property_inside_and_speed_kept(x, y, h, s, seed):
    b = Bounds(-10, 10, -10, 10)
    u = _one_user(x, y, h, s)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        u = step_mobility(u, 1.0, b, rng)
        assert b.contains(u.x, u.y)[0]
        assert u.speed[0] == s


def test_bounds_enclose_layout_with_margin():
    b = scenario_bounds(ScenarioConfig())
    assert b.xmin < -500 and b.xmax > 500
    _, u = deploy(ScenarioConfig())
    assert np.all(b.contains(u.x, u.y))
