import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from d2dclust.config import PowerModel, RadioConfig
from d2dclust.radio import (build_cost_table, cost_from_tbs, path_loss, sinr, tbs, ul_power_dbm,
                            write_links_csv)
from d2dclust.association import associate_rsrp
from d2dclust.radio import bs_gains_db
from d2dclust.scenario import MACRO, BaseStation, UserSet

UNIT = RadioConfig(attenuation_factor=1.0)


@pytest.mark.parametrize("kind,d,want", [("macro", 500.0, 128.1 + 37.6 * math.log10(0.5)),
                                         ("macro", 1000.0, 128.1), ("d2d", 100.0, 108.0),
                                         ("small", 250.0, 140.7 + 36.7 * math.log10(0.25))])
def test_path_loss(kind, d, want):
    assert path_loss(kind, d) == pytest.approx(want, abs=1e-12)
    assert path_loss(kind, d) == pytest.approx(oracles.path_loss_db(kind, d), abs=1e-12)


def test_path_loss_values_and_clamp():
    assert path_loss("macro", 500.0) == pytest.approx(116.78, abs=0.01)
    assert path_loss("macro", 0.2) == path_loss("macro", 1.0)
    with pytest.raises(ValueError):
        path_loss("macro", 0.0)
    with pytest.raises(ValueError):
        path_loss("d2d", -3.0)


def test_sinr_examples():
    assert sinr(-90, 0, [], -120) == pytest.approx(1000.0)
    assert sinr(-90, 0, [(-90, 0)], -300) == pytest.approx(1.0)
    g = sinr(-90, 0, [(-100, 0)], -120)
    assert 10 * math.log10(g) == pytest.approx(9.96, abs=0.005)
    assert g == pytest.approx(1e-9 / (1e-12 + 1e-10))


def test_tbs_examples():
    assert tbs(3.0, UNIT) == pytest.approx(360.0)
    assert tbs(10 ** (-1.1), UNIT) == 0.0
    cap = 10 ** (UNIT.sinr_cap / 10)
    assert tbs(cap * 50, UNIT) == tbs(cap, UNIT)


def test_cost_examples():
    assert cost_from_tbs(360.0, 1e-3) == pytest.approx(2.78e-6, rel=1e-3)
    assert cost_from_tbs(360.0, 1e-3) == 1e-3 / 360.0
    assert cost_from_tbs(0.0, 1e-3) == math.inf


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_tbs_monotone(a, b):
    lo, hi = sorted((a, b))
    assert tbs(lo, RadioConfig()) <= tbs(hi, RadioConfig())
    assert cost_from_tbs(tbs(lo, RadioConfig()), 1e-3) >= cost_from_tbs(tbs(hi, RadioConfig()), 1e-3)


def _scenario(positions, bs_pos=((0.0, 0.0),)):
    bss = [BaseStation.make(k, MACRO, p, k) for k, p in enumerate(bs_pos)]
    users = UserSet.from_arrays(positions, 700e3, 0.05)
    g = bs_gains_db(bss, users)
    base = associate_rsrp(bss, g)
    return bss, users, build_cost_table(bss, users, RadioConfig(), PowerModel(), base.serving, None, g)


def test_colocated_user_hits_the_cap():
    cfg = RadioConfig()
    _, _, t = _scenario([[0.0, 0.0], [0.5, 0.0]])
    capped = cfg.subframe / tbs(10 ** (cfg.sinr_cap / 10), cfg)
    assert t.phi_dl[0, 0] == pytest.approx(capped, rel=1e-15)
    assert t.phi_dl[0, 1] == t.phi_dl[0, 0]


def test_phi_times_eta_is_subframe():
    rng = np.random.default_rng(3)
    _, _, t = _scenario(rng.uniform(-600, 600, (30, 2)), ((0, 0), (500, 0), (-250, 430)))
    for phi, eta in ((t.phi_dl, t.eta_dl), (t.phi_ul, t.eta_ul), (t.d2d_up, t.eta_up), (t.d2d_down, t.eta_down)):
        fin = np.isfinite(phi)
        assert fin.any()
        assert np.allclose(phi[fin] * eta[fin], 1e-3, rtol=1e-15, atol=0)
        assert np.all(phi[fin] > 0)


def test_d2d_pruned_beyond_range():
    _, _, t = _scenario([[0.0, 0.0], [5.0, 0.0], [3000.0, 0.0]])
    assert np.isfinite(t.d2d_up[0, 1]) and np.isfinite(t.d2d_down[1, 0])
    assert not np.isfinite(t.d2d_up[0, 2]) and not np.isfinite(t.d2d_down[2, 0])
    assert not np.isfinite(t.d2d_up[0, 0])


def test_uplink_power_control_capped():
    cfg, pm = RadioConfig(), PowerModel()
    assert ul_power_dbm(-100.0, pm, cfg) == pytest.approx(-78 + 80)
    assert ul_power_dbm(-200.0, pm, cfg) == cfg.ue_max_power


def test_interference_lowers_sinr():
    _, _, alone = _scenario([[200.0, 0.0]])
    _, _, two = _scenario([[200.0, 0.0]], ((0, 0), (500, 0)))
    assert two.sinr_dl_db[0, 0] < alone.sinr_dl_db[0, 0]


def test_activity_scaled_interference():
    bss = [BaseStation.make(k, MACRO, p, k) for k, p in enumerate(((0, 0), (500, 0)))]
    users = UserSet.from_arrays([[200.0, 0.0], [300.0, 0.0]], 700e3, 0.05)
    g = bs_gains_db(bss, users)
    base = associate_rsrp(bss, g)
    cfg = RadioConfig(interference_mode="activity_scaled")
    full = build_cost_table(bss, users, cfg, PowerModel(), base.serving, None, g)
    half = build_cost_table(bss, users, cfg, PowerModel(), base.serving, (np.full(2, 0.5), np.full(2, 0.5)), g)
    assert np.all(half.sinr_dl_db >= full.sinr_dl_db)
    assert half.sinr_dl_db[0, 0] > full.sinr_dl_db[0, 0]


def test_dump_links_csv(tmp_path):
    _, _, t = _scenario([[10.0, 0.0], [20.0, 0.0]])
    p = tmp_path / "links.csv"
    n = write_links_csv(t, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "src,dst,band,gain_db,sinr_db,eta_bits,phi"
    assert len(lines) == n + 1 == 1 + 4 + 4
