import numpy as np
import pytest

from d2dclust.association import AssociationState, associate_rsrp, rsrp, validate, write_association_csv
from d2dclust.radio import bs_gains_db, path_loss
from d2dclust.scenario import MACRO, SMALL, BaseStation, UserSet


def test_equidistant_tie_goes_to_lower_id():
    bss = [BaseStation.make(0, MACRO, (-100.0, 0.0), 0), BaseStation.make(1, MACRO, (100.0, 0.0), 1)]
    users = UserSet.from_arrays([[0.0, 0.0], [0.0, 50.0]], 1.0, 0.0)
    s = associate_rsrp(bss, bs_gains_db(bss, users))
    assert s.serving.tolist() == [0, 0]
    assert not s.y.any()


def test_small_cell_captures_nearby_user():
    bss = [BaseStation.make(0, MACRO, (0.0, 0.0), 0), BaseStation.make(1, SMALL, (390.0, 0.0), 0)]
    users = UserSet.from_arrays([[400.0, 0.0]], 1.0, 0.0)
    g = bs_gains_db(bss, users)
    r = rsrp(bss, g)[:, 0]
    assert r[1] == pytest.approx(27 - path_loss("small", 10.0))
    assert r[0] == pytest.approx(46 - path_loss("macro", 400.0))
    assert r[1] > r[0]
    assert associate_rsrp(bss, g).serving[0] == 1


def test_single_bs():
    bss = [BaseStation.make(0, MACRO, (0.0, 0.0), 0)]
    users = UserSet.from_arrays(np.random.default_rng(0).uniform(-400, 400, (20, 2)), 1.0, 0.0)
    assert np.all(associate_rsrp(bss, bs_gains_db(bss, users)).serving == 0)


def test_cre_bias_pushes_to_small_cell():
    bss = [BaseStation.make(0, MACRO, (0.0, 0.0), 0), BaseStation.make(1, SMALL, (300.0, 0.0), 0)]
    users = UserSet.from_arrays([[200.0, 0.0]], 1.0, 0.0)
    g = bs_gains_db(bss, users)
    assert associate_rsrp(bss, g).serving[0] == 0
    assert associate_rsrp(bss, g, cre_bias=30.0).serving[0] == 1


def test_validate_examples():
    x = np.array([[1, 0], [0, 1], [1, 0]])
    y = np.zeros((3, 3), int)
    assert validate(x, y) == []
    # user 1 a member of user 2, who is not BS-attached
    x2 = np.array([[1, 0], [0, 0], [0, 0]])
    y2 = np.zeros((3, 3), int)
    y2[1, 2] = 1
    y2[2, 0] = 1
    assert ("7e", 1, 2) in validate(x2, y2)
    # mutual membership
    x3 = np.array([[1, 0], [0, 0], [0, 0]])
    y3 = np.zeros((3, 3), int)
    y3[1, 2] = y3[2, 1] = 1
    labels = {v[0] for v in validate(x3, y3)}
    assert "7f" in labels
    y4 = np.zeros((3, 3), int)
    y4[0, 0] = 1
    assert ("7g", 0) in validate(np.array([[0, 0], [1, 0], [1, 0]]), y4)
    assert ("7b", 0) in validate(np.array([[1, 1], [1, 0]]), np.zeros((2, 2), int))
    assert ("7d",) in validate(np.zeros((2, 2), int), np.zeros((2, 2), int))
    assert any(v[0] == "7a" for v in validate(np.array([[2, 0]]), np.zeros((1, 1), int)))


def test_clusters_round_trip():
    s = AssociationState([0, -1, 1, -1, 1], [-1, 0, -1, 0, -1], 2)
    assert s.clusters == {0: [1, 3]}
    assert s.roles.tolist() == ["H", "M", "N", "M", "N"]
    assert s.cell().tolist() == [0, 0, 1, 0, 1]
    back = AssociationState.from_xy(s.x, s.y)
    assert np.array_equal(back.serving, s.serving) and np.array_equal(back.head, s.head)
    base = s.unclustered([0, 0, 1, 1, 1])
    assert base.with_clusters(s.clusters).clusters == s.clusters
    assert s.validate() == []


def test_from_xy_rejects_invalid():
    y = np.zeros((2, 2), int)
    y[0, 1] = y[1, 0] = 1
    with pytest.raises(ValueError):
        AssociationState.from_xy(np.zeros((2, 1), int), y)


def test_association_csv(tmp_path):
    s = AssociationState([0, -1, 1], [-1, 0, -1], 2)
    p = tmp_path / "a.csv"
    write_association_csv(s, p)
    assert p.read_text().splitlines() == ["user,serving_bs,role,cluster_id,head_id", "0,0,H,0,0", "1,0,M,0,0",
                                          "2,1,N,,"]
