import numpy as np

from pgcore import coretest as ct
from pgcore.groundtruth import GridSpec
from pgcore.families import random_economy
from pgcore.verify import (
    approx_config,
    candidate_points,
    certified_instances,
    compare,
    frontier_point,
    instance_suite,
    run_suite,
    welfare_point,
)


def test_compare_half_point(quad2):
    c = compare(quad2, [0.5, 0.5], grid=GridSpec(21))
    assert c.verdict.status == ct.NOT_PARETO
    assert c.algorithm_strength > 0.1
    assert c.agreement is True
    assert c.to_dict()["characterization"]["status"] == "PASS"


def test_compare_corner(quad2):
    c = compare(quad2, [1, 1], grid=GridSpec(21))
    assert c.algorithm_decided is True and c.agreement is True


def test_frontier_points_improve_reference():
    o = random_economy("logagg", 3, 1)
    r = np.array([0.2, 0.3, 0.1])
    x = frontier_point(o, r)
    assert np.all(o(x) >= o(r) - 1e-9)
    assert ct.pareto_preprocess(o, x).efficient


def test_welfare_point_is_efficient():
    o = random_economy("quadratic", 2, 3)
    x = welfare_point(o, [0.9, 0.1])
    assert ct.pareto_preprocess(o, x).efficient


def test_candidates_stay_in_box():
    o = random_economy("affine", 3, 0)
    pts = candidate_points(o, np.random.default_rng(0), 5)
    assert len(pts) == 5
    assert all(np.all((p >= 0) & (p <= 1)) for p in pts)


def test_suite_is_deterministic_and_mixed():
    a = instance_suite(6, 5)
    b = instance_suite(6, 5)
    assert len(a) == 30
    assert all(np.array_equal(x.point, y.point) for x, y in zip(a, b))
    assert {i.family for i in a} == {"affine", "quadratic", "logagg"}
    assert {i.n for i in a} == {2, 3}


def test_small_suite_agrees():
    r = run_suite(instance_suite(3, 5))
    assert r.total == 15 and not r.disagreed and not r.char_fail
    assert r.agreed + r.skipped == r.total


def test_certified_instances():
    dev = certified_instances("deviation", 2, 0.02)
    assert len(dev) == 2
    core = certified_instances("core", 2, 0.02)
    for i in core:
        cfg = approx_config(i.oracle, 0.01)
        assert ct.test_core_membership(i.oracle, i.point, cfg).status == ct.IN_CORE
