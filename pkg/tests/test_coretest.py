import json

import numpy as np
import pytest

from pgcore import coretest as ct
from pgcore.config import SolverConfig
from pgcore.economy import UtilityOracle, evaluate
from pgcore.errors import InvalidEconomy, NoDescent
from pgcore.families import affine, logagg, random_economy
from pgcore.groundtruth import GridSpec, brute_force_core_test


def test_corner_of_symmetric_quadratic_is_in_core(quad2):
    v = ct.test_core_membership(quad2, [1, 1])
    assert v.status == ct.IN_CORE
    assert v.programs_solved + v.programs_skipped <= 2 + 2 * 2
    assert [e.agent for e in v.elimination_trace] == [0, 1]
    assert all(e.dichotomy_ok and e.descent_ok for e in v.elimination_trace)
    assert ct.check_certificate(quad2, v)


def test_half_point_is_not_pareto(quad2):
    v = ct.test_core_membership(quad2, [0.5, 0.5])
    assert v.status == ct.NOT_PARETO
    assert np.allclose(v.improving_direction, [0.5, 0.5], atol=1e-4)
    assert ct.check_certificate(quad2, v)


def test_pareto_preprocess_examples(quad2):
    half = ct.pareto_preprocess(quad2, [0.5, 0.5])
    assert not half.efficient
    assert half.up_value == pytest.approx(0.25, abs=1e-5)
    corner = ct.pareto_preprocess(quad2, [1, 1])
    assert corner.efficient
    assert corner.programs_skipped == 1  # nothing can move up from (1, 1)
    assert corner.down_value <= 1e-5
    interior = ct.pareto_preprocess(affine([[0.3, 0.7], [0.2, 0.8]]), [0.4, 0.6])
    assert not interior.efficient and np.all(interior.direction >= 0)


def test_least_valuable_agent_examples():
    assert ct.least_valuable_agent(np.array([1.0, 1.0]), np.array([-1.0, -2.0])) == 1
    assert ct.least_valuable_agent(np.array([0.0, 1.0]), np.array([-0.5, -0.5])) == 0
    assert ct.least_valuable_agent(np.array([0.3, 0.3]), np.array([-0.5, -0.5])) == 0
    with pytest.raises(NoDescent):
        ct.least_valuable_agent(np.array([0.3, 0.3]), np.array([0.5, 0.5]))


def test_lindahl_examples(quad2):
    corner = ct.lindahl_report(quad2, [1, 1])
    assert corner.is_lindahl and corner.direction == "-a"
    half = ct.lindahl_report(quad2, [0.5, 0.5])
    assert not half.is_lindahl
    assert np.allclose(half.derivative, [0.25, 0.25])
    assert ct.is_lindahl(quad2, [1, 1])
    with pytest.raises(ValueError):
        ct.lindahl_report(quad2, [0, 0])


def test_zero_outcome_in_core_when_production_does_not_pay():
    # d_v u_i(0) = (v_1 + v_2) - 3 v_i: no direction helps both agents
    o = logagg([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0], [3.0, 3.0])
    assert brute_force_core_test(o, [0, 0], GridSpec(41)).decided is True
    v = ct.test_core_membership(o, [0, 0])
    assert v.status == ct.IN_CORE
    assert all(e.ratio == 0.0 and e.v_star is None for e in v.elimination_trace)


def test_subcoalition_deviation_is_found():
    o = random_economy("logagg", 3, 41)
    v = ct.test_core_membership(o, [1, 1, 0])
    assert v.status == ct.DEVIATION_FOUND
    coalition, point = v.deviation
    assert coalition == (0, 1) and point[2] == 0.0
    gains = evaluate(o, point) - evaluate(o, [1, 1, 0])
    assert np.all(gains[[0, 1]] > 1e-5)
    assert ct.check_certificate(o, v)


def test_verdict_round_trip(quad2):
    for a in ([1, 1], [0.5, 0.5]):
        v = ct.test_core_membership(quad2, a)
        d = v.to_dict()
        back = ct.CoreVerdict.from_dict(json.loads(json.dumps(d)))
        assert back.to_dict() == d
    with pytest.raises(ValueError):
        ct.CoreVerdict.from_dict({**d, "schema": "v0"})


def test_determinism():
    o = random_economy("quadratic", 3, 2)
    a = [0.6, 0.4, 0.9]
    assert ct.test_core_membership(o, a).to_dict() == ct.test_core_membership(o, a).to_dict()


def test_invalid_economy_is_rejected():
    convex = UtilityOracle(n=2, func=lambda a: a ** 2 + 0.5 * a[::-1])
    with pytest.raises(InvalidEconomy):
        ct.test_core_membership(convex, [0.5, 0.5])


def test_tampered_certificate_fails(quad2):
    v = ct.test_core_membership(random_economy("logagg", 3, 41), [1, 1, 0])
    coalition, point = v.deviation
    v.deviation = (coalition, np.array([point[0], point[1], 0.3]))
    assert not ct.check_certificate(random_economy("logagg", 3, 41), v)


def approx(eps, kappa=1.2):
    return SolverConfig(mode="approx", eps_core=eps, kappa=kappa)


@pytest.mark.parametrize("eps", [0.05, 0.01])
def test_approx_corner_is_in_core(quad2, eps):
    v = ct.test_core_membership(quad2, [1, 1], approx(eps))
    assert v.status == ct.IN_CORE
    assert v.programs_solved + v.programs_skipped <= 2 * 2


def test_approx_finds_large_deviation(quad2):
    # the grand coalition gains 0.315 by moving (0.2, 0.2) -> (0.9, 0.9)
    v = ct.test_core_membership_approx(quad2, [0.2, 0.2], approx(0.01))
    assert v.status == ct.DEVIATION_FOUND
    assert ct.check_certificate(quad2, v)


def test_approx_is_vacuous_for_huge_eps(quad2):
    assert ct.test_core_membership(quad2, [0.2, 0.2], approx(10.0)).status == ct.IN_CORE


def test_approx_rejects_small_kappa(quad2):
    with pytest.raises(ValueError):
        ct.test_core_membership(quad2, [1, 1], approx(0.01, kappa=0.1))
    with pytest.raises(ValueError):
        ct.test_core_membership_approx(quad2, [1, 1], SolverConfig())


def test_approx_slide_counts_within_budget():
    o = random_economy("quadratic", 3, 4)
    cfg = approx(0.01, kappa=2.5)
    v = ct.test_core_membership(o, [0.722, 0.578, 0.764], cfg)
    assert v.status == ct.IN_CORE
    assert max(v.slide_steps) <= np.ceil(4 * 3 * cfg.kappa / cfg.eps_core)
