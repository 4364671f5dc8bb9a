import numpy as np
import pytest
from scipy.optimize import linprog

from pgcore.config import SolverConfig
from pgcore.errors import InfeasibleSet, InvalidEconomy
from pgcore.optimizer import Box, MaxMinProblem, SignedSimplex, project_onto, project_simplex, solve_maxmin


def affine_problem(R, s, box):
    R, s = np.asarray(R, float), np.asarray(s, float)
    return MaxMinProblem(lambda x: R @ x + s, lambda x: R, box)


def lp_optimum(R, s, lo, hi):
    """max t s.t. t <= R_i x + s_i, lo <= x <= hi, straight from linprog."""
    m, n = R.shape
    res = linprog(
        np.r_[np.zeros(n), -1.0],
        A_ub=np.hstack([-R, np.ones((m, 1))]),
        b_ub=s,
        bounds=list(zip(lo, hi)) + [(None, None)],
        method="highs",
    )
    return -res.fun


def test_simplex_linear_example():
    p = MaxMinProblem(lambda v: v.copy(), lambda v: np.eye(2), SignedSimplex(1, 2))
    res = solve_maxmin(p)
    assert res.converged
    assert np.allclose(res.argmax, [0.5, 0.5], atol=1e-6)
    assert res.value == pytest.approx(0.5, abs=1e-6)


def test_separable_quadratic_example():
    c = np.array([0.3, 0.7])
    p = MaxMinProblem(lambda x: -(x - c) ** 2, lambda x: np.diag(-2 * (x - c)), Box(np.zeros(2), np.ones(2)))
    res = solve_maxmin(p)
    assert res.converged
    assert np.allclose(res.argmax, c, atol=1e-3)
    assert res.value == pytest.approx(0.0, abs=1e-6)
    assert res.certified_gap <= 1e-6


def test_negative_simplex():
    p = MaxMinProblem(lambda v: -v, lambda v: -np.eye(3), SignedSimplex(-1, 3))
    res = solve_maxmin(p)
    assert np.allclose(res.argmax, [-1 / 3] * 3, atol=1e-6)


def test_box_projection_clamps():
    assert np.array_equal(project_onto(Box(np.zeros(2), np.ones(2)), [1.5, -0.2]), [1.0, 0.0])


def test_simplex_projection_examples():
    assert np.allclose(project_onto(SignedSimplex(1, 2), [2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(project_onto(SignedSimplex(-1, 2), [-2.0, 0.0]), [-1.0, 0.0])


def test_simplex_projection_kkt():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=5) * 2
        w = project_simplex(x)
        assert w.min() >= 0 and w.sum() == pytest.approx(1.0)
        # KKT: x - w = theta on the support, x - w <= theta off it
        theta = (x - w)[w > 0]
        assert np.allclose(theta, theta[0])
        assert np.all((x - w)[w == 0] <= theta[0] + 1e-12)


def test_projection_rejects_nan():
    with pytest.raises(ValueError):
        project_onto(Box(np.zeros(1), np.ones(1)), [np.nan])


def test_bad_sets():
    with pytest.raises(InfeasibleSet):
        Box(np.ones(2), np.zeros(2))
    with pytest.raises(InfeasibleSet):
        SignedSimplex(0, 2)
    with pytest.raises(InfeasibleSet):
        SignedSimplex(1, 0)


@pytest.mark.parametrize("seed", range(10))
def test_random_affine_matches_lp(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    R = rng.uniform(-1, 1, (n + 1, n))
    s = rng.uniform(-0.5, 0.5, n + 1)
    lo = rng.uniform(-1, 0, n)
    hi = lo + rng.uniform(0.5, 2, n)
    res = solve_maxmin(affine_problem(R, s, Box(lo, hi)))
    assert res.value == pytest.approx(lp_optimum(R, s, lo, hi), abs=1e-6)
    assert res.upper_bound >= res.value


def test_nonconcave_objective_is_detected():
    # g(x) = x^2 on [-1, 1]: linearizations undercut the achieved value
    p = MaxMinProblem(lambda x: x ** 2, lambda x: (2 * x)[None, :], Box(-np.ones(1), np.ones(1)))
    with pytest.raises(InvalidEconomy):
        solve_maxmin(p, x0=[0.1])


def test_iteration_cap_reports_exhausted():
    c = np.array([0.3, 0.7])
    p = MaxMinProblem(lambda x: -(x - c) ** 2, lambda x: np.diag(-2 * (x - c)), Box(np.zeros(2), np.ones(2)))
    res = solve_maxmin(p, SolverConfig(max_iterations=3))
    assert res.status == "exhausted"
    assert not res.converged
    assert res.iterations == 3


def test_stop_above_ends_early():
    p = MaxMinProblem(lambda v: v.copy(), lambda v: np.eye(2), SignedSimplex(1, 2))
    res = solve_maxmin(p, stop_above=0.1)
    assert res.status == "target" and res.value > 0.1


def test_point_set_is_trivial():
    p = MaxMinProblem(lambda v: v * 3, lambda v: np.eye(1) * 3, SignedSimplex(1, 1))
    res = solve_maxmin(p)
    assert res.value == 3.0 and res.iterations == 0


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=1e-5, tau_dev=1e-5)
    with pytest.raises(ValueError):
        SolverConfig(mode="approx")
    with pytest.raises(ValueError):
        SolverConfig(mode="fast")
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    cfg = SolverConfig(mode="approx", eps_core=0.01, kappa=2.0)
    assert cfg.to_dict()["eps_core"] == 0.01
