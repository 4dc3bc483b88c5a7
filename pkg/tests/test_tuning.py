import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_problem
from lqadmm import (
    IterationOperator,
    LQProblem,
    MriConstants,
    TunerConfig,
    closed_form_deblur,
    closed_form_mri,
    joint_objective,
    lambda_n_objective,
    make_operator,
    mri_constants,
    optimal_alpha,
    tune_theta,
)
from lqadmm.applications.deblurring import deblur_problem
from lqadmm.applications.images import cartesian_mask, phantom
from lqadmm.errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    EmptyPartitionError,
    InvalidParameterError,
)
from lqadmm.operators import GridDims, fourier_grid_symbol
from lqadmm.spectral import alpha_sweep
from lqadmm.tuning import SpectrumCache, grid_search, joint_value, mri_branch


@pytest.fixture(scope="module")
def deblur_small():
    return lambda mu: deblur_problem(phantom(GridDims(16, 16)), mu=mu)


def _identity_problem():
    eye = make_operator("dense", matrix=np.eye(3))
    return LQProblem(eye, eye, 1.0, np.ones(3))


def test_lambda_n_identity_problem():
    assert lambda_n_objective(_identity_problem(), 1.0) == pytest.approx(-0.5)


def test_lambda_n_deblur_at_root_mu(deblur_small):
    # mu <= 1: lambda_n(Q(sqrt(mu))) = -(1 + mu) / (2 sqrt(mu) + 1 + mu)
    assert lambda_n_objective(deblur_small(0.25), 0.5) == pytest.approx(-1.25 / 2.25, abs=1e-12)


def test_lambda_n_matches_dense_oracle(rng):
    problem = dense_problem(rng, 25, 10, 20, 3.0)
    for theta in (0.05, 1.0, 30.0):
        eig = np.linalg.eigvals(IterationOperator(problem, theta, mode="dense").q_matrix)
        assert lambda_n_objective(problem, theta) == pytest.approx(eig.real.max(), abs=1e-8)


def test_joint_value_limits():
    assert joint_value(-0.5, -0.5) == 0.0
    assert joint_value(-1.0, -1e-12) == pytest.approx(1.0, abs=1e-11)
    with pytest.raises(DegenerateSpectrumError):
        joint_value(0.0, 0.0)


def test_joint_objective_deblur_theta_grid(deblur_small):
    problem = deblur_small(1e3)
    values = {t: joint_objective(problem, t) for t in (0.5, 1.0, 2.0)}
    assert min(values, key=values.get) == 1.0
    assert values[1.0] == pytest.approx(0.0, abs=1e-12)


def test_tune_deblur_lambda_n(deblur_small):
    res = tune_theta(deblur_small(0.25), "lambda-n")
    assert res.theta_star == pytest.approx(0.5, abs=1e-3)
    assert res.alpha_star is None
    assert res.objective_kind == "lambda-n"


def test_tune_deblur_joint(deblur_small):
    res = tune_theta(deblur_small(1e3), "joint")
    assert res.theta_star == pytest.approx(1.0, abs=1e-2)
    assert res.alpha_star == pytest.approx(2.0, abs=1e-2)


def test_tune_random_matches_grid():
    problem = dense_problem(np.random.default_rng(31), 30, 12, 30, 2.0)
    cache = SpectrumCache(problem)
    res = tune_theta(problem, "lambda-n", cache=cache)
    theta_grid, value_grid, _ = grid_search(cache, np.logspace(-4, 4, 2000))
    assert res.theta_star == pytest.approx(theta_grid, rel=0.01)
    assert res.objective_at_optimum <= value_grid + 1e-9
    assert res.history[0][0] > 0


def test_tuner_history_and_determinism():
    problem = dense_problem(np.random.default_rng(32), 20, 8, 20, 0.5)
    a = tune_theta(problem, "joint")
    b = tune_theta(problem, "joint")
    assert a.theta_star == b.theta_star and a.alpha_star == b.alpha_star
    assert min(v for _, v in a.history) == pytest.approx(a.objective_at_optimum)


def test_tuner_rejects_unknown_objective():
    with pytest.raises(InvalidParameterError):
        tune_theta(_identity_problem(), "rho")


@pytest.mark.parametrize("kwargs", [dict(fd_step=0.0), dict(theta_init=-1.0), dict(step_size=0.0),
                                    dict(max_iters=0), dict(multistart_count=-1)])
def test_tuner_config_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        TunerConfig(**kwargs)


def test_spectrum_cache_memoizes():
    cache = SpectrumCache(dense_problem(np.random.default_rng(33), 10, 5, 10, 1.0))
    first = cache(0.7)
    count = cache.evaluations
    assert cache(0.7) is first
    assert cache.evaluations == count


def test_optimal_alpha_examples():
    assert optimal_alpha(-1.0, 0.0) == 2.0
    assert optimal_alpha(-1.0, -1.0) == 1.0
    assert optimal_alpha(-0.8, -0.2) == 2.0


def test_optimal_alpha_on_diagonal_q():
    eig = np.array([-0.8, -0.5, -0.3, -0.2])
    alpha = optimal_alpha(eig.min(), eig.max())
    rho = np.abs(1 + alpha * eig).max()
    assert rho == pytest.approx(0.6)
    sweep = np.array([np.abs(1 + a * eig).max() for a in np.linspace(0.01, 3.0, 3000)])
    assert sweep.min() >= rho - 1e-12


@given(l1=st.floats(-1.0, -1e-3), frac=st.floats(0.0, 1.0))
def test_optimal_alpha_balances_extremes(l1, frac):
    ln = l1 * frac
    alpha = optimal_alpha(l1, ln)
    assert abs(1 + alpha * l1) == pytest.approx(abs(1 + alpha * ln), abs=1e-12)
    grid = np.linspace(1e-3, 3 / abs(l1), 400)
    assert alpha_sweep(l1, ln, [alpha])[0] <= alpha_sweep(l1, ln, grid).min() + 1e-12


def test_optimal_alpha_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        optimal_alpha(0.0, 0.0)


@pytest.mark.parametrize("mu,expected", [(0.25, 0.5), (1e3, 1.0), (1.0, 1.0), (0.01, 0.1)])
def test_closed_form_deblur(mu, expected):
    theta, alpha = closed_form_deblur(mu)
    assert theta == pytest.approx(expected)
    assert alpha is None
    assert closed_form_deblur(mu, relaxed=True) == (1.0, 2.0)


def test_closed_form_deblur_rejects_bad_mu():
    with pytest.raises(InvalidParameterError):
        closed_form_deblur(0.0)


def test_mri_constants_enumeration():
    c = mri_constants(np.array([1, 0, 1, 0]), np.array([0.0, 3.0, 5.0, 7.0]))
    assert (c.a, c.b, c.c, c.d) == (0.0, 3.0, 5.0, 7.0)


def test_mri_constants_brute_force_8x8():
    dims = GridDims(8, 8)
    mask = cartesian_mask(dims, rows=[0, 2, 4, 6])
    g = fourier_grid_symbol(dims)
    sampled, unsampled = [], []
    for i in range(8):
        for j in range(8):
            (sampled if i % 2 == 0 else unsampled).append(g[i, j])
    c = mri_constants(mask, g)
    assert c.a == pytest.approx(min(sampled))
    assert c.c == pytest.approx(max(sampled))
    assert c.b == pytest.approx(min(unsampled))
    assert c.d == pytest.approx(max(unsampled))


def test_mri_constants_skip_unsampled_null_mode():
    mask = np.array([0, 1, 1, 0])
    g = np.array([0.0, 1.0, 2.0, 3.0])
    assert mri_constants(mask, g).b == 3.0
    assert mri_constants(mask, g, exclude_null=False).b == 0.0


def test_mri_constants_errors():
    with pytest.raises(EmptyPartitionError):
        mri_constants(np.ones(4), np.arange(4.0))
    with pytest.raises(DimensionMismatchError):
        mri_constants(np.ones(3), np.arange(4.0))


def test_mri_equal_minima_slightly_above_a():
    # a = b: the interval (a, b] is empty, and just above it theta* -> mu continuously
    consts = MriConstants(a=0.5, b=0.5, c=6.0, d=8.0)
    mu = 0.5 * (1 + 1e-7)
    assert closed_form_mri(mu, consts) == pytest.approx(mu, rel=1e-7)


@pytest.mark.parametrize("consts,mu,branch", [
    (MriConstants(0.2, 0.5, 6.0, 8.0), 0.1, 1),
    (MriConstants(0.6, 0.4, 6.0, 8.0), 0.3, 2),
    (MriConstants(0.0, 0.5, 6.0, 8.0), 0.3, 3),
    (MriConstants(0.0, 0.5, 6.0, 8.0), 3.0, 4),
])
def test_mri_branch_selection(consts, mu, branch):
    assert mri_branch(mu, consts) == branch


@given(a=st.floats(0.0, 2.0), b=st.floats(0.05, 2.0), extra=st.floats(0.1, 8.0))
def test_closed_form_mri_continuous_at_boundaries(a, b, extra):
    c = max(a, b) + extra
    consts = MriConstants(a, b, c, c + 1.0)
    for boundary in {a, b, 2 * b - a}:
        if boundary <= 1e-3:
            continue
        lo = closed_form_mri(boundary * (1 - 1e-10), consts)
        hi = closed_form_mri(boundary * (1 + 1e-10), consts)
        assert abs(lo - hi) < 1e-6


def test_closed_form_mri_matches_grid_on_8x8():
    dims = GridDims(8, 8)
    from lqadmm.applications.mri import mri_problem

    mask = cartesian_mask(dims, rows=[0, 2, 4, 6])
    consts = mri_constants(mask, fourier_grid_symbol(dims))
    problem = mri_problem(phantom(dims), mask, mu=2.0)
    theta_cf = closed_form_mri(2.0, consts)
    theta_grid, _, _ = grid_search(problem, np.logspace(-2, 2, 2000))
    assert theta_cf == pytest.approx(theta_grid, rel=0.01)


def test_closed_form_mri_rejects_bad_mu():
    with pytest.raises(InvalidParameterError):
        closed_form_mri(-1.0, MriConstants(0.0, 1.0, 2.0, 3.0))
