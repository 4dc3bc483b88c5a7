import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import gaussian_filter

from lqadmm.applications.deblurring import deblur, deblur_problem
from lqadmm.applications.images import blob_pair, cartesian_mask, gaussian_blobs, phantom
from lqadmm.applications.mri import mri_reconstruct
from lqadmm.applications.random_instances import mean_iterations, run_random_experiment
from lqadmm.applications.registration import (
    DeformationField,
    VelocityField,
    compose,
    compose_deformation,
    image_gradient,
    jacobian_determinant,
    register,
    warp,
)
from lqadmm.errors import DimensionMismatchError, InvalidParameterError
from lqadmm.operators import GridDims
from lqadmm.tuning import grid_search, lambda_n_objective

SOLVER_LABELS = {"admm", "oadmm", "gd", "gd-n", "gd-nr", "cg"}


# images

def test_phantom_range_and_shape():
    img = phantom(GridDims(32, 24))
    assert img.shape == (32, 24)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert img.max() > 0.5


def test_gaussian_blob_peak_at_centre():
    img = gaussian_blobs(GridDims(20, 30), [(12, 7, 3)])
    assert img.max() == pytest.approx(1.0)
    assert np.unravel_index(img.argmax(), img.shape) == (7, 12)


def test_blob_pair_differs_and_shares_shape():
    src, tgt = blob_pair()
    assert src.shape == tgt.shape == (64, 64)
    assert 0 < np.abs(src - tgt).max() < 1


def test_cartesian_mask_rows():
    dims = GridDims(16, 16)
    mask = cartesian_mask(dims, fraction=0.5, seed=3)
    rows = np.flatnonzero(mask[:, 0])
    assert rows.size == 8 and 0 in rows
    assert np.all(mask[rows] == 1.0)
    assert 0 not in np.flatnonzero(cartesian_mask(dims, fraction=0.5, sample_dc=False)[:, 0])
    np.testing.assert_array_equal(mask, cartesian_mask(dims, fraction=0.5, seed=3))


def test_cartesian_mask_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        cartesian_mask(GridDims(8, 8), fraction=1.0)
    with pytest.raises(InvalidParameterError):
        cartesian_mask(GridDims(8, 8), rows=[9])


# random instances

@pytest.fixture(scope="module")
def long_random_run():
    return run_random_experiment(instance_count=1, seed=4, tol=1e-300, max_iters=30)[0]


def test_random_oadmm_below_admm_at_iteration_30(long_random_run):
    errs = {k: t.iterates_error for k, t in long_random_run.traces.items()}
    assert len(errs["oadmm"]) == len(errs["admm"]) == 31
    assert errs["oadmm"][30] < errs["admm"][30]


def test_random_report_contents(long_random_run):
    rep = long_random_run
    assert set(rep.traces) == {"admm", "admm-theta/10", "admm-10theta", "oadmm"}
    assert set(rep.summary) == set(rep.traces)
    theta = rep.tuned["admm"].theta_star
    assert rep.tuned["oadmm"].alpha_star > 0 and theta > 0
    assert isinstance(rep.details["alpha_outside_band"], bool)


def test_random_experiment_is_reproducible():
    a = run_random_experiment(m=30, n=10, instance_count=2, seed=9)
    b = run_random_experiment(m=30, n=10, instance_count=2, seed=9)
    for ra, rb in zip(a, b):
        for label in ra.traces:
            assert ra.traces[label].iterates_error == rb.traces[label].iterates_error


def test_random_experiment_parallel_matches_serial():
    a = run_random_experiment(m=30, n=10, instance_count=2, seed=9)
    b = run_random_experiment(m=30, n=10, instance_count=2, seed=9, jobs=2)
    assert [r.summary for r in a] == [r.summary for r in b]


def test_random_tuned_theta_beats_mistuned_on_average(random_reports):
    censor = 20000
    tuned = mean_iterations(random_reports, "admm", censor)
    assert tuned < mean_iterations(random_reports, "admm-theta/10", censor)
    assert tuned < mean_iterations(random_reports, "admm-10theta", censor)


def test_random_alpha_band_flag_recorded(random_reports):
    for rep in random_reports:
        alpha = rep.details["alpha_star"]
        assert rep.details["alpha_outside_band"] == (not 1.5 <= alpha <= 1.8)


def test_mean_iterations_censors_unreached():
    class R:
        def __init__(self, v):
            self.summary = {"x": v}

    assert mean_iterations([R(4), R(None)], "x", 100) == 52.0


# deblurring

def test_deblur_reaches_tolerance_within_five_iterations(deblur_report):
    assert deblur_report.tuned["oadmm"].theta_star == 1.0
    assert deblur_report.tuned["oadmm"].alpha_star == 2.0
    assert deblur_report.summary["oadmm"] is not None and deblur_report.summary["oadmm"] <= 5


def test_deblur_report_has_all_solvers(deblur_report):
    assert set(deblur_report.traces) == SOLVER_LABELS
    assert deblur_report.images["restored"].shape == (64, 64)


def test_deblur_solvers_agree_on_solution():
    rep = deblur(phantom(GridDims(16, 16)), mu=10.0, tol=1e-12, max_iters=20000)
    for label, trace in rep.traces.items():
        assert trace.iterates_error[-1] <= 1e-8, label


def test_deblur_without_blur_or_noise_scales_input():
    img = phantom(GridDims(16, 16))
    mu = 3.0
    rep = deblur(img, mu=mu, noise_sigma=0.0, blur=False, tol=1e-14, baselines=False)
    np.testing.assert_allclose(rep.images["restored"], mu / (mu + 1) * img, atol=1e-10)


def test_deblur_closed_form_matches_grid_at_quarter_mu():
    problem = deblur_problem(phantom(GridDims(16, 16)), mu=0.25)
    theta, _, _ = grid_search(problem, np.linspace(0.005, 2.0, 2000))
    assert theta == pytest.approx(0.5, abs=1e-3)
    assert lambda_n_objective(problem, 0.5) <= lambda_n_objective(problem, theta) + 1e-12


# mri

def test_mri_full_sampling_recovers_image():
    dims = GridDims(16, 16)
    img = phantom(dims)
    rep = mri_reconstruct(img, np.ones(dims.shape), mu=1e8, noise_sigma=0.0, baselines=False, tol=1e-14)
    assert np.linalg.norm(rep.images["reconstruction"] - img) / np.linalg.norm(img) < 1e-3
    assert any("closed form unavailable" in note for note in rep.notes)


def test_mri_report_contents():
    dims = GridDims(16, 16)
    rep = mri_reconstruct(phantom(dims), cartesian_mask(dims, fraction=0.5), mu=1.0)
    assert set(rep.traces) == SOLVER_LABELS
    assert rep.details["branch"] in (1, 2, 3, 4)
    assert rep.images["zero_filled"].shape == dims.shape


def _mri_ordering(size):
    dims = GridDims(size, size)
    return mri_reconstruct(phantom(dims), cartesian_mask(dims, fraction=0.5), mu=1.0).summary


def test_mri_tuned_ordering_16x16():
    s = _mri_ordering(16)
    assert s["oadmm"] <= s["admm"]
    assert all(s["admm"] <= s[g] for g in ("gd", "gd-n", "gd-nr"))


def test_mri_tuned_ordering_32x32_against_plain_and_nesterov():
    s = _mri_ordering(32)
    assert s["oadmm"] <= s["admm"] <= min(s["gd"], s["gd-n"])


@pytest.mark.xfail(strict=True, reason="restarted Nesterov overtakes tuned ADMM on this instance")
def test_mri_tuned_admm_not_slower_than_restarted_nesterov_32x32():
    s = _mri_ordering(32)
    assert s["admm"] <= s["gd-nr"]


def test_mri_mask_shape_checked():
    with pytest.raises(DimensionMismatchError):
        mri_reconstruct(phantom(GridDims(8, 8)), np.ones((8, 4)))


# registration helpers

def test_identity_and_translation_jacobians():
    dims = GridDims(12, 10)
    ident = DeformationField.identity(dims)
    np.testing.assert_allclose(jacobian_determinant(ident), 1.0)
    shifted = DeformationField(ident.phi_x + 2.5, ident.phi_y - 1.25, dims)
    np.testing.assert_allclose(jacobian_determinant(shifted), 1.0)


def test_jacobian_of_linear_map():
    dims = GridDims(9, 9)
    ident = DeformationField.identity(dims)
    phi = DeformationField(2.0 * ident.phi_x + 0.5 * ident.phi_y, 3.0 * ident.phi_y, dims)
    np.testing.assert_allclose(jacobian_determinant(phi), 6.0)


def test_deformation_rejects_non_finite():
    dims = GridDims(3, 3)
    with pytest.raises(InvalidParameterError):
        DeformationField(np.full(9, np.nan), np.zeros(9), dims)
    with pytest.raises(DimensionMismatchError):
        VelocityField(np.zeros(8), np.zeros(9), dims)


def test_zero_velocity_composes_to_identity():
    dims = GridDims(10, 8)
    phi = compose_deformation(VelocityField(np.zeros(80), np.zeros(80), dims), steps=8)
    ident = DeformationField.identity(dims)
    np.testing.assert_array_equal(phi.phi_x, ident.phi_x)
    np.testing.assert_array_equal(phi.phi_y, ident.phi_y)


def test_constant_velocity_independent_of_step_count():
    dims = GridDims(16, 16)
    v = VelocityField(np.full(256, 0.7), np.full(256, -0.3), dims)
    one, eight = compose_deformation(v, 1), compose_deformation(v, 8)
    # away from the clamped border a translation composes exactly
    inner = np.zeros(dims.shape, bool)
    inner[2:-2, 2:-2] = True
    np.testing.assert_allclose(one.phi_x[inner.ravel()], eight.phi_x[inner.ravel()], atol=1e-6)
    np.testing.assert_allclose(one.phi_y[inner.ravel()], eight.phi_y[inner.ravel()], atol=1e-6)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 8), scale=st.floats(0.05, 0.95))
def test_small_smooth_steps_keep_jacobian_positive(seed, steps, scale):
    dims = GridDims(24, 24)
    r = np.random.default_rng(seed)
    raw = [gaussian_filter(r.standard_normal(dims.shape), 3.0, mode="wrap") for _ in range(2)]
    peak = max(np.abs(c).max() for c in raw)
    vx, vy = (c / peak * 0.4 * steps * scale for c in raw)
    phi = compose_deformation(VelocityField(vx, vy, dims), steps)
    assert jacobian_determinant(phi).min() > 0


def test_compose_rejects_zero_steps():
    dims = GridDims(4, 4)
    with pytest.raises(InvalidParameterError):
        compose(DeformationField.identity(dims), VelocityField(np.zeros(16), np.zeros(16), dims), 0)


def test_warp_by_translation_shifts_image():
    dims = GridDims(16, 16)
    img = gaussian_blobs(dims, [(8, 8, 2)])
    ident = DeformationField.identity(dims)
    out = warp(img, DeformationField(ident.phi_x + 1.0, ident.phi_y, dims))
    np.testing.assert_allclose(out[:, :-1], img[:, 1:], atol=1e-12)


def test_image_gradient_of_ramp():
    ramp = np.tile(np.arange(6.0), (5, 1))
    ix, iy = image_gradient(ramp)
    np.testing.assert_allclose(ix[:, 1:-1], 1.0)
    np.testing.assert_allclose(iy, 0.0)


# registration

def test_register_identical_images_gives_identity():
    img = gaussian_blobs(GridDims(16, 16), [(8, 8, 3)])
    res = register(img, img, outer_iters=2, inner_iters=50, baselines=False)
    dx, dy = res.phi.displacement()
    np.testing.assert_allclose(dx, 0.0, atol=1e-12)
    np.testing.assert_allclose(dy, 0.0, atol=1e-12)
    np.testing.assert_allclose(jacobian_determinant(res.phi), 1.0, atol=1e-12)


@pytest.fixture(scope="module")
def shifted_blob_run():
    dims = GridDims(32, 32)
    source = gaussian_blobs(dims, [(16, 16, 5)])
    target = gaussian_blobs(dims, [(17, 16, 5)])
    return register(source, target, mu=1000.0, outer_iters=4, inner_iters=300, baselines=False)


def test_register_recovers_one_pixel_shift(shifted_blob_run):
    # target(x) = source(x - 1), so target is matched by sampling the source one pixel back
    dx, dy = shifted_blob_run.phi.displacement()
    assert dx.mean() == pytest.approx(-1.0, rel=0.2)
    assert abs(dy.mean()) < 0.05


def test_register_theta_stable(shifted_blob_run):
    thetas = [s.theta for s in shifted_blob_run.steps]
    for a, b in zip(thetas, thetas[1:]):
        assert abs(b - a) / a < 0.1


def test_register_residual_decreases(shifted_blob_run):
    res = [s.residual for s in shifted_blob_run.steps]
    assert shifted_blob_run.report.details["final_residual"] < res[0]


def test_blob_registration_keeps_positive_jacobian(blob_registration):
    assert all(s.min_jacobian > 0 for s in blob_registration.steps)
    assert jacobian_determinant(blob_registration.phi).min() > 0


def test_register_rejects_mismatched_images():
    with pytest.raises(DimensionMismatchError):
        register(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(InvalidParameterError):
        register(np.zeros((4, 4)), np.zeros((4, 4)), integration_steps=0)
