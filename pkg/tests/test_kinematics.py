"""Flow-map algebra: Jacobian, inverse matrix, and discrete identities."""
import numpy as np
import pytest

from vaclab.kinematics import (DeformationDegenerateError, adjugate_residual,
                               box_grid, build_deformation, check_identities,
                               curl_eta, div_eta, grad_eta,
                               jacobian_expansion_residuals, radial_vector_field,
                               random_smooth_field)


def test_zero_field_gives_identity():
    g = box_grid(3, 1.0, 17)
    fld = build_deformation(g, np.zeros(g.shape + (3,)))
    assert np.max(np.abs(fld.jacobian - 1.0)) == 0.0
    assert np.max(np.abs(fld.inverse_matrix - np.eye(3))) == 0.0


def test_uniform_dilation():
    g = box_grid(3, 1.0, 17)
    c = 0.01
    omega = np.stack([c * axis for axis in g.meshgrid()], axis=-1)
    fld = build_deformation(g, omega)
    assert np.allclose(fld.jacobian, 1.01 ** 3, rtol=1e-12)
    assert np.allclose(fld.inverse_matrix, np.eye(3) / 1.01, rtol=1e-12)


def test_jacobian_expansion_orders():
    amp = 1e-3
    g2 = box_grid(2, 1.0, 33)
    fld2 = build_deformation(g2, random_smooth_field(g2, np.random.default_rng(3), amp))
    res2 = jacobian_expansion_residuals(fld2)
    assert res2["quadratic"] <= 1e-12          # expansion is exact in 2D
    assert res2["linear"] <= 10.0 * amp ** 2

    g3 = box_grid(3, 1.0, 33)
    fld3 = build_deformation(g3, random_smooth_field(g3, np.random.default_rng(3), amp))
    res3 = jacobian_expansion_residuals(fld3)
    assert res3["cubic"] <= 1e-12              # cubic adjugate term closes it
    assert res3["quadratic"] <= 10.0 * amp ** 3
    assert res3["quadratic"] > 1e-14           # and the cubic term is needed


def test_adjugate_consistency_roundoff():
    g = box_grid(3, 1.0, 21)
    fld = build_deformation(g, random_smooth_field(g, np.random.default_rng(1), 0.05))
    assert adjugate_residual(fld) <= 1e-13


def test_small_deformation_matrix_bounds():
    # |d omega| small keeps J in [1/2, 2] and every entry of A within 2
    g = box_grid(3, 1.0, 25)
    fld = build_deformation(g, random_smooth_field(g, np.random.default_rng(9), 0.1))
    assert 0.5 <= fld.jacobian.min() and fld.jacobian.max() <= 2.0
    assert np.max(np.abs(fld.inverse_matrix)) <= 2.0


def test_identities_affine_exact():
    g = box_grid(3, 1.0, 25)
    grids = g.meshgrid()
    omega = np.stack([
        0.01 * grids[0] + 0.002 * grids[1],
        -0.003 * grids[0] + 0.005 * grids[2],
        0.001 * grids[1],
    ], axis=-1)
    rep = check_identities(build_deformation(g, omega), margin=0.2)
    assert rep.piola <= 1e-13
    assert rep.jacobian_derivative <= 1e-13
    assert rep.inverse_derivative <= 1e-13


def test_identities_richardson_ratio():
    reports = {}
    for npts in (33, 65):
        g = box_grid(3, 1.0, npts)
        omega = random_smooth_field(g, np.random.default_rng(7), 1e-3)
        reports[npts] = check_identities(build_deformation(g, omega), margin=0.2)
    for attr in ("piola", "jacobian_derivative", "inverse_derivative"):
        ratio = getattr(reports[33], attr) / getattr(reports[65], attr)
        assert ratio == pytest.approx(16.0, rel=0.3), attr


def test_rotation_field_derivative_of_determinant():
    # omega = eps (-y2, y1): J = 1 + eps^2 is constant, so dJ must vanish
    g = box_grid(2, 1.0, 33)
    grids = g.meshgrid()
    eps = 0.01
    omega = np.stack([-eps * grids[1], eps * grids[0]], axis=-1)
    fld = build_deformation(g, omega)
    assert np.allclose(fld.jacobian, 1.0 + eps ** 2, rtol=1e-13)
    rep = check_identities(fld, margin=0.2)
    assert rep.jacobian_derivative <= 1e-13


def test_eta_operators_flat_reduction():
    g = box_grid(2, 1.0, 49)
    fld = build_deformation(g, np.zeros(g.shape + (2,)))
    grids = g.meshgrid()
    f = np.sin(1.3 * grids[0]) * np.cos(0.9 * grids[1])
    grad = grad_eta(fld, f)
    mask = g.interior_mask(0.2)
    exact_x = 1.3 * np.cos(1.3 * grids[0]) * np.cos(0.9 * grids[1])
    assert np.max(np.abs((grad[..., 0] - exact_x)[mask])) <= 1e-6
    vec = np.stack([f, -f], axis=-1)
    div = div_eta(fld, vec)
    exact_div = exact_x + 0.9 * np.sin(1.3 * grids[0]) * np.sin(0.9 * grids[1])
    assert np.max(np.abs((div - exact_div)[mask])) <= 1e-6


def test_curl_eta_annihilates_grad_eta():
    devs = {}
    for npts in (65, 129):
        g = box_grid(2, 1.0, npts)
        omega = random_smooth_field(g, np.random.default_rng(1), 0.05)
        fld = build_deformation(g, omega)
        grids = g.meshgrid()
        f = np.sin(2.0 * grids[0]) * np.cos(1.5 * grids[1])
        resid = curl_eta(fld, grad_eta(fld, f))
        devs[npts] = np.max(np.abs(resid[g.interior_mask(0.2)]))
    assert devs[65] <= 1e-4
    assert devs[65] / devs[129] == pytest.approx(16.0, rel=0.35)


def test_grad_eta_within_factor_two_of_flat():
    g = box_grid(3, 1.0, 33)
    omega = random_smooth_field(g, np.random.default_rng(4), 0.1)
    fld = build_deformation(g, omega)
    grids = g.meshgrid()
    f = np.sin(grids[0] + 0.5 * grids[1]) * np.cos(grids[2])
    grad_def = grad_eta(fld, f)
    from vaclab.kinematics import apply_d

    flat = np.stack([apply_d(g, f, k) for k in range(3)], axis=-1)
    mask = g.interior_mask(0.2)
    norm_def = np.linalg.norm(grad_def, axis=-1)[mask]
    norm_flat = np.linalg.norm(flat, axis=-1)[mask]
    keep = norm_flat > 0.1 * norm_flat.max()
    ratio = norm_def[keep] / norm_flat[keep]
    assert np.all(ratio >= 0.5) and np.all(ratio <= 2.0)


def test_noninvertible_deformation_names_node():
    g = box_grid(2, 1.0, 25)
    grids = g.meshgrid()
    omega = np.stack([-1.5 * grids[0], 0.0 * grids[1]], axis=-1)
    with pytest.raises(DeformationDegenerateError) as exc:
        build_deformation(g, omega)
    assert len(exc.value.node_index) == 2
    assert exc.value.det_value <= 0.0


def test_radial_vector_field_center_limit():
    g = box_grid(3, 0.5, 21)
    omega = radial_vector_field(g, lambda r: 0.3 * r)
    assert np.allclose(omega, 0.3 * np.stack(g.meshgrid(), axis=-1), atol=1e-8)
