import numpy as np
import pytest

from thermocloak.grids import Grid2D, RadialGrid
from thermocloak.medium import (
    EXTERIOR,
    LAYER,
    OBJECT,
    EllipticityError,
    MaterialField,
    ObjectSpec,
    assemble_blownup_medium,
    assemble_cloak_medium,
    check_ellipticity,
)
from thermocloak.transform import BlowupMap, push_forward_density, push_forward_tensor


def blownup_coefficients(eps, obj, d):
    def tensor(x):
        x = np.asarray(x)
        r = np.linalg.norm(x, axis=-1)
        out = np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()
        inside = r < eps
        out[inside] = eps ** (2 - d) * obj.tensor(x[inside] / eps)
        return out

    def density(x):
        x = np.asarray(x)
        r = np.linalg.norm(x, axis=-1)
        out = np.ones(x.shape[:-1])
        inside = r < eps
        out[inside] = eps ** (-d) * obj.density(x[inside] / eps)
        return out

    return tensor, density


def anisotropic_object():
    def a(p):
        p = np.asarray(p)
        t = np.zeros(p.shape[:-1] + (p.shape[-1],) * 2)
        for i in range(p.shape[-1]):
            t[..., i, i] = 2.0 + p[..., 0]
        t[..., 0, 1] = t[..., 1, 0] = 0.3
        return t

    return ObjectSpec(a, lambda p: 3.0 + np.asarray(p)[..., 1], 10.0)


@pytest.mark.parametrize("obj", [ObjectSpec(), anisotropic_object()], ids=["isotropic", "anisotropic"])
def test_pushed_blownup_equals_cloak_2d(obj):
    eps = 0.2
    grid = Grid2D.square(4.0, 64)
    m = BlowupMap(eps)
    cloak = assemble_cloak_medium(m, obj, grid)
    tensor, density = blownup_coefficients(eps, obj, 2)
    y = grid.sample_points
    assert np.max(np.abs(push_forward_tensor(tensor, m)(y) - cloak.tensor)) <= 1e-8
    assert np.max(np.abs(push_forward_density(density, m)(y) - cloak.density)) <= 1e-8


def test_pushed_blownup_equals_cloak_radial():
    eps = 0.1
    grid = RadialGrid.for_cloak(eps, h_max=0.05)
    m = BlowupMap(eps, 3)
    obj = ObjectSpec(7.0, 0.5, 10.0)
    cloak = assemble_cloak_medium(m, obj, grid)
    tensor, density = blownup_coefficients(eps, obj, 3)
    y = grid.sample_points
    assert np.max(np.abs(push_forward_tensor(tensor, m)(y) - cloak.tensor)) <= 1e-8
    assert np.max(np.abs(push_forward_density(density, m)(y) - cloak.density)) <= 1e-8


def test_regions_partition_cells():
    grid = Grid2D.square(4.0, 80)
    field = assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(), grid)
    r = np.linalg.norm(grid.sample_points, axis=1)
    assert set(np.unique(field.region)) == {OBJECT, LAYER, EXTERIOR}
    assert np.array_equal(field.region == OBJECT, r < 1)
    assert np.array_equal(field.region == LAYER, (r >= 1) & (r < 2))
    assert np.array_equal(field.region == EXTERIOR, r >= 2)


def test_exterior_is_identity_and_object_is_contents():
    grid = Grid2D.square(4.0, 64)
    field = assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(), grid)
    ext = field.region == EXTERIOR
    assert np.allclose(field.tensor[ext], np.eye(2))
    assert np.allclose(field.density[ext], 1.0)
    obj = field.region == OBJECT
    assert np.allclose(field.tensor[obj], 2 * np.eye(2))
    assert np.allclose(field.density[obj], 3.0)
    assert np.allclose(field.tensor, np.swapaxes(field.tensor, 1, 2))
    assert np.all(field.density > 0)


def test_layer_density_is_inverse_jacobian_determinant():
    eps = 0.1
    grid = Grid2D.square(4.0, 64)
    m = BlowupMap(eps)
    field = assemble_cloak_medium(m, ObjectSpec(), grid)
    layer = field.region == LAYER
    x = m.inverse(grid.sample_points[layer])
    det = np.linalg.det(m.jacobian(x))
    assert np.allclose(field.density[layer], 1.0 / det, rtol=1e-12)


def _layer_eigs_2d(eps, s):
    # radial map with slope k and stretch f(r)/r; eigenvalues k r/f and f/(k r)
    k = 1.0 / (2.0 - eps)
    r = (2.0 - eps) * s - (2.0 - 2.0 * eps)
    return sorted([k * r / s, s / (k * r)])


def test_layer_eigenvalues_eps_01():
    eps = 0.1
    m = BlowupMap(eps)
    y = 1.25 * np.array([[np.cos(0.7), np.sin(0.7)]])
    a = push_forward_tensor(np.eye(2), m)(y)[0]
    assert np.allclose(np.linalg.eigvalsh(a), _layer_eigs_2d(eps, 1.25), rtol=0, atol=1e-8)


def test_layer_near_outer_boundary_at_largest_eps():
    eps = 0.499
    a = push_forward_tensor(np.eye(2), BlowupMap(eps))(np.array([[1.99, 0.0]]))[0]
    eig = np.linalg.eigvalsh(a)
    assert np.allclose(eig, _layer_eigs_2d(eps, 1.99), atol=1e-12)
    # the layer stays anisotropic (about 0.665 and 1.505) right up to |y| = 2
    assert eig[0] == pytest.approx(0.66455, abs=5e-5)
    assert eig[1] == pytest.approx(1.50478, abs=5e-5)


def test_blownup_values():
    eps = 0.1
    grid3 = RadialGrid.for_blowup(eps, h_max=0.05)
    f3 = assemble_blownup_medium(BlowupMap(eps, 3), ObjectSpec(1.0, 1.0, 1.0), grid3)
    inside = f3.region == OBJECT
    assert inside.any()
    assert np.allclose(f3.tensor[inside], np.eye(3) / eps)
    assert np.allclose(f3.density[inside], eps**-3)
    grid2 = Grid2D.square(4.0, 160)
    f2 = assemble_blownup_medium(BlowupMap(eps), ObjectSpec(1.0, 1.0, 1.0), grid2)
    inside = f2.region == OBJECT
    assert inside.any()
    assert np.allclose(f2.density[inside], eps**-2)
    assert np.allclose(f2.tensor[inside], np.eye(2))
    out = ~inside
    assert np.allclose(f2.tensor[out], np.eye(2)) and np.allclose(f2.density[out], 1.0)


def test_ellipticity_report():
    grid = Grid2D.square(4.0, 32)
    rep = check_ellipticity(MaterialField.homogeneous(grid))
    s = rep.regions["exterior"]
    assert s.min_eig == pytest.approx(1.0) and s.max_eig == pytest.approx(1.0)
    cloak = assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(), Grid2D.square(4.0, 96))
    assert check_ellipticity(cloak).regions["cloak layer"].min_eig > 0


def test_object_outside_bound_flagged():
    grid = Grid2D.square(4.0, 32)
    with pytest.raises(EllipticityError):
        assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(5.0, 1.0, 2.0), grid)
    loose = assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(5.0, 1.0, 10.0), grid)
    rep = check_ellipticity(loose, lower=0.5, upper=2.0, regions=["object"])
    assert not rep.ok and "object" in rep.violations[0]


def test_material_field_validation():
    with pytest.raises(ValueError):
        MaterialField(np.array([[[1.0, 0.5], [0.0, 1.0]]]), np.ones(1), np.zeros(1))
    with pytest.raises(ValueError):
        MaterialField(np.eye(2)[None], np.zeros(1), np.zeros(1))


def test_grid_must_contain_ball():
    with pytest.raises(ValueError):
        assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(), Grid2D.square(1.5, 16))


def test_scaled_object():
    obj = ObjectSpec().scaled(50, 0.03)
    pts = np.zeros((1, 2))
    assert np.allclose(obj.tensor(pts), 100 * np.eye(2))
    assert np.allclose(obj.density(pts), 0.09)
    obj.validate(pts)
