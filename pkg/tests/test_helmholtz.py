import numpy as np
import pytest

from thermocloak.fem import assemble_operator, mass_matrix, norm_L2
from thermocloak.grids import Grid2D, RadialGrid
from thermocloak.heat import GaussianBump, SourceSpec
from thermocloak.helmholtz import (
    IllConditionedError,
    exterior_kernel_solution,
    solve_frequency,
    solve_radial_exterior,
    visibility_frequency,
)
from thermocloak.medium import MaterialField, ObjectSpec, assemble_blownup_medium, assemble_cloak_medium
from thermocloak.special import hankel0_h1, rate_frequency
from thermocloak.transform import BlowupMap


def test_zero_source_zero_solution():
    g = Grid2D.unit_square(8)
    v = solve_frequency(MaterialField.homogeneous(g), g, 2.0, np.zeros(g.num_nodes))
    assert not np.any(v)


def test_rejects_nonpositive_omega():
    g = Grid2D.unit_square(4)
    with pytest.raises(ValueError):
        solve_frequency(MaterialField.homogeneous(g), g, 0.0, np.zeros(g.num_nodes))


def _mms(n, omega=3.0):
    g = Grid2D.unit_square(n)
    x, y = g.nodes.T
    exact = np.sin(np.pi * x) * np.sin(np.pi * y)
    rhs = (-2 * np.pi**2 + 1j * omega) * exact
    v = solve_frequency(MaterialField.homogeneous(g), g, omega, rhs, lumped=False)
    return norm_L2(v - exact, g)


def test_manufactured_second_order():
    errs = [_mms(n) for n in (16, 32, 64)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_energy_identity():
    g = Grid2D.square(4.0, 48)
    field = assemble_cloak_medium(BlowupMap(0.2), ObjectSpec(), g)
    omega = 2.0
    src = SourceSpec(GaussianBump((3.0, 0.0), 0.3)).nodal(g)
    v = solve_frequency(field, g, omega, src)
    m = mass_matrix(g, field.density)
    b = mass_matrix(g) @ src
    lhs = omega * np.vdot(v, m @ v).real
    # int g conj(v) carries the sign: omega int rho |v|^2 = +Im int g conj(v)
    rhs = np.vdot(v, b).imag
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_assembled_systems_are_dissipative():
    rng = np.random.default_rng(0)
    g = Grid2D.square(4.0, 32)
    field = assemble_cloak_medium(BlowupMap(0.1), ObjectSpec(), g)
    for omega in (0.25, 1.0, 16.0):
        a = assemble_operator(field, g, shift=1j * omega)
        for _ in range(3):
            u = rng.normal(size=a.shape[0]) + 1j * rng.normal(size=a.shape[0])
            assert np.vdot(u, a @ u).imag < 0


def test_identical_media_invisible():
    g = Grid2D.square(4.0, 32)
    f = MaterialField.homogeneous(g)
    rec = visibility_frequency(f, f, g, 1.0, SourceSpec().nodal(g))
    assert rec.errL2 == 0 and rec.errH1 == 0


def test_mismatched_grids_rejected():
    g = Grid2D.square(4.0, 32)
    f = MaterialField.homogeneous(Grid2D.square(4.0, 16))
    with pytest.raises(ValueError):
        visibility_frequency(f, f, g, 1.0, np.zeros(g.num_nodes))


def _radial_visibility(eps, omega, h_max=0.02):
    g = RadialGrid.for_blowup(eps, h_max=h_max)
    blown = assemble_blownup_medium(BlowupMap(eps, 3), ObjectSpec(), g)
    src = SourceSpec(GaussianBump((3.0, 0.0, 0.0), 0.3)).nodal(g)
    return visibility_frequency(blown, MaterialField.homogeneous(g), g, omega, src, epsilon=eps)


def test_radial_visibility_envelope_and_frequency_trend():
    recs = [_radial_visibility(0.05, w) for w in (1.0, 4.0, 16.0, 64.0)]
    for r in recs:
        assert r.envelope == pytest.approx(rate_frequency(0.05, r.omega, 3))
        assert r.errH1 >= r.errL2 > 0
    ratios = [r.errH1 / r.envelope for r in recs]
    # a constant calibrated at omega = 1 bounds the whole sweep
    assert all(q <= ratios[0] for q in ratios)
    assert recs[-1].errH1 < recs[0].errH1


@pytest.mark.parametrize("omega_scaled", [1e-4, 0.01, 1.0])
def test_radial_exterior_3d_closed_form(omega_scaled):
    bv = 0.7 - 0.2j
    r = np.linspace(1.0, 20.0, 97)
    p = solve_radial_exterior(omega_scaled, bv, 20.0, 3, sample_radii=r)
    k = np.exp(0.25j * np.pi) * np.sqrt(omega_scaled)
    assert np.max(np.abs(p(r) - bv * np.exp(1j * k * (r - 1)) / r)) <= 1e-8


@pytest.mark.parametrize("omega_scaled", [1e-4, 0.01, 1.0])
def test_radial_exterior_2d_hankel(omega_scaled):
    r = np.linspace(1.0, 20.0, 97)
    p = solve_radial_exterior(omega_scaled, 1.0, 20.0, 2, sample_radii=r)
    k = np.exp(0.25j * np.pi) * np.sqrt(omega_scaled)
    assert np.max(np.abs(p(r) - hankel0_h1(k * r) / hankel0_h1(k))) <= 1e-6


def test_radial_exterior_zero_boundary_value():
    assert not np.any(solve_radial_exterior(0.5, 0.0, 10.0, 3).values)


def test_radial_exterior_extreme_decay_reported():
    with pytest.raises(IllConditionedError):
        solve_radial_exterior(1e4, 1.0, 100.0, 3)


def test_exterior_decay_3d_bounded():
    # exact ratio 2 exp(-sqrt(w) (1/(2 sqrt 2) - 1/4 - eps/sqrt 2)) <= 2 for eps < 0.146
    for eps in (0.01, 0.02, 0.05):
        for omega in (1.0, 4.0, 16.0):
            r_half = 1 / (2 * eps)
            p = solve_radial_exterior(omega * eps**2, 1.0, 2 / eps, 3, sample_radii=[r_half])
            ratio = abs(p(r_half)) / rate_frequency(eps, omega, 3)
            assert ratio <= 2.0


def test_exterior_decay_2d_tracks_log_ratio():
    for omega in (0.1, 0.25, 0.4):
        ratios = []
        for eps in (0.01, 0.02, 0.05):
            r_half = 1 / (2 * eps)
            p = solve_radial_exterior(omega * eps**2, 1.0, 2 / eps, 2, sample_radii=[r_half])
            ratios.append(abs(p(r_half)) / rate_frequency(eps, omega, 2))
        assert max(ratios) / min(ratios) < 1.1


def test_kernel_solution_value_at_one():
    k = 0.3 * np.exp(0.25j * np.pi)
    assert exterior_kernel_solution(k, 1.0, 3, 2.0) == pytest.approx(2.0)
    assert exterior_kernel_solution(k, 1.0, 2, 2.0) == pytest.approx(2.0)
