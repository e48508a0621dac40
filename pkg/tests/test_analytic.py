import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

import freemult as fm
from freemult.analytic import RealMeasure
from freemult.errors import DomainError, InvariantViolation


def test_psi_point_mass_closed_form():
    # c z / (1 - c z) with c = 1, z = i
    assert fm.psi(fm.dirac(1.0), 1j) == pytest.approx((-1 + 1j) / 2, abs=1e-15)
    z = 0.4 + 0.7j
    assert fm.psi(fm.dirac(2.5), z) == pytest.approx(2.5 * z / (1 - 2.5 * z),
                                                     abs=1e-15)


def test_psi_vanishes_at_origin_limit():
    vals = [abs(fm.psi(fm.gamma_measure(2, 1), -s)) for s in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-5


def test_psi_gamma_against_quad_oracle():
    # frozen from an independent scipy.quad evaluation of the integrand
    val = fm.psi(fm.gamma_measure(2, 1), 1j)
    assert val.real == pytest.approx(-0.6566220384435727, abs=1e-9)
    assert val.imag == pytest.approx(0.37855037576418665, abs=1e-9)


def test_psi_rejects_positive_axis():
    for z in (0.5, 0.0, 2.0 + 0j):
        with pytest.raises(DomainError):
            fm.psi(fm.dirac(1.0), z)


def test_psi_maps_upper_half_plane_into_itself():
    grid = fm.HalfPlaneGrid(re_count=8, im_count=8)
    for nu in (fm.gamma_measure(2, 1), fm.atomic([(0.5, 1.0), (0.5, 4.0)])):
        for z in grid.points():
            assert fm.psi(nu, complex(z)).imag > 0


def test_psi_conjugate_symmetry():
    nu = fm.gamma_measure(2, 1)
    z = 0.8 + 1.3j
    assert fm.psi(nu, z.conjugate()) == pytest.approx(
        fm.psi(nu, z).conjugate(), rel=1e-10)


def test_psi_prime_point_mass():
    z = 0.3 + 0.5j
    c = 1.7
    assert fm.psi_prime(fm.dirac(c), z) == pytest.approx(
        c / (1 - c * z) ** 2, abs=1e-15)


def test_psi_prime_two_atoms_exact():
    nu = fm.atomic([(0.5, 1.0), (0.5, 4.0)])
    expect = 0.5 / (1 - 1j) ** 2 + 2.0 / (1 - 4j) ** 2
    assert fm.psi_prime(nu, 1j) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("nu", [fm.gamma_measure(2, 1),
                                fm.atomic([(0.3, 0.5), (0.7, 2.0)])],
                         ids=["gamma", "atomic"])
def test_psi_prime_finite_difference(nu):
    h = 1e-5
    grid = fm.HalfPlaneGrid(re_min=-3, re_max=3, re_count=5,
                            im_min=0.3, im_max=3, im_count=4)
    for z in grid.points():
        z = complex(z)
        fd = (fm.psi(nu, z + h) - fm.psi(nu, z - h)) / (2 * h)
        assert abs(fm.psi_prime(nu, z) - fd) <= 1e-6 * max(abs(fd), 1e-12)


def test_pick_transform_atom_at_origin():
    pv = fm.pick_transform(RealMeasure.from_atoms([(1.0, 0.0)]), 1j)
    assert pv.value == pytest.approx(-1.0 / 1j, abs=1e-15)
    assert pv.derivative == pytest.approx(1.0 / (1j) ** 2, abs=1e-15)


def test_pick_transform_atom_at_one():
    pv = fm.pick_transform(RealMeasure.from_atoms([(1.0, 1.0)]), 1j)
    assert pv.value == pytest.approx(0.5j, abs=1e-15)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_pick_transform_grid_against_quad():
    xs = np.linspace(0.1, 6.0, 901)
    nu = fm.gamma_measure(2, 1)
    tau = RealMeasure.from_grid(xs, xs * np.asarray(nu.density(xs)))
    z = 1.2 + 0.8j
    pv = fm.pick_transform(tau, z)
    dens = lambda x: x * float(nu.density(np.array([x]))[0]) if 0.1 <= x <= 6 else 0.0
    # the kinks of the interpolant limit scipy.quad to ~1e-6 here
    re, _ = sp_integrate.quad(lambda x: ((1 + x * z) / ((x - z) * (1 + x * x))).real
                              * np.interp(x, xs, tau.f), 0.1, 6, limit=300)
    im, _ = sp_integrate.quad(lambda x: ((1 + x * z) / ((x - z) * (1 + x * x))).imag
                              * np.interp(x, xs, tau.f), 0.1, 6, limit=300)
    assert pv.value == pytest.approx(re + 1j * im, rel=1e-5)


def test_pick_transform_maps_half_plane():
    xs = np.linspace(0.05, 8.0, 801)
    nu = fm.gamma_measure(2, 1)
    tau = RealMeasure.from_grid(xs, xs * np.asarray(nu.density(xs)))
    grid = fm.HalfPlaneGrid(re_min=-5, re_max=5, re_count=20,
                            im_min=0.05, im_max=5, im_count=20)
    for z in grid.points():
        assert fm.pick_transform(tau, complex(z)).value.imag >= -1e-12


def test_pick_transform_rejects_lower_half_plane():
    tau = RealMeasure.from_atoms([(1.0, 0.0)])
    with pytest.raises(DomainError):
        fm.pick_transform(tau, 1.0 - 0.5j)
    with pytest.raises(DomainError):
        fm.pick_transform(tau, 1.0 + 0j)


def test_sigma_transform_values():
    assert fm.brownian_sigma_transform(1.0, 0.0) == pytest.approx(
        math.exp(-0.5), abs=1e-15)
    assert fm.brownian_sigma_transform(0.0, 0.3 + 0.1j) == 1.0
    assert fm.brownian_sigma_transform(2.0, -1.0) == pytest.approx(1.0, abs=1e-15)


def test_sigma_transform_semigroup():
    z = 0.3 - 0.2j
    for s, t in ((0.5, 1.5), (0.1, 0.1), (2.0, 3.0)):
        lhs = (fm.brownian_sigma_transform(s, z)
               * fm.brownian_sigma_transform(t, z))
        rhs = fm.brownian_sigma_transform(s + t, z)
        assert lhs == pytest.approx(rhs, rel=1e-14)


def test_sigma_transform_singular_point():
    with pytest.raises(DomainError):
        fm.brownian_sigma_transform(1.0, 1.0)


def test_half_plane_grid_invariants():
    with pytest.raises(InvariantViolation):
        fm.HalfPlaneGrid(im_min=-1.0)
    with pytest.raises(InvariantViolation):
        fm.HalfPlaneGrid(re_count=1)
    with pytest.raises(InvariantViolation):
        fm.HalfPlaneGrid(im_spacing="cubic")
    grid = fm.HalfPlaneGrid()
    pts = grid.points()
    assert pts.size == 64 * 64
    assert np.all(pts.imag > 0)
    linear = fm.HalfPlaneGrid(im_count=5, im_spacing="linear").points()
    ims = np.unique(linear.imag)
    assert np.allclose(np.diff(ims), ims[1] - ims[0])
