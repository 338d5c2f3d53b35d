import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_legendre, gamma

from isolevy.geom import Circle, Sphere2, Torus
from isolevy.levy import Atom, Empty, LevyCharacteristics, Stable, TruncatedStable
from isolevy.spectral import (TailUnboundedError, TailUnboundedWarning, build_spectrum, eigenvalue,
                              heat_trace, jump_eigenvalue, jump_generator, kernel,
                              laplace_eigenvalue, legendre, one_minus_legendre, zonal_profile)
from isolevy.observables import zonal
from oracles import wrapped_gaussian


def bm(d):
    return LevyCharacteristics(2.0, Empty(), d)


# -- Laplacian eigenvalues ------------------------------------------------------

def test_laplace_sphere_l2_by_finite_differences():
    # P_2 about the x-axis is not zonal in latitude/longitude, so both terms matter
    h = 1e-3
    theta = np.linspace(0.4, 2.7, 31)[:, None]
    phi = np.linspace(0.0, 2 * np.pi, 40, endpoint=False)[None, :]

    def f(th, ph):
        return eval_legendre(2, np.sin(th) * np.cos(ph))

    d_th = (np.sin(theta + h / 2) * (f(theta + h, phi) - f(theta, phi))
            - np.sin(theta - h / 2) * (f(theta, phi) - f(theta - h, phi))) / (h * h * np.sin(theta))
    d_ph = (f(theta, phi + h) - 2 * f(theta, phi) + f(theta, phi - h)) / (h * h * np.sin(theta) ** 2)
    lap = d_th + d_ph
    mask = np.abs(f(theta, phi)) > 0.2
    recovered = -(lap / f(theta, phi))[mask]
    assert np.max(np.abs(recovered - laplace_eigenvalue(Sphere2(), 2))) < 1e-3
    assert laplace_eigenvalue(Sphere2(), 2) == 6


def test_laplace_circle_k3_by_finite_differences():
    h = 1e-4
    x = np.linspace(0.1, 6.0, 50)
    second = (np.cos(3 * (x + h)) - 2 * np.cos(3 * x) + np.cos(3 * (x - h))) / h**2
    mask = np.abs(np.cos(3 * x)) > 0.2
    assert np.max(np.abs(-second[mask] / np.cos(3 * x[mask]) - 9)) < 1e-4
    assert laplace_eigenvalue(Circle(), 3) == 9


def test_laplace_misc():
    for m in (Circle(), Sphere2(), Torus(2)):
        assert laplace_eigenvalue(m, (0, 0) if isinstance(m, Torus) else 0) == 0
    assert laplace_eigenvalue(Torus(3, 2.0), (1, 2, 2)) == pytest.approx(9 / 4)
    assert laplace_eigenvalue(Sphere2(2.0), 1) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        laplace_eigenvalue(Circle(), -1)
    with pytest.raises(ValueError):
        laplace_eigenvalue(Torus(2), (1, 1, 1))


# -- Legendre helpers -------------------------------------------------------------------

@pytest.mark.parametrize("l", [0, 1, 2, 5, 37, 400])
def test_legendre_matches_scipy(l):
    x = np.linspace(-1, 1, 201)
    np.testing.assert_allclose(legendre(l, x), eval_legendre(l, x), atol=1e-12)


@pytest.mark.parametrize("l", [1, 3, 10, 60])
def test_one_minus_legendre_small_argument(l):
    mpmath.mp.dps = 50
    for y in (1e-12, 1e-8, 1e-4, 0.3, 1.7):
        exact = float(1 - mpmath.legendre(l, 1 - mpmath.mpf(y)))
        assert one_minus_legendre(l, y) == pytest.approx(exact, rel=1e-11, abs=1e-300)


# -- jump eigenvalues ------------------------------------------------------------------------

def test_jump_eigenvalue_examples():
    assert jump_eigenvalue(Circle(), 1, Atom(math.pi / 2, 1.0)) == pytest.approx(1.0, abs=1e-15)
    assert jump_eigenvalue(Sphere2(), 1, Atom(math.pi, 1.0)) == pytest.approx(2.0, abs=1e-15)
    for m, idx in ((Circle(), 0), (Sphere2(), 0), (Torus(2), (0, 0))):
        assert jump_eigenvalue(m, idx, Stable(1.2, 1.0)) == 0.0


def test_eigenvalue_examples():
    assert eigenvalue(bm(2), Sphere2(), 3) == laplace_eigenvalue(Sphere2(), 3)
    assert eigenvalue(LevyCharacteristics(0, Atom(math.pi / 2, 1), 1), Circle(), 1) == pytest.approx(1.0)
    assert eigenvalue(LevyCharacteristics(2, Atom(math.pi, 1), 2), Sphere2(), 1) == pytest.approx(4.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_circle_stable_closed_form(alpha):
    # int (1 - cos(k r)) c r^{-1-alpha} dr = c k^alpha Gamma(1-alpha) cos(pi alpha/2)/alpha
    base = math.pi / 2 if alpha == 1 else gamma(1 - alpha) * math.cos(math.pi * alpha / 2) / alpha
    for k in (1, 2, 5):
        assert jump_eigenvalue(Circle(), k, Stable(alpha, 0.8)) == pytest.approx(0.8 * k**alpha * base, rel=1e-8)


def test_torus_atom_bessel():
    from scipy.special import j0, spherical_jn
    assert jump_eigenvalue(Torus(2), (1, 0), Atom(1.0, 1.0)) == pytest.approx(1 - j0(1.0), rel=1e-12)
    # d = 3: the mean of cos(k.y) over a sphere of radius r is sin(|k| r)/(|k| r)
    assert jump_eigenvalue(Torus(3), (1, 1, 0), Atom(0.7, 2.0)) == pytest.approx(
        2 * (1 - spherical_jn(0, math.sqrt(2) * 0.7)), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.6])
def test_torus_stable_closed_form(alpha):
    # E|u_1|^alpha for a uniform unit vector in R^2, times the circle constant
    base = math.pi / 2 if alpha == 1 else gamma(1 - alpha) * math.cos(math.pi * alpha / 2) / alpha
    moment = gamma(1.0) * gamma((alpha + 1) / 2) / (math.sqrt(math.pi) * gamma((2 + alpha) / 2))
    exact = base * moment * 5 ** (alpha / 2)
    assert jump_eigenvalue(Torus(2), (1, 2), Stable(alpha, 1.0)) == pytest.approx(exact, rel=1e-9)
    # with jumps cut below eps0 the per-direction quadrature is used; it differs by the dropped mass
    eps0 = 1e-6
    cut = jump_eigenvalue(Torus(2), (1, 2), Stable(alpha, 1.0), eps0=eps0)
    dropped = 5 / 4 * Stable(alpha, 1.0).small_jump_moment(eps0)  # 2 sin^2(x/2) <= x^2/2, E u_1^2 = 1/2
    assert -1e-5 * exact <= exact - cut <= dropped + 1e-5 * exact


def test_eps0_reduces_eigenvalue():
    nu = Stable(1.3, 1.0)
    full = jump_eigenvalue(Sphere2(), 2, nu)
    cut = jump_eigenvalue(Sphere2(), 2, nu, eps0=0.1)
    assert 0 < full - cut < nu.small_jump_moment(0.1) * 6 / 4 + 1e-12


# -- Funk-Hecke: direct generator vs eigenvalue ----------------------------------------------

@pytest.mark.parametrize("m,index,nu", [
    (Circle(), 3, Stable(1.4, 0.5)),
    (Circle(), 2, TruncatedStable(0.6, 1.0, 2.0)),
    (Sphere2(), 2, Atom(1.1, 0.8)),
    (Sphere2(), 3, Stable(1.3, 0.7)),
    (Torus(2), (1, 2), Atom(0.9, 1.0)),
    (Torus(2), (1, 1), TruncatedStable(1.2, 1.0, 2.5)),
], ids=["S1-stable", "S1-trunc", "S2-atom", "S2-stable", "T2-atom", "T2-trunc"])
def test_direct_generator_is_eigen(m, index, nu):
    rng = np.random.default_rng(0)
    center = m.sample_uniform(rng)
    f = zonal(m, index, center)
    lam = jump_eigenvalue(m, index, nu)
    for p in m.sample_uniform(rng, 3):
        fp = float(f(p[None])[0])
        if abs(fp) < 0.1:
            continue
        direct = jump_generator(m, f, p, nu, n_dir=256)
        assert direct == pytest.approx(-lam * fp, rel=1e-6)


# -- spectrum tables -----------------------------------------------------------------------------

def test_sphere_bm_table():
    tab = build_spectrum(bm(2), Sphere2(), 12)
    assert [md.index for md in tab.modes] == [0, 1, 2, 3]
    assert [md.multiplicity for md in tab.modes] == [1, 3, 5, 7]
    assert [md.lam for md in tab.modes] == [0, 2, 6, 12]
    assert tab.modes[0].mu == tab.modes[0].lam == 0


def test_torus_multiplicities():
    tab = build_spectrum(bm(2), Torus(2), 5)
    assert [(md.index, md.multiplicity) for md in tab.modes] == [(0, 1), (1, 4), (2, 4), (4, 4), (5, 8)]
    tab3 = build_spectrum(bm(3), Torus(3), 5)
    assert [(md.index, md.multiplicity) for md in tab3.modes] == [(0, 1), (1, 6), (2, 12), (3, 8), (4, 6), (5, 24)]
    circ = build_spectrum(bm(1), Circle(), 10)
    assert [md.multiplicity for md in circ.modes] == [1, 2, 2, 2]


def test_ordering_and_resolvent():
    ch = LevyCharacteristics(2.0, Stable(0.9, 3.0), 2)
    tab = build_spectrum(ch, Sphere2(), 200)
    lam = np.array([md.lam for md in tab.modes])
    alpha = np.array([md.alpha for md in tab.modes])
    assert np.all(np.diff(lam) >= 0)
    np.testing.assert_allclose(alpha, 1 / (1 + lam), rtol=1e-12)
    strict = np.diff(lam) > 0
    assert np.all(np.diff(alpha)[strict] < 0)
    brown = build_spectrum(bm(2), Sphere2(), 200)
    by_index = {md.index: md.lam for md in brown.modes}
    assert all(md.lam >= by_index[md.index] for md in tab.modes)
    assert [md.index for md in brown.modes] == sorted(by_index)


def test_ties_broken_by_index():
    # Atom at 2 pi on the circle: every jump returns home, so lambda = mu
    tab = build_spectrum(LevyCharacteristics(0.0, Atom(2 * math.pi, 1.0), 1), Circle(), 20) \
        if False else build_spectrum(LevyCharacteristics(2.0, Atom(2 * math.pi, 1.0), 1), Circle(), 20)
    assert [md.index for md in tab.modes] == [0, 1, 2, 3, 4]


def test_pure_jump_table_warns_and_refuses():
    ch = LevyCharacteristics(0.0, Atom(1.0, 1.0), 2)
    with pytest.warns(TailUnboundedWarning):
        tab = build_spectrum(ch, Sphere2(), 50)
    with pytest.raises(TailUnboundedError):
        heat_trace(tab, 1.0)
    with pytest.raises(TailUnboundedError):
        kernel(tab, np.array([0, 0, 1.0]), np.array([0, 0, 1.0]), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(0.05, 5.0), st.sampled_from(["circle", "sphere", "torus"]))
def test_domination_property(alpha, c, kind):
    m = {"circle": Circle(), "sphere": Sphere2(), "torus": Torus(2)}[kind]
    tab = build_spectrum(LevyCharacteristics(2.0, Stable(alpha, c), m.dim), m, 30)
    assert all(md.lam >= md.mu and md.lam_jump >= 0 for md in tab.modes)


# -- heat trace ------------------------------------------------------------------------------------

def test_heat_trace_sphere_bm():
    series = sum((2 * l + 1) * math.exp(-l * (l + 1)) for l in range(11))
    value, err = heat_trace(build_spectrum(bm(2), Sphere2(), 12), 1.0)
    assert abs(value + err - series) < 1e-4 and value == pytest.approx(1.41845, abs=1e-4)
    assert err < 1e-4
    big, _ = heat_trace(build_spectrum(bm(2), Sphere2(), 200), 1.0)
    assert big == pytest.approx(series, abs=1e-15)


def test_heat_trace_limits_and_monotonicity():
    tab = build_spectrum(bm(1), Circle(), 400)
    assert heat_trace(tab, 60.0)[0] == pytest.approx(1.0, abs=1e-12)
    jumpy = build_spectrum(LevyCharacteristics(2.0, Atom(1.0, 1.0), 1), Circle(), 400)
    for t in (0.1, 0.5, 2.0):
        assert heat_trace(jumpy, t)[0] < heat_trace(tab, t)[0]


@pytest.mark.parametrize("m", [Circle(), Sphere2(), Torus(2), Torus(3)], ids=repr)
def test_tail_bound_is_a_bound(m):
    small = build_spectrum(bm(m.dim), m, 10)
    large = build_spectrum(bm(m.dim), m, 400)
    for t in (0.3, 1.0):
        v_small, e_small = heat_trace(small, t)
        v_large, e_large = heat_trace(large, t)
        assert v_small <= v_large <= v_small + e_small
        assert e_large < e_small


# -- kernel --------------------------------------------------------------------------------------

def test_circle_bm_kernel_wrapped_gaussian():
    tab = build_spectrum(bm(1), Circle(), 400)
    value = float(kernel(tab, np.array([0.0]), np.array([0.0]), 1.0))
    assert value == pytest.approx(wrapped_gaussian(0.0, 2.0), abs=1e-12)
    assert value == pytest.approx(0.282124, abs=1e-5)
    for x in (0.5, 2.0, 3.1):
        assert float(kernel(tab, np.array([0.0]), np.array([x]), 1.0)) == pytest.approx(
            wrapped_gaussian(x, 2.0), abs=1e-12)


def test_kernel_normalisation_and_symmetry():
    ch = LevyCharacteristics(2.0, Atom(1.0, 0.5), 2)
    s = Sphere2()
    tab = build_spectrum(ch, s, 400)
    x, w = np.polynomial.legendre.leggauss(80)
    phi = 2 * np.pi * np.arange(160) / 160
    z = np.repeat(x, 160)
    r = np.sqrt(1 - z * z)
    grid = np.stack([r * np.cos(np.tile(phi, 80)), r * np.sin(np.tile(phi, 80)), z], axis=-1)
    weights = np.repeat(w, 160) * 2 * np.pi / 160
    p0 = np.array([0.6, 0.0, 0.8])
    vals = kernel(tab, p0, grid, 0.5)
    assert float(vals @ weights) == pytest.approx(1.0, abs=1e-6)
    q = grid[::97]
    np.testing.assert_array_equal(kernel(tab, p0, q, 0.5), kernel(tab, q, p0, 0.5))


def test_torus_kernel_is_product_of_circles():
    t2, c = Torus(2), Circle()
    kt = build_spectrum(bm(2), t2, 400)
    kc = build_spectrum(bm(1), c, 400)
    x, y = np.array([0.3, 5.0]), np.array([2.0, 1.0])
    expected = (kernel(kc, x[:1], y[:1], 0.7) * kernel(kc, x[1:], y[1:], 0.7))
    assert float(kernel(kt, x, y, 0.7)) == pytest.approx(float(expected), rel=1e-10)


def test_kernel_refuses_short_times():
    tab = build_spectrum(bm(1), Circle(), 4)
    with pytest.raises(ValueError):
        kernel(tab, np.array([0.0]), np.array([0.0]), 0.01)
