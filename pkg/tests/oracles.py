"""Independent brute-force oracles for the jump part of the generator.

Nothing here goes through ``isolevy``: eigenfunctions come from scipy's
spherical harmonics or plain cosines, geodesics are written out by hand and
the radial integral is done with ``scipy.integrate.quad_vec``.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import sph_harm_y

N_DIR = 64  # exact: along a geodesic circle a degree-l harmonic is a trig polynomial of degree l
R0 = 1e-3  # below this the second difference is replaced by its quadratic germ


def real_harmonic(l, coef):
    """``sum_m coef[m + l] Y_lm`` with real, orthonormal ``Y_lm``."""
    ms = np.arange(-l, l + 1)
    coef = np.asarray(coef, dtype=float)

    def f(pts):
        theta = np.arccos(np.clip(pts[..., 2], -1.0, 1.0))[..., None]
        phi = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2 * np.pi)[..., None]
        y = sph_harm_y(l, np.abs(ms), theta, phi)
        re = np.where(ms == 0, y.real, math.sqrt(2) * np.where(ms > 0, y.real, y.imag))
        return re @ coef
    return f


def _tangent_circle(p):
    helper = np.array([1.0, 0, 0]) if abs(p[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(p, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    phi = 2 * np.pi * np.arange(N_DIR) / N_DIR
    return np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2


def _radial(g, f0, mu, d, nu):
    """``int g(r) nu(dr)`` for an atom or a truncated power law."""
    if type(nu).__name__ == "Atom":
        return nu.rate * g(nu.radius)
    a, c, rmax = nu.alpha, nu.intensity, nu.r_max
    # spherical means: f + r^2 Laplacian f / (2d) + O(r^4)
    germ = -mu * f0 / (2 * d) * c * R0 ** (2 - a) / (2 - a)
    body, _ = integrate.quad_vec(lambda r: g(r) * c * r ** (-1 - a), R0, rmax,
                                 epsabs=1e-13, epsrel=1e-10, limit=400)
    return germ + body


def sphere_jump_action(f, l, points, nu):
    """Two-sided jump integral of ``f`` at each unit vector in ``points``."""
    dirs = np.stack([_tangent_circle(p) for p in points])
    f0 = f(points)

    def g(r):
        c, s = math.cos(r) * points[:, None, :], math.sin(r) * dirs
        both = f(np.stack([c + s, c - s]))
        return 0.5 * both.mean(axis=-1).sum(axis=0) - f0
    return _radial(g, f0, l * (l + 1), 2, nu)


def circle_jump_action(k, center, points, nu):
    """Same on the unit circle for ``cos(k (x - center))``."""
    def f(x):
        return np.cos(k * (x - center))
    f0 = f(points)

    def g(r):
        return 0.5 * (f(points + r) + f(points - r)) - f0
    return _radial(g, f0, k * k, 1, nu)


def fitted_eigenvalue(action, values):
    """Least-squares ``lambda`` in ``action = -lambda * values``."""
    return -float(np.dot(action, values) / np.dot(values, values))


def wrapped_gaussian(x, var, terms=20):
    n = np.arange(-terms, terms + 1)
    return float(np.sum(np.exp(-(x + 2 * np.pi * n) ** 2 / (2 * var))) / math.sqrt(2 * np.pi * var))
