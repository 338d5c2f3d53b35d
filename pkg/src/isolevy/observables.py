"""Built-in observables: zonal eigenfunctions, coordinates, ball indicators.

Zonal observables are finite sums of Laplacian eigenfunctions centred at
arbitrary points.  Because every isotropic generator on the model spaces is
diagonal in these functions, their semigroup evolution, Laplacian, mean and
L^2 inner products are all available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .geom import Circle, Manifold, Sphere2, Torus
from .spectral import _check_index, eigenvalue, laplace_eigenvalue, legendre


@dataclass(frozen=True)
class ZonalTerm:
    index: object  # k, l, or a lattice vector on the torus
    center: tuple
    coef: float = 1.0


class Observable:
    name: str = "observable"
    manifold: Manifold

    def __call__(self, points) -> np.ndarray:
        raise NotImplementedError

    @property
    def mu_mean(self) -> float:
        """Mean under the normalised Riemannian measure."""
        raise NotImplementedError


def _eigenfunction(m: Manifold, term: ZonalTerm, points: np.ndarray) -> np.ndarray:
    c = np.asarray(term.center, dtype=float)
    if isinstance(m, Circle):
        return np.cos(int(term.index) * (points[..., 0] - c[0]))
    if isinstance(m, Sphere2):
        return legendre(int(term.index), np.clip(points @ c, -1.0, 1.0))
    k = np.asarray(term.index, dtype=float)
    return np.cos((points - c) @ k / m.scale)


def _is_constant(m: Manifold, term: ZonalTerm) -> bool:
    return _check_index(m, term.index) == 0


def _pair_inner(m: Manifold, s: ZonalTerm, u: ZonalTerm) -> float:
    """``<phi_s, phi_u>`` in L^2(mu) for two unit-coefficient terms."""
    a = np.asarray(s.center, dtype=float)
    b = np.asarray(u.center, dtype=float)
    vol = m.volume()
    if isinstance(m, Torus):
        ks = np.asarray(s.index, dtype=int)
        ku = np.asarray(u.index, dtype=int)
        if not ks.any() and not ku.any():
            return vol
        if np.array_equal(ks, ku) or np.array_equal(ks, -ku):
            return 0.5 * vol * math.cos(float(ks @ (a - b)) / m.scale)
        return 0.0
    ls, lu = int(s.index), int(u.index)
    if ls != lu:
        return 0.0
    if isinstance(m, Circle):
        return vol if ls == 0 else 0.5 * vol * math.cos(ls * (a[0] - b[0]))
    return vol / (2 * ls + 1) * float(legendre(ls, np.clip(a @ b, -1.0, 1.0)))


@dataclass(frozen=True)
class ZonalObservable(Observable):
    manifold: Manifold
    terms: tuple[ZonalTerm, ...]
    name: str = "zonal"

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1])
        for term in self.terms:
            out = out + term.coef * _eigenfunction(self.manifold, term, points)
        return out

    @property
    def mu_mean(self) -> float:
        return float(sum(t.coef for t in self.terms if _is_constant(self.manifold, t)))

    def laplacian(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1])
        for term in self.terms:
            mu = laplace_eigenvalue(self.manifold, term.index)
            out = out - mu * term.coef * _eigenfunction(self.manifold, term, points)
        return out

    def evolve(self, ch, t: float, eps0: float = 0.0) -> ZonalObservable:
        """``T_t f`` exactly: every term decays at its own eigenvalue."""
        terms = tuple(ZonalTerm(tm.index, tm.center,
                                tm.coef * math.exp(-t * eigenvalue(ch, self.manifold, tm.index, eps0)))
                      for tm in self.terms)
        return ZonalObservable(self.manifold, terms, f"T_t {self.name}")

    def inner(self, other: ZonalObservable) -> float:
        """``<f, g>`` in L^2 of the (unnormalised) Riemannian measure."""
        return float(sum(s.coef * u.coef * _pair_inner(self.manifold, s, u)
                         for s in self.terms for u in other.terms))


def zonal(m: Manifold, index, center=None, coef: float = 1.0, name: str | None = None) -> ZonalObservable:
    """A single eigenfunction centred at ``center`` (default: the canonical pole)."""
    if center is None:
        center = _default_pole(m)
    center = tuple(float(c) for c in np.asarray(center, dtype=float).ravel())
    if isinstance(m, Torus):
        index = tuple(int(i) for i in np.atleast_1d(index))
        if len(index) != m.dim:
            raise ValueError(f"torus lattice vector must have length {m.dim}")
    else:
        index = int(index)
    return ZonalObservable(m, (ZonalTerm(index, center, coef),), name or f"mode{index}")


def _default_pole(m: Manifold) -> np.ndarray:
    if isinstance(m, Sphere2):
        return np.array([0.0, 0.0, 1.0])
    return np.zeros(m.coord_dim)


def constant(m: Manifold, value: float = 1.0) -> ZonalObservable:
    idx = (0,) * m.dim if isinstance(m, Torus) else 0
    return zonal(m, idx, coef=value, name="one")


@dataclass(frozen=True)
class BallIndicator(Observable):
    manifold: Manifold
    center: tuple
    radius: float
    name: str = "ball"

    def __call__(self, points):
        c = np.asarray(self.center, dtype=float)
        d = self.manifold.geodesic_distance(np.asarray(points, dtype=float), c)
        return (d < self.radius).astype(float)

    @property
    def mu_mean(self) -> float:
        m, r = self.manifold, self.radius
        if isinstance(m, Circle):
            return min(2.0 * r, m.volume()) / m.volume()
        if isinstance(m, Sphere2):
            return 0.5 * (1.0 - math.cos(min(r / m.scale, math.pi)))
        if r > math.pi * m.scale:
            raise ValueError("ball indicator mean needs radius <= pi * scale on the torus")
        d = m.dim
        ball = math.pi ** (d / 2) / gamma(d / 2 + 1) * r**d
        return ball / m.volume()


def builtin_observables(m: Manifold) -> dict[str, Observable]:
    """The named observable dictionary for a manifold."""
    pole = _default_pole(m)
    obs: dict[str, Observable] = {"one": constant(m)}
    if isinstance(m, Circle):
        obs["cos"] = zonal(m, 1, [0.0], name="cos")
        obs["sin"] = zonal(m, 1, [0.5 * np.pi], name="sin")
        obs["cos2"] = zonal(m, 2, [0.0], name="cos2")
        obs["sin2"] = zonal(m, 2, [0.25 * np.pi], name="sin2")
        obs["cos3"] = zonal(m, 3, [0.0], name="cos3")
    elif isinstance(m, Sphere2):
        for axis, label in enumerate("xyz"):
            e = np.zeros(3)
            e[axis] = 1.0
            obs[label] = zonal(m, 1, e, name=label)
        obs["p2z"] = zonal(m, 2, [0.0, 0.0, 1.0], name="p2z")
        obs["p2x"] = zonal(m, 2, [1.0, 0.0, 0.0], name="p2x")
        obs["p3z"] = zonal(m, 3, [0.0, 0.0, 1.0], name="p3z")
    else:
        for axis in range(m.dim):
            k = [0] * m.dim
            k[axis] = 1
            obs[f"cos{axis}"] = zonal(m, k, name=f"cos{axis}")
            shift = np.zeros(m.dim)
            shift[axis] = 0.5 * np.pi * m.scale
            obs[f"sin{axis}"] = zonal(m, k, shift, name=f"sin{axis}")
        obs["cosdiag"] = zonal(m, [1] * m.dim, name="cosdiag")
    obs["ball"] = BallIndicator(m, tuple(pole), 0.5 * m.scale, name="ball")
    return obs


def get_observable(m: Manifold, name: str) -> Observable:
    table = builtin_observables(m)
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r} for {m.kind}; "
                         f"choose from {sorted(table)}") from None
