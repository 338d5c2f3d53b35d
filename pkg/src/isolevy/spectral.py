"""Spectral data of the generator ``(a/2) Laplacian + jump part`` on the model
manifolds.

On S^1, S^2 and flat tori the eigenfunctions of the Laplacian are shared by
every isotropic jump operator, so each eigenvalue splits into the Laplacian
eigenvalue ``mu`` and a jump contribution ``lambda_J = int (1 - Phi(r))
nu_rad(dr)``, where ``Phi`` is the mean of a normalised eigenfunction over
the geodesic sphere of radius ``r`` (its zonal profile).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, gammaln

from .geom import Circle, Manifold, Sphere2, Torus
from .levy import Atom, Empty, LevyCharacteristics, RadialJumpMeasure, Stable, radial_quadrature
from .quadrature import gauss_legendre


class TailUnboundedError(ValueError):
    """Trace and kernel evaluation need a > 0 for a finite tail bound."""


class TailUnboundedWarning(UserWarning):
    pass


# -- Legendre polynomials ------------------------------------------------------

def legendre(l: int, x) -> np.ndarray:
    """``P_l(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    if l == 0:
        return p_prev
    for n in range(1, l):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
    return p


def one_minus_legendre(l: int, y) -> np.ndarray:
    """``1 - P_l(1 - y)`` without cancellation for small ``y``.

    Same recurrence as :func:`legendre`, rewritten for ``Q_n = 1 - P_n``.
    """
    y = np.asarray(y, dtype=float)
    q_prev, q = np.zeros_like(y), y.copy()
    if l == 0:
        return q_prev
    for n in range(1, l):
        q_prev, q = q, ((2 * n + 1) * (y * (1.0 - q) + q) - n * q_prev) / (n + 1)
    return q


# -- indices, Laplacian eigenvalues, zonal profiles ---------------------------

def _torus_norm2(index) -> int:
    if np.ndim(index) == 0:
        n = int(index)
    else:
        n = int(np.sum(np.asarray(index, dtype=int) ** 2))
    if n < 0:
        raise ValueError("torus index must be non-negative")
    return n


def _check_index(m: Manifold, index):
    if isinstance(m, Torus):
        if np.ndim(index) == 1 and len(index) != m.dim:
            raise ValueError(f"torus lattice vector must have length {m.dim}")
        return _torus_norm2(index)
    if int(index) != index or index < 0:
        raise ValueError(f"mode index must be a non-negative integer, got {index!r}")
    return int(index)


def laplace_eigenvalue(m: Manifold, index) -> float:
    """Magnitude ``mu`` of the Laplace-Beltrami eigenvalue of a mode.

    The index is ``k`` on the circle, the degree ``l`` on the sphere and a
    lattice vector (or its squared norm) on the torus.
    """
    n = _check_index(m, index)
    s2 = m.scale**2
    if isinstance(m, Circle):
        return n * n / s2
    if isinstance(m, Sphere2):
        return n * (n + 1) / s2
    return n / s2


@lru_cache(maxsize=None)
def _angular_rule(d: int, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``|u_1|`` and weights for the law of the first coordinate of a
    uniform unit vector in R^d, folded onto [0, 1]."""
    if d == 1:
        return np.array([1.0]), np.array([1.0])
    x, w = gauss_legendre(n)
    theta = 0.25 * np.pi * (x + 1.0)
    w = w * np.sin(theta) ** (d - 2)
    return np.cos(theta), w / w.sum()


def _torus_frequencies(m: Torus, n2: int):
    t, w = _angular_rule(m.dim)
    return np.sqrt(n2) * t / m.scale, w


def zonal_profile(m: Manifold, index, r) -> np.ndarray:
    """Mean of the normalised eigenfunction over the geodesic sphere of radius ``r``."""
    return 1.0 - one_minus_profile(m, index, r)


def one_minus_profile(m: Manifold, index, r) -> np.ndarray:
    """``1 - zonal_profile``, accurate near ``r = 0`` and clipped to [0, 2]."""
    n = _check_index(m, index)
    r = np.asarray(r, dtype=float)
    if isinstance(m, Circle):
        out = 2.0 * np.sin(0.5 * n * r / m.scale) ** 2
    elif isinstance(m, Sphere2):
        out = one_minus_legendre(n, 2.0 * np.sin(0.5 * r / m.scale) ** 2)
    else:
        omega, w = _torus_frequencies(m, n)
        out = (2.0 * np.sin(0.5 * np.multiply.outer(r, omega)) ** 2) @ w
    return np.clip(out, 0.0, 2.0)


@lru_cache(maxsize=256)
def _unit_stable_integral(alpha: float, intensity: float, rtol: float):
    return radial_quadrature(Stable(alpha, intensity), lambda r: 2.0 * np.sin(0.5 * r) ** 2,
                             period=2.0 * np.pi, rtol=rtol)


def _jump_eigenvalue(m: Manifold, index, nu: RadialJumpMeasure, eps0: float = 0.0,
                     rtol: float = 1e-8) -> tuple[float, float]:
    n = _check_index(m, index)
    if n == 0 or isinstance(nu, Empty):
        return 0.0, 0.0
    if isinstance(m, Torus) and isinstance(nu, Stable):
        # unbounded range: swap the radial and angular integrals so that each
        # angular node gives a periodic radial integrand
        if eps0 == 0.0:
            # no length scale: the radial integral at frequency om is om^alpha times the one at 1
            # and the angular mean of |u_1|^alpha over the unit sphere of R^d is known
            unit = _unit_stable_integral(nu.alpha, nu.intensity, rtol)
            d, al = m.dim, nu.alpha
            moment = math.exp(gammaln(0.5 * d) + gammaln(0.5 * (al + 1)) - gammaln(0.5 * (d + al))) / math.sqrt(math.pi)
            scale = moment * (math.sqrt(n) / m.scale) ** al
            return max(unit.value * scale, 0.0), unit.error * scale
        omega, w = _torus_frequencies(m, n)
        value, err = 0.0, 0.0
        for om, wj in zip(omega, w):
            if om <= 0:
                continue
            res = radial_quadrature(nu, lambda r, om=om: 2.0 * np.sin(0.5 * om * r) ** 2,
                                    eps0, period=2.0 * np.pi / om, rtol=rtol)
            value += wj * res.value
            err += wj * res.error
        return max(value, 0.0), err
    # the torus profile is not periodic, but the remaining families have bounded range
    period = None if isinstance(m, Torus) else 2.0 * np.pi * m.scale
    res = radial_quadrature(nu, lambda r: one_minus_profile(m, n, r), eps0, period=period, rtol=rtol)
    return max(res.value, 0.0), res.error


def jump_eigenvalue(m: Manifold, index, nu: RadialJumpMeasure, eps0: float = 0.0) -> float:
    """Jump contribution ``lambda_J = int (1 - Phi_index(r)) nu_rad(dr)``.

    ``eps0 > 0`` gives the eigenvalue of the process with jumps shorter than
    ``eps0`` removed.
    """
    return _jump_eigenvalue(m, index, nu, eps0)[0]


def eigenvalue(ch: LevyCharacteristics, m: Manifold, index, eps0: float = 0.0) -> float:
    """Full eigenvalue magnitude ``lambda = (a/2) mu + lambda_J``."""
    return 0.5 * ch.a * laplace_eigenvalue(m, index) + jump_eigenvalue(m, index, ch.jumps, eps0)


# -- spectrum tables -------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMode:
    kind: str
    index: int
    multiplicity: int
    mu: float
    lam_jump: float
    lam: float
    alpha: float
    error: float = 0.0
    vectors: tuple | None = field(default=None, compare=False, repr=False)


def _enumerate_modes(m: Manifold, mu_cutoff: float):
    """Yield ``(index, multiplicity, mu, vectors)`` for every mu-distinct mode."""
    bound = mu_cutoff * m.scale**2
    if isinstance(m, Circle):
        k = 0
        while k * k <= bound:
            yield k, (1 if k == 0 else 2), k * k / m.scale**2, None
            k += 1
    elif isinstance(m, Sphere2):
        l = 0
        while l * (l + 1) <= bound:
            yield l, 2 * l + 1, l * (l + 1) / m.scale**2, None
            l += 1
    else:
        kmax = int(math.isqrt(int(math.floor(bound))))
        axis = np.arange(-kmax, kmax + 1)
        grid = np.stack(np.meshgrid(*([axis] * m.dim), indexing="ij"), axis=-1).reshape(-1, m.dim)
        norms = np.sum(grid * grid, axis=1)
        keep = norms <= bound
        grid, norms = grid[keep], norms[keep]
        for n in np.unique(norms):
            vecs = grid[norms == n]
            yield int(n), len(vecs), n / m.scale**2, tuple(map(tuple, vecs.tolist()))


@dataclass(frozen=True)
class SpectrumTable:
    """Modes with ``mu <= cutoff`` sorted by ascending ``lam``."""

    characteristics: LevyCharacteristics
    manifold: Manifold
    modes: tuple[SpectralMode, ...]
    cutoff: float
    eps0: float = 0.0

    @property
    def has_tail_bound(self) -> bool:
        return self.characteristics.a > 0

    def mode(self, index) -> SpectralMode:
        key = _check_index(self.manifold, index)
        for md in self.modes:
            if md.index == key:
                return md
        raise KeyError(f"mode {index!r} is not in the table (cutoff {self.cutoff})")

    def expanded_lambdas(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat([md.lam for md in self.modes], [md.multiplicity for md in self.modes])

    def tail_bound(self, t: float) -> float:
        """Bound on ``sum_{mu > cutoff} e^{-t lambda}`` from ``lambda >= (a/2) mu``."""
        if not self.has_tail_bound:
            return math.inf
        if t <= 0:
            raise ValueError("t must be positive")
        beta = 0.5 * self.characteristics.a * t / self.manifold.scale**2
        top = max(md.index for md in self.modes)
        return _laplace_tail(self.manifold, top, beta)


def _laplace_tail(m: Manifold, top: int, beta: float) -> float:
    if isinstance(m, Circle):
        return math.sqrt(math.pi / beta) * erfc(top * math.sqrt(beta))
    if isinstance(m, Sphere2):
        total, l = 0.0, top + 1
        # explicit terms until (2l+1) e^{-beta l(l+1)} is decreasing
        while (2 * l + 1) ** 2 < 2.0 / beta:
            total += (2 * l + 1) * math.exp(-beta * l * (l + 1))
            l += 1
        total += (2 * l + 1) * math.exp(-beta * l * (l + 1))
        return total + math.exp(-beta * l * (l + 1)) / beta
    theta = 1.0 + 2.0 * sum(math.exp(-beta * k * k) for k in range(1, 10000)
                            if beta * k * k < 745)
    kmax = int(math.isqrt(top))
    axis = np.arange(-kmax, kmax + 1)
    grid = np.stack(np.meshgrid(*([axis] * m.dim), indexing="ij"), axis=-1).reshape(-1, m.dim)
    norms = np.sum(grid * grid, axis=1)
    inside = float(np.sum(np.exp(-beta * norms[norms <= top])))
    full = theta**m.dim
    return max(full - inside, 0.0) + 1e-14 * full


def build_spectrum(ch: LevyCharacteristics, m: Manifold, mu_cutoff: float, eps0: float = 0.0) -> SpectrumTable:
    """Tabulate all modes with ``mu <= mu_cutoff``.

    With ``a = 0`` the table is still computed but carries no tail bound; a
    :class:`TailUnboundedWarning` is issued and trace/kernel evaluation refuse.
    """
    if not mu_cutoff > 0:
        raise ValueError("mu_cutoff must be positive")
    if ch.dim != m.dim:
        raise ValueError(f"characteristics are {ch.dim}-dimensional, manifold is {m.dim}-dimensional")
    if ch.a == 0:
        warnings.warn("pure-jump table: no heat-trace tail bound", TailUnboundedWarning, stacklevel=2)
    modes = []
    for index, mult, mu, vecs in _enumerate_modes(m, mu_cutoff):
        lam_j, err = _jump_eigenvalue(m, index, ch.jumps, eps0)
        lam = 0.5 * ch.a * mu + lam_j
        modes.append(SpectralMode(m.kind, index, mult, mu, lam_j, lam, 1.0 / (1.0 + lam), err, vecs))
    modes.sort(key=lambda md: (md.lam, md.index))
    return SpectrumTable(ch, m, tuple(modes), float(mu_cutoff), float(eps0))


def _require_tail(table: SpectrumTable):
    if not table.has_tail_bound:
        raise TailUnboundedError("trace-class bound needs a non-trivial Brownian part (a > 0)")


def heat_trace(table: SpectrumTable, t: float, tol: float | None = None) -> tuple[float, float]:
    """``sum_n e^{-t lambda_n}`` over the table with its error bound.

    The bound combines the Laplacian tail beyond the cutoff with the
    propagated quadrature error of every tabulated eigenvalue.
    """
    _require_tail(table)
    if not t > 0:
        raise ValueError("t must be positive")
    lam = np.array([md.lam for md in table.modes])
    mult = np.array([md.multiplicity for md in table.modes], dtype=float)
    errs = np.array([md.error for md in table.modes])
    terms = mult * np.exp(-t * lam)
    value = float(np.sum(terms))
    bound = table.tail_bound(t) + float(np.sum(terms * t * errs))
    if tol is not None and bound > tol:
        warnings.warn(f"heat-trace error bound {bound:.3g} exceeds tolerance {tol:.3g}", stacklevel=2)
    return value, bound


def kernel(table: SpectrumTable, x, y, t: float, tol: float = 1e-4, weights=None) -> np.ndarray:
    """Transition density ``p_t(x, y)`` with respect to the Riemannian measure,
    by zonal summation of the truncated eigenfunction expansion.

    ``weights(mode)``, if given, multiplies each mode's term (used to convolve
    the kernel with a zonal smoothing kernel).
    """
    _require_tail(table)
    if not t > 0:
        raise ValueError("t must be positive")
    m = table.manifold
    vol = m.volume()
    tail = table.tail_bound(t) / vol
    if tail > tol:
        raise ValueError(f"spectral truncation error {tail:.3g} exceeds {tol:.3g}; raise mu_cutoff")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def coef(md):
        w = 1.0 if weights is None else weights(md)
        return w * math.exp(-t * md.lam)

    if isinstance(m, Torus):
        diff = np.asarray(x, float) - np.asarray(y, float)
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])
        for md in table.modes:
            vecs = np.asarray(md.vectors, dtype=float)
            phase = np.tensordot(diff, vecs.T, axes=1) / m.scale
            out = out + coef(md) * np.sum(np.cos(phase), axis=-1)
        return out / vol
    if isinstance(m, Circle):
        d = m.geodesic_distance(x, y) / m.scale
        out = sum(md.multiplicity * coef(md) * np.cos(md.index * d) for md in table.modes)
    else:
        c = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
        out = sum(md.multiplicity * coef(md) * legendre(md.index, c) for md in table.modes)
    return np.asarray(out, dtype=float) / vol


# -- direct evaluation of the symmetrised jump generator -------------------------

@lru_cache(maxsize=None)
def _direction_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions on S^{d-1} (frame coordinates) with quadrature weights."""
    if d == 1:
        return np.array([[1.0]]), np.array([1.0])
    if d == 2:
        psi = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(psi), np.sin(psi)], axis=-1), np.full(n, 1.0 / n)
    if d == 3:
        x, w = gauss_legendre(max(4, n // 4))
        phi = 2.0 * np.pi * np.arange(n) / n
        ct = np.repeat(x, n)
        st = np.sqrt(1.0 - ct**2)
        ph = np.tile(phi, len(x))
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1)
        return dirs, np.repeat(w, n) / (2.0 * n)
    raise NotImplementedError("direction quadrature is implemented for d <= 3")


def jump_generator(m: Manifold, f, p, nu: RadialJumpMeasure, eps0: float = 0.0,
                   n_dir: int = 128, rtol: float = 1e-8) -> float:
    """Evaluate ``1/2 int [f(exp_p y) - 2 f(p) + f(exp_p(-y))] nu_p(dy)`` at a point.

    Directions are integrated with a product rule in frame coordinates and the
    radius with :func:`radial_quadrature`.  Works for any vectorised ``f``.
    """
    p = m.wrap(np.asarray(p, dtype=float))
    if isinstance(nu, Empty):
        return 0.0
    frame = m.canonical_frame(p)
    dirs, w = _direction_rule(m.dim, n_dir)
    tangents = dirs @ frame.basis.T
    f0 = float(np.asarray(f(p[None]))[0])

    def second_difference(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        v = r[:, None, None] * tangents[None, :, :]
        fp = np.asarray(f(m.exp_map(np.broadcast_to(p, v.shape[:-1] + p.shape), v)))
        fm = np.asarray(f(m.exp_map(np.broadcast_to(p, v.shape[:-1] + p.shape), -v)))
        return (0.5 * (fp + fm) - f0) @ w

    # below r0 the difference is all rounding noise; use its quadratic germ
    r0 = 1e-3 * m.scale
    curv = float(second_difference(r0)[0]) / r0**2

    def g(r):
        r = np.asarray(r, dtype=float)
        out = curv * r * r
        far = r >= r0
        if far.any():
            out[far] = second_difference(r[far])
        return out

    period = None if isinstance(m, Torus) else 2.0 * np.pi * m.scale
    return radial_quadrature(nu, g, eps0, period=period, rtol=rtol, atol=1e-12).value
