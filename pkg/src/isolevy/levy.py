"""Isotropic Lévy characteristics ``(0, a I, nu)``.

The jump measure is described by its radial part ``nu_rad`` on ``(0, inf)``;
the direction of a jump is always uniform on the unit sphere of R^d, which
makes ``nu`` rotation invariant by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import zeta

from .quadrature import QuadratureError, adaptive_gauss_legendre


class NoJumpsError(ValueError):
    """Raised when sampling from a truncated measure of zero total rate."""


class RadialJumpMeasure:
    """Radial part of an isotropic Lévy measure."""

    family: str = ""

    def rate_above(self, eps: float) -> float:
        """``nu_rad([eps, inf))``."""
        raise NotImplementedError

    def sample_radius(self, eps: float, u: np.ndarray) -> np.ndarray:
        """Inverse CDF of nu_rad restricted to ``[eps, inf)``; ``u`` in [0, 1)."""
        raise NotImplementedError

    def small_jump_moment(self, eps: float) -> float:
        """``int_{r < eps} r^2 nu_rad(dr)``, the size of the dropped small jumps."""
        raise NotImplementedError

    @property
    def is_empty(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Empty(RadialJumpMeasure):
    family = "empty"

    def rate_above(self, eps):
        return 0.0

    def sample_radius(self, eps, u):
        raise NoJumpsError("empty jump measure")

    def small_jump_moment(self, eps):
        return 0.0

    @property
    def is_empty(self):
        return True

    def to_dict(self):
        return {"family": "empty"}


@dataclass(frozen=True)
class Atom(RadialJumpMeasure):
    """All jumps have length ``radius``; they arrive at rate ``rate``."""

    radius: float
    rate: float

    family = "atom"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("atom radius must be positive")
        if not self.rate > 0:
            raise ValueError("atom rate must be positive")

    def rate_above(self, eps):
        return self.rate if self.radius >= eps else 0.0

    def sample_radius(self, eps, u):
        if self.radius < eps:
            raise NoJumpsError("atom lies below the truncation level")
        return np.full(np.shape(u), float(self.radius))

    def small_jump_moment(self, eps):
        return self.rate * self.radius**2 if self.radius < eps else 0.0

    def to_dict(self):
        return {"family": "atom", "radius": self.radius, "rate": self.rate}


@dataclass(frozen=True)
class Stable(RadialJumpMeasure):
    """Radial density ``intensity * r**(-1 - alpha)`` on ``(0, inf)``."""

    alpha: float
    intensity: float

    family = "stable"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("stable index must lie in (0, 2)")
        if not self.intensity > 0:
            raise ValueError("stable intensity must be positive")

    @property
    def r_max(self) -> float:
        return math.inf

    def rate_above(self, eps):
        return self.intensity * eps ** (-self.alpha) / self.alpha

    def sample_radius(self, eps, u):
        return eps * (1.0 - np.asarray(u)) ** (-1.0 / self.alpha)

    def small_jump_moment(self, eps):
        return self.intensity * eps ** (2.0 - self.alpha) / (2.0 - self.alpha)

    def to_dict(self):
        return {"family": "stable", "alpha": self.alpha, "intensity": self.intensity}


@dataclass(frozen=True)
class TruncatedStable(RadialJumpMeasure):
    """Stable radial density with a hard cutoff ``r <= r_max``."""

    alpha: float
    intensity: float
    r_max: float

    family = "truncated_stable"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("stable index must lie in (0, 2)")
        if not self.intensity > 0:
            raise ValueError("stable intensity must be positive")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")

    def rate_above(self, eps):
        if eps > self.r_max:
            return 0.0
        return self.intensity * (eps ** (-self.alpha) - self.r_max ** (-self.alpha)) / self.alpha

    def sample_radius(self, eps, u):
        if eps > self.r_max:
            raise NoJumpsError("truncation level above r_max")
        lo, hi = eps ** (-self.alpha), self.r_max ** (-self.alpha)
        return (lo - np.asarray(u) * (lo - hi)) ** (-1.0 / self.alpha)

    def small_jump_moment(self, eps):
        r = min(eps, self.r_max)
        return self.intensity * r ** (2.0 - self.alpha) / (2.0 - self.alpha)

    def to_dict(self):
        return {"family": "truncated_stable", "alpha": self.alpha,
                "intensity": self.intensity, "r_max": self.r_max}


def jump_measure_from_dict(spec: dict) -> RadialJumpMeasure:
    spec = dict(spec)
    family = spec.pop("family", "empty")
    builders = {"empty": Empty, "atom": Atom, "stable": Stable, "truncated_stable": TruncatedStable}
    if family not in builders:
        raise ValueError(f"unknown jump family {family!r}")
    try:
        return builders[family](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {family} jumps: {exc}") from None


@dataclass(frozen=True)
class LevyCharacteristics:
    """The triple (0, a I, nu) of an isotropic Lévy process on R^d."""

    a: float
    jumps: RadialJumpMeasure
    dim: int

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError("diffusion coefficient must be non-negative")
        if self.a == 0 and self.jumps.is_empty:
            raise ValueError("characteristics with a = 0 need a jump measure")
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")

    def with_a(self, a: float) -> LevyCharacteristics:
        return LevyCharacteristics(a, self.jumps, self.dim)


@dataclass(frozen=True)
class TruncatedMeasure:
    """Restriction of a radial jump measure to ``[epsilon, inf)``."""

    source: RadialJumpMeasure
    epsilon: float
    total_rate: float


def truncate(nu: RadialJumpMeasure, eps: float) -> TruncatedMeasure:
    """Drop jumps shorter than ``eps``; the rest form a compound Poisson measure."""
    if not eps > 0:
        raise ValueError(f"truncation level must be positive, got {eps!r}")
    return TruncatedMeasure(nu, float(eps), float(nu.rate_above(eps)))


def uniform_directions(d: int, rng: np.random.Generator, size) -> np.ndarray:
    shape = tuple(np.atleast_1d(size))
    if d == 1:
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)[..., None]
    g = rng.standard_normal(shape + (d,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_jump(tm: TruncatedMeasure, d: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw jump vectors in R^d from the normalised truncated measure.

    The radius is drawn by inverse CDF, the direction uniformly on S^{d-1}.
    """
    if tm.total_rate <= 0:
        raise NoJumpsError("truncated measure has zero total rate")
    shape = () if size is None else tuple(np.atleast_1d(size))
    radius = tm.source.sample_radius(tm.epsilon, rng.random(shape))
    direction = uniform_directions(d, rng, shape if shape else (1,))
    if not shape:
        direction = direction[0]
    return np.asarray(radius)[..., None] * direction


class RadialIntegral(NamedTuple):
    value: float
    error: float


def radial_quadrature(
    nu: RadialJumpMeasure,
    g: Callable[[np.ndarray], np.ndarray],
    eps0: float = 0.0,
    *,
    period: float | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-15,
    g_sup: float | None = None,
) -> RadialIntegral:
    """Integrate ``g`` against ``nu_rad`` over ``[eps0, inf)``.

    ``g`` must be vectorised and satisfy ``|g(r)| <= C min(1, r**2)``.  For
    power-law families the range is split into dyadic panels below 1, with a
    quadratic model of ``g`` on the last panel next to the origin.  Above 1,
    a ``period`` (when ``g`` is periodic) lets the whole tail be folded onto
    one period with Hurwitz zeta weights; otherwise the range is extended
    until ``g_sup * nu_rad([R, inf))`` falls below tolerance.

    Raises
    ------
    QuadratureError
        When the error estimate cannot be brought below
        ``max(atol, rtol * |value|)``.
    """
    if eps0 < 0:
        raise ValueError("eps0 must be non-negative")
    if isinstance(nu, Empty):
        return RadialIntegral(0.0, 0.0)
    if isinstance(nu, Atom):
        if nu.radius < eps0:
            return RadialIntegral(0.0, 0.0)
        return RadialIntegral(float(nu.rate * np.asarray(g(np.array([nu.radius])))[0]), 0.0)
    if isinstance(nu, (Stable, TruncatedStable)):
        return _power_law_quadrature(nu.intensity, nu.alpha, nu.r_max, g, eps0,
                                     period, rtol, atol, g_sup)
    raise TypeError(f"unsupported jump measure {nu!r}")


def _power_law_quadrature(c, alpha, hi, g, lo, period, rtol, atol, g_sup):
    if lo >= hi:
        return RadialIntegral(0.0, 0.0)

    def integrand(r):
        return g(r) * (c * r ** (-1.0 - alpha))

    sub_rtol = 0.1 * rtol
    total, err = 0.0, 0.0
    top = min(1.0, hi)

    if lo == 0.0:
        kappa_fn = lambda r: float(np.asarray(g(np.array([r])))[0]) / r**2
        model, model_err = 0.0, math.inf
        for j in range(200):
            b = top / 2.0**j
            a = b / 2.0
            v, e = adaptive_gauss_legendre(integrand, a, b, rtol=sub_rtol, atol=atol)
            total += v
            err += e
            weight = c * a ** (2.0 - alpha) / (2.0 - alpha)
            k_near = kappa_fn(a / 2.0)
            model = k_near * weight
            model_err = abs(kappa_fn(a) - k_near) * weight
            if j >= 3 and model_err <= 0.01 * rtol * abs(total + model) + atol:
                break
        total += model
        err += model_err
    elif lo < top:
        a = lo
        while a < top:
            b = min(2.0 * a, top)
            v, e = adaptive_gauss_legendre(integrand, a, b, rtol=sub_rtol, atol=atol)
            total += v
            err += e
            a = b

    start = max(lo, top)
    if math.isfinite(hi):
        if hi > start:
            n_init = max(1, int(math.ceil((hi - start) / (period / 4.0 if period else 1.0))))
            v, e = adaptive_gauss_legendre(integrand, start, hi, rtol=sub_rtol, atol=atol,
                                           initial=min(n_init, 4096))
            total += v
            err += e
    elif period is not None:
        if not period > 0:
            raise ValueError("period must be positive")
        weight = c * period ** (-1.0 - alpha)

        def folded(s):
            return g(start + s) * zeta(1.0 + alpha, (start + s) / period)

        v, e = adaptive_gauss_legendre(folded, 0.0, period, rtol=sub_rtol, atol=atol / weight, initial=4)
        total += weight * v
        err += weight * e
    else:
        r_cap = 1e6
        a = start
        while True:
            b = 2.0 * a
            try:
                v, e = adaptive_gauss_legendre(integrand, a, b, rtol=sub_rtol,
                                               atol=max(atol, 0.01 * rtol * abs(total)),
                                               initial=min(4096, max(1, int(a))))
            except QuadratureError as exc:
                raise QuadratureError("tail panels did not converge", total + exc.value,
                                      err + exc.error) from None
            total += v
            err += e
            a = b
            sup = g_sup
            if sup is None:
                probe = np.linspace(a / 2.0, a, 257)
                sup = float(np.max(np.abs(g(probe))))
            bound = sup * c * a ** (-alpha) / alpha
            if bound <= rtol * abs(total) + atol:
                err += bound
                break
            if a >= r_cap:
                raise QuadratureError("tail bound did not fall below tolerance", total, err + bound)

    if err > max(atol, rtol * abs(total)) * 10:
        raise QuadratureError("radial quadrature missed its tolerance", total, err)
    return RadialIntegral(float(total), float(err))
