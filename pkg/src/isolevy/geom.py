"""Closed-form geometry of the model manifolds and their orthonormal frame bundles.

Three model spaces are supported: the circle S^1 of radius ``scale``, the
round sphere S^2 of radius ``scale`` and the flat torus T^d whose factors have
circumference ``2*pi*scale``.  On all of them geodesics and parallel transport
are available in closed form, so flowing a frame along a horizontal vector
field is exact up to floating point.

Array conventions
-----------------
Every operation is vectorised over leading batch axes.

* points have a trailing coordinate axis: ``(..., 1)`` angles in ``[0, 2*pi)``
  on the circle, ``(..., 3)`` unit vectors on the sphere, ``(..., d)`` lengths
  in ``[0, 2*pi*scale)`` on the torus;
* tangent vectors are embedding vectors in metric units: ``(..., 1)`` arc
  length on the circle, ``(..., 3)`` on the sphere, ``(..., d)`` on the torus;
* frames hold ``base`` and a ``basis`` of shape ``(..., e, d)`` whose columns
  are the frame vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector in embedding coordinates, attached to ``base``."""

    base: np.ndarray
    components: np.ndarray


@dataclass(frozen=True)
class OrthonormalFrame:
    """A point of the frame bundle: a base point and an orthonormal basis of
    its tangent space (columns of ``basis``)."""

    base: np.ndarray
    basis: np.ndarray

    def __getitem__(self, idx) -> OrthonormalFrame:
        return OrthonormalFrame(self.base[idx], self.basis[idx])

    def __len__(self) -> int:
        return len(self.base)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.base.shape[:-1]


def _wrap(x: np.ndarray, period: float) -> np.ndarray:
    y = np.mod(x, period)
    # np.mod can round tiny negatives up to exactly `period`
    return np.where(y >= period, 0.0, y)


def _as_components(p: np.ndarray, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        if np.shape(v.base) != np.shape(p) or not np.allclose(v.base, p, rtol=0.0, atol=1e-12):
            raise ValueError("tangent vector is not based at the given point")
        return np.asarray(v.components, dtype=float)
    return np.asarray(v, dtype=float)


class Manifold:
    """Base class for the model manifolds.

    Subclasses provide array kernels ``_exp`` and ``_flow``; the public methods
    handle type conversion and argument checks.
    """

    kind: str
    scale: float
    dim: int
    coord_dim: int
    embed_dim: int

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale!r}")

    # -- invariants -----------------------------------------------------------
    def volume(self) -> float:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    # -- public operations ----------------------------------------------------
    def exp_map(self, p, v) -> np.ndarray:
        """Riemannian exponential ``exp_p(v)`` along the closed-form geodesic."""
        p = np.asarray(p, dtype=float)
        return self._exp(p, _as_components(p, v))

    def frame_apply(self, frame: OrthonormalFrame, x) -> TangentVector:
        """The frame as an isometry R^d -> T_pM: returns ``sum_i x_i basis_i``."""
        x = np.asarray(x, dtype=float)
        v = np.einsum("...ij,...j->...i", frame.basis, x)
        return TangentVector(frame.base, v)

    def horizontal_flow(self, frame: OrthonormalFrame, x) -> OrthonormalFrame:
        """Time-one flow of the canonical horizontal field H_x.

        The base point moves to ``exp_p(r(x))`` and the basis is parallel
        transported along that geodesic.
        """
        x = np.asarray(x, dtype=float)
        base, basis = self._flow(np.asarray(frame.base, float), np.asarray(frame.basis, float), x)
        return OrthonormalFrame(base, basis)

    def geodesic_distance(self, p, q) -> np.ndarray:
        raise NotImplementedError

    def sample_uniform(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw points from the normalised Riemannian measure."""
        raise NotImplementedError

    def canonical_frame(self, p) -> OrthonormalFrame:
        raise NotImplementedError

    def random_frame(self, p, rng: np.random.Generator) -> OrthonormalFrame:
        """A frame at ``p`` with basis drawn from Haar measure on O(d)."""
        raise NotImplementedError

    def wrap(self, p) -> np.ndarray:
        """Map coordinates into the fundamental domain."""
        raise NotImplementedError

    def gram_error(self, frame: OrthonormalFrame) -> np.ndarray:
        """Max-abs deviation of the frame's Gram matrix from the identity."""
        b = np.asarray(frame.basis)
        gram = np.einsum("...ki,...kj->...ij", b, b)
        return np.abs(gram - np.eye(self.dim)).max(axis=(-2, -1))

    # -- kernels --------------------------------------------------------------
    def _exp(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _flow(self, base: np.ndarray, basis: np.ndarray, x: np.ndarray):
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(Manifold):
    scale: float = 1.0

    kind = "circle"
    dim = 1
    coord_dim = 1
    embed_dim = 1

    def volume(self) -> float:
        return TWO_PI * self.scale

    def diameter(self) -> float:
        return np.pi * self.scale

    def wrap(self, p) -> np.ndarray:
        return _wrap(np.asarray(p, dtype=float), TWO_PI)

    def _exp(self, p, v):
        return _wrap(p + v / self.scale, TWO_PI)

    def _flow(self, base, basis, x):
        v = basis[..., 0, :1] * x[..., :1]
        return self._exp(base, v), basis

    def geodesic_distance(self, p, q):
        p = np.asarray(p, dtype=float)[..., 0]
        q = np.asarray(q, dtype=float)[..., 0]
        delta = np.mod(np.abs(p - q), TWO_PI)
        return self.scale * np.minimum(delta, TWO_PI - delta)

    def sample_uniform(self, rng, size=None):
        shape = () if size is None else tuple(np.atleast_1d(size))
        return rng.uniform(0.0, TWO_PI, size=shape + (1,))

    def canonical_frame(self, p):
        p = self.wrap(p)
        return OrthonormalFrame(p, np.ones(p.shape[:-1] + (1, 1)))

    def random_frame(self, p, rng):
        p = self.wrap(p)
        sign = rng.choice([-1.0, 1.0], size=p.shape[:-1])
        return OrthonormalFrame(p, sign[..., None, None] * np.ones(p.shape[:-1] + (1, 1)))


@dataclass(frozen=True)
class Sphere2(Manifold):
    scale: float = 1.0

    kind = "sphere"
    dim = 2
    coord_dim = 3
    embed_dim = 3

    def volume(self) -> float:
        return 4.0 * np.pi * self.scale**2

    def diameter(self) -> float:
        return np.pi * self.scale

    def wrap(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def _geodesic(self, p, v):
        """Endpoint of the geodesic from p with initial velocity v, plus the
        unit direction and turning angle needed for parallel transport."""
        nv = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
        theta = nv / self.scale
        moving = nv > 0
        e = np.divide(v, nv, out=np.zeros_like(v), where=moving)
        c, s = np.cos(theta), np.sin(theta)
        q = c * p + s * e
        q = q / np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
        q = np.where(moving, q, p)
        return q, e, c, s

    def _exp(self, p, v):
        return self._geodesic(p, v)[0]

    def _flow(self, base, basis, x):
        # frame-coordinate form of the geodesic: since the basis is orthonormal,
        # |r(x)| = |x| and the direction is u0 b1 + u1 b2 with u = x/|x|
        b1 = basis[..., :, 0]
        b2 = basis[..., :, 1]
        nx = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)[..., None]
        moving = nx > 0
        u = np.divide(x, nx, out=np.zeros_like(x), where=moving)
        u[..., 0:1][~moving] = 1.0
        u0, u1 = u[..., 0:1], u[..., 1:2]
        e = u0 * b1 + u1 * b2
        w = u0 * b2 - u1 * b1  # fixed by the transport
        theta = nx / self.scale
        c, s = np.cos(theta), np.sin(theta)
        q = c * base + s * e
        e = c * e - s * base
        q /= np.sqrt(_dot(q, q))
        nb1, nb2 = _gram_schmidt_tangent(q, u0 * e - u1 * w, u1 * e + u0 * w)
        out = np.empty(np.broadcast_shapes(basis.shape, q.shape + (2,)))
        out[..., :, 0] = nb1
        out[..., :, 1] = nb2
        if not moving.all():
            still = ~moving[..., 0]
            q[still] = base[still]
            out[still] = basis[still]
        return q, out

    def geodesic_distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        dot = np.sum(p * q, axis=-1)
        return self.scale * np.arctan2(cross, dot)

    def sample_uniform(self, rng, size=None):
        shape = () if size is None else tuple(np.atleast_1d(size))
        g = rng.standard_normal(shape + (3,))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def canonical_frame(self, p):
        p = self.wrap(p)
        e1 = np.zeros_like(p)
        e1[..., 0] = 1.0
        e3 = np.zeros_like(p)
        e3[..., 2] = 1.0
        # e1 degenerates near the x-poles; fall back to e3 there
        seed = np.where(np.abs(p[..., :1]) > 0.9, e3, e1)
        b1 = seed - np.sum(seed * p, axis=-1, keepdims=True) * p
        b1 = b1 / np.linalg.norm(b1, axis=-1, keepdims=True)
        b2 = np.cross(p, b1)
        return OrthonormalFrame(p, np.stack([b1, b2], axis=-1))

    def random_frame(self, p, rng):
        frame = self.canonical_frame(p)
        shape = frame.base.shape[:-1]
        phi = rng.uniform(0.0, TWO_PI, size=shape)[..., None]
        sign = rng.choice([-1.0, 1.0], size=shape)[..., None]
        c1, c2 = frame.basis[..., 0], frame.basis[..., 1]
        b1 = np.cos(phi) * c1 + np.sin(phi) * c2
        b2 = sign * (-np.sin(phi) * c1 + np.cos(phi) * c2)
        return OrthonormalFrame(frame.base, np.stack([b1, b2], axis=-1))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)[..., None]


def _gram_schmidt_tangent(p, b1, b2):
    """Orthonormalise (b1, b2) within the tangent plane at p (in place)."""
    b1 -= _dot(b1, p) * p
    b1 /= np.sqrt(_dot(b1, b1))
    b2 -= _dot(b2, p) * p
    b2 -= _dot(b2, b1) * b1
    b2 /= np.sqrt(_dot(b2, b2))
    return b1, b2


@dataclass(frozen=True)
class Torus(Manifold):
    dim: int = 2
    scale: float = 1.0

    kind = "torus"

    def __post_init__(self):
        super().__post_init__()
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"torus dimension must be a positive integer, got {self.dim!r}")

    @property
    def coord_dim(self) -> int:
        return self.dim

    @property
    def embed_dim(self) -> int:
        return self.dim

    @property
    def side(self) -> float:
        return TWO_PI * self.scale

    def volume(self) -> float:
        return self.side**self.dim

    def diameter(self) -> float:
        return np.pi * self.scale * np.sqrt(self.dim)

    def wrap(self, p):
        return _wrap(np.asarray(p, dtype=float), self.side)

    def _exp(self, p, v):
        return _wrap(p + v, self.side)

    def _flow(self, base, basis, x):
        v = np.einsum("...ij,...j->...i", basis, x)
        return self._exp(base, v), basis

    def geodesic_distance(self, p, q):
        delta = np.mod(np.abs(np.asarray(p, float) - np.asarray(q, float)), self.side)
        delta = np.minimum(delta, self.side - delta)
        return np.sqrt(np.sum(delta * delta, axis=-1))

    def sample_uniform(self, rng, size=None):
        shape = () if size is None else tuple(np.atleast_1d(size))
        return rng.uniform(0.0, self.side, size=shape + (self.dim,))

    def canonical_frame(self, p):
        p = self.wrap(p)
        basis = np.broadcast_to(np.eye(self.dim), p.shape[:-1] + (self.dim, self.dim)).copy()
        return OrthonormalFrame(p, basis)

    def random_frame(self, p, rng):
        p = self.wrap(p)
        g = rng.standard_normal(p.shape[:-1] + (self.dim, self.dim))
        q, r = np.linalg.qr(g)
        # sign fix makes the QR factor Haar distributed
        q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
        return OrthonormalFrame(p, q)


def make_manifold(kind: str, scale: float = 1.0, dim: int | None = None) -> Manifold:
    """Build a model manifold from its kind name (``circle``, ``sphere``, ``torus``)."""
    kind = kind.lower()
    if kind in ("circle", "s1"):
        if dim not in (None, 1):
            raise ValueError("circle has dimension 1")
        return Circle(scale)
    if kind in ("sphere", "sphere2", "s2"):
        if dim not in (None, 2):
            raise ValueError("sphere has dimension 2")
        return Sphere2(scale)
    if kind == "torus":
        return Torus(2 if dim is None else dim, scale)
    raise ValueError(f"unknown manifold kind {kind!r}")
