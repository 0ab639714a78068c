"""Linear base dynamics with exact tangent data.

Every base exposes the same batched interface, with points stored as
``(n, D)`` float arrays:

``apply(p)``, ``inverse(p)``
    the map and its inverse.
``jacobian(p)``
    ``(n, D, D)`` tangent maps in ambient coordinates.
``frame(p)``
    ``(n, D, D)`` matrices ``T`` taking adapted coordinates to ambient ones.
    Columns are ordered stable, center, unstable, and the adapted norm is the
    Euclidean norm of ``T^{-1} w``.
``wrap(p)``, ``delta(p, q)``
    canonical representatives and the shortest displacement ``q - p``.
``counts``
    ``(stable, center, unstable)`` dimensions.

Two families are provided: hyperbolic toral automorphisms
(:class:`LinearAnosov`) and the constant-roof suspension of a 2x2 one
(:class:`SuspensionFlow`), whose time-``N`` map serves as a base through
:class:`TimeMap`.  Stable vector fields and their translation flows are
:class:`ConstantField` and :class:`SuspensionField`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NotHyperbolicPattern, NotUnimodular, OrientationReversed

_EIG_TOL = 1e-9


def torus_wrap(p):
    """Reduce coordinates to [0, 1)."""
    q = p - np.floor(p)
    return np.where(q >= 1.0, 0.0, q)


def torus_delta(p, q):
    """Shortest representative of ``q - p`` on the torus."""
    d = np.asarray(q, float) - np.asarray(p, float)
    return d - np.round(d)


def _batch(p, dim):
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {p.shape}")
    return p


def _int_inverse(matrix):
    inv = np.linalg.inv(matrix.astype(float))
    rounded = np.rint(inv)
    if np.max(np.abs(inv - rounded)) > 1e-8:
        raise NotUnimodular("inverse is not an integer matrix")
    return rounded.astype(np.int64)


@dataclass(frozen=True)
class LinearAnosov:
    """Hyperbolic (or partially hyperbolic) toral automorphism.

    Attributes
    ----------
    matrix : (m, m) int array
    eigenvalues : (m,) float array
        Sorted ascending by absolute value.
    eigenvectors : (m, m) float array
        Unit columns matching ``eigenvalues``; sign fixed so the largest
        entry is positive.  These columns generate the positive half of each
        one-dimensional bundle.
    stable_count, center_count, unstable_count : int
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stable_count: int
    center_count: int
    unstable_count: int
    inverse_matrix: np.ndarray = field(repr=False)
    orientation_signs: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def counts(self):
        return (self.stable_count, self.center_count, self.unstable_count)

    @property
    def eigvec_inverse(self):
        return np.linalg.inv(self.eigenvectors)

    # points
    def apply(self, p):
        p = _batch(p, self.dim)
        return torus_wrap(p @ self.matrix.T.astype(float))

    def inverse(self, p):
        p = _batch(p, self.dim)
        return torus_wrap(p @ self.inverse_matrix.T.astype(float))

    def wrap(self, p):
        return torus_wrap(_batch(p, self.dim))

    def delta(self, p, q):
        return torus_delta(p, q)

    def random_points(self, rng, n):
        return rng.random((n, self.dim))

    # tangent data
    def jacobian(self, p):
        p = _batch(p, self.dim)
        return np.broadcast_to(self.matrix.astype(float), (p.shape[0], self.dim, self.dim))

    def inverse_jacobian(self, p):
        """Derivative of ``g^-1`` at ``p`` (the integer inverse matrix)."""
        p = _batch(p, self.dim)
        return np.broadcast_to(self.inverse_matrix.astype(float), (p.shape[0], self.dim, self.dim))

    def frame(self, p):
        p = _batch(p, self.dim)
        return np.broadcast_to(self.eigenvectors, (p.shape[0], self.dim, self.dim))

    def adapted_jacobian(self):
        return np.diag(self.eigenvalues)

    def exact_splitting(self, p=None, weak_count=1):
        """Constant invariant bundles as column bases.

        Returns a dict with keys ``s``, ``c``, ``u`` and the refinement of
        ``s`` into ``ss`` (strong) and ``ws`` (the ``weak_count`` weakest).
        """
        s, c, _ = self.counts
        vec = self.eigenvectors
        out = {"s": vec[:, :s], "c": vec[:, s:s + c], "u": vec[:, s + c:]}
        out["ss"] = vec[:, :s - weak_count]
        out["ws"] = vec[:, s - weak_count:s]
        return out


def make_linear_anosov(matrix, stable_count, unstable_count=1):
    """Validate an integer matrix and compute its eigendata.

    Parameters
    ----------
    matrix : array_like of int, shape (m, m)
    stable_count : int
        Number of eigenvalues of modulus below one.
    unstable_count : int
        Number of (strongest) eigenvalues treated as unstable; the rest in
        between form the center.

    Raises
    ------
    NotUnimodular, NotHyperbolicPattern, OrientationReversed
    """
    raw = np.asarray(matrix)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise NotHyperbolicPattern(f"matrix must be square, got shape {raw.shape}")
    if not np.all(np.equal(np.mod(raw, 1), 0)):
        raise NotUnimodular("matrix entries must be integers")
    mat = np.rint(raw).astype(np.int64)
    m = mat.shape[0]
    det = round(float(np.linalg.det(mat.astype(float))))
    if abs(det) != 1:
        raise NotUnimodular(f"|det| = {abs(det)} != 1")
    if stable_count < 1 or unstable_count < 1 or stable_count + unstable_count > m:
        raise NotHyperbolicPattern(
            f"stable_count={stable_count}, unstable_count={unstable_count} invalid for dimension {m}")

    vals, vecs = np.linalg.eig(mat.astype(float))
    if np.max(np.abs(vals.imag)) > _EIG_TOL:
        raise NotHyperbolicPattern("complex eigenvalues")
    vals, vecs = vals.real, vecs.real
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    mods = np.abs(vals)
    if np.any(np.diff(mods) <= _EIG_TOL):
        raise NotHyperbolicPattern(f"eigenvalue moduli not distinct: {mods}")
    if np.any(np.abs(mods - 1.0) <= _EIG_TOL):
        raise NotHyperbolicPattern(f"eigenvalue of modulus one: {mods}")
    s, u = stable_count, unstable_count
    if np.sum(mods < 1.0) != s:
        raise NotHyperbolicPattern(f"expected {s} contracting eigenvalues, moduli {mods}")
    if not np.all(mods[m - u:] > 1.0):
        raise NotHyperbolicPattern(f"expected {u} expanding eigenvalues, moduli {mods}")

    vecs = vecs / np.linalg.norm(vecs, axis=0)
    pivots = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivots, np.arange(m)])
    if np.any(vals[:s] <= 0.0):
        raise OrientationReversed(f"negative stable eigenvalue in {vals[:s]}")

    return LinearAnosov(
        matrix=mat,
        eigenvalues=vals,
        eigenvectors=vecs,
        stable_count=s,
        center_count=m - s - u,
        unstable_count=u,
        inverse_matrix=_int_inverse(mat),
        orientation_signs=np.sign(vals[:s]),
    )


# ---------------------------------------------------------------------------
# suspension flow
# ---------------------------------------------------------------------------

def _matrix_power_int(mat, inv, k):
    if k >= 0:
        return np.linalg.matrix_power(mat, k)
    return np.linalg.matrix_power(inv, -k)


@dataclass(frozen=True)
class SuspensionFlow:
    """Unit-speed flow on the mapping torus of a 2x2 hyperbolic matrix.

    Points are ``(x1, x2, s)`` with ``x`` on the 2-torus and ``s`` in
    [0, 1); the gluing is ``(x, 1) ~ (B x, 0)``.  Stable and unstable
    vectors at height ``s`` are measured against ``mu_s**s`` and
    ``mu_u**s`` so that the flow contracts the stable direction by exactly
    ``mu_s**t``.
    """

    fiber: LinearAnosov

    @property
    def dim(self):
        return 3

    @property
    def mu_s(self):
        return float(self.fiber.eigenvalues[0])

    @property
    def mu_u(self):
        return float(self.fiber.eigenvalues[1])

    @property
    def counts(self):
        return (1, 1, 1)

    def _shift(self, s_new):
        k = np.floor(s_new).astype(np.int64)
        return k, s_new - k

    def flow(self, p, t):
        p = _batch(p, 3)
        t = np.broadcast_to(np.asarray(t, float), p.shape[:1])
        k, s_new = self._shift(p[:, 2] + t)
        out = np.empty_like(p)
        for kk in np.unique(k):
            sel = k == kk
            B = _matrix_power_int(self.fiber.matrix, self.fiber.inverse_matrix, int(kk)).astype(float)
            out[sel, :2] = p[sel, :2] @ B.T
        out[:, :2] = torus_wrap(out[:, :2])
        out[:, 2] = np.where(s_new >= 1.0, 0.0, s_new)
        return out

    def flow_jacobian(self, p, t):
        p = _batch(p, 3)
        t = np.broadcast_to(np.asarray(t, float), p.shape[:1])
        k, _ = self._shift(p[:, 2] + t)
        jac = np.zeros((p.shape[0], 3, 3))
        jac[:, 2, 2] = 1.0
        for kk in np.unique(k):
            sel = k == kk
            jac[sel, :2, :2] = _matrix_power_int(
                self.fiber.matrix, self.fiber.inverse_matrix, int(kk)).astype(float)
        return jac

    def direction(self, p):
        """The generator of the flow: unit vector in ``s``."""
        p = _batch(p, 3)
        out = np.zeros_like(p)
        out[:, 2] = 1.0
        return out

    def frame(self, p):
        p = _batch(p, 3)
        s = p[:, 2]
        vec = self.fiber.eigenvectors
        T = np.zeros((p.shape[0], 3, 3))
        T[:, :2, 0] = vec[:, 0] * (self.mu_s ** -s)[:, None]
        T[:, :2, 2] = vec[:, 1] * (self.mu_u ** -s)[:, None]
        T[:, 2, 1] = 1.0
        return T

    def wrap(self, p):
        p = _batch(p, 3)
        return self.flow(p, 0.0)

    def delta(self, p, q):
        """Displacement ``q - p`` assuming the points are close."""
        p, q = _batch(p, 3), _batch(q, 3)
        ds = q[:, 2] - p[:, 2]
        k = np.round(ds).astype(np.int64)
        # bring q to the sheet of p
        q_adj = q.copy()
        for kk in np.unique(k):
            if kk == 0:
                continue
            sel = k == kk
            q_adj[sel] = _unwrap_sheet(self, q[sel], int(kk))
        d = q_adj - p
        d[:, :2] -= np.round(d[:, :2])
        return d

    def random_points(self, rng, n):
        return rng.random((n, 3))


def _unwrap_sheet(flow, q, k):
    # (x, s) is the same point as (B^k x, s - k)
    B = _matrix_power_int(flow.fiber.matrix, flow.fiber.inverse_matrix, k).astype(float)
    out = q.copy()
    out[:, :2] = q[:, :2] @ B.T
    out[:, 2] = q[:, 2] - k
    return out


@dataclass(frozen=True)
class TimeMap:
    """Time-``N`` map of a suspension flow, seen as a base map."""

    flow: SuspensionFlow
    N: int

    @property
    def dim(self):
        return 3

    @property
    def counts(self):
        return (1, 1, 1)

    def apply(self, p):
        return self.flow.flow(p, float(self.N))

    def inverse(self, p):
        return self.flow.flow(p, -float(self.N))

    def jacobian(self, p):
        return self.flow.flow_jacobian(p, float(self.N))

    def inverse_jacobian(self, p):
        return self.flow.flow_jacobian(p, -float(self.N))

    def frame(self, p):
        return self.flow.frame(p)

    def wrap(self, p):
        return self.flow.wrap(p)

    def delta(self, p, q):
        return self.flow.delta(p, q)

    def random_points(self, rng, n):
        return self.flow.random_points(rng, n)

    def adapted_jacobian(self):
        return np.diag([self.flow.mu_s ** self.N, 1.0, self.flow.mu_u ** self.N])


# ---------------------------------------------------------------------------
# stable vector fields and their flows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantField:
    """Constant vector field ``epsilon * direction`` on a torus-like base.

    ``wrap`` is the base's canonicalization, so the same class serves
    torus bases and the stages of a tower.
    """

    base: object
    direction: np.ndarray
    epsilon: float

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=float(epsilon))

    def value(self, p):
        p = np.atleast_2d(p)
        return np.broadcast_to(self.epsilon * self.direction, p.shape).copy()

    def sigma(self, p, t):
        p = np.atleast_2d(np.asarray(p, float))
        t = np.broadcast_to(np.asarray(t, float), p.shape[:1])
        return self.base.wrap(p + t[:, None] * (self.epsilon * self.direction))

    def sigma_jacobian(self, p, t):
        p = np.atleast_2d(p)
        return np.broadcast_to(np.eye(p.shape[1]), (p.shape[0], p.shape[1], p.shape[1]))


@dataclass(frozen=True)
class SuspensionField:
    """Stable field ``epsilon * mu_s**(-s) * e_s`` on the suspension.

    The weight ``mu_s**(-s)`` makes the field continuous across the roof
    and gives it constant length ``epsilon`` in adapted coordinates.
    """

    flow: SuspensionFlow
    epsilon: float

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=float(epsilon))

    @property
    def e_s(self):
        return self.flow.fiber.eigenvectors[:, 0]

    def beta(self, s):
        return self.flow.mu_s ** (-np.asarray(s, float))

    def value(self, p):
        p = _batch(p, 3)
        out = np.zeros_like(p)
        out[:, :2] = (self.epsilon * self.beta(p[:, 2]))[:, None] * self.e_s
        return out

    def sigma(self, p, t):
        p = _batch(p, 3)
        t = np.broadcast_to(np.asarray(t, float), p.shape[:1])
        out = p.copy()
        out[:, :2] = torus_wrap(p[:, :2] + (t * self.epsilon * self.beta(p[:, 2]))[:, None] * self.e_s)
        return out

    def sigma_jacobian(self, p, t):
        p = _batch(p, 3)
        t = np.broadcast_to(np.asarray(t, float), p.shape[:1])
        jac = np.broadcast_to(np.eye(3), (p.shape[0], 3, 3)).copy()
        dbeta = -np.log(self.flow.mu_s) * self.beta(p[:, 2])
        jac[:, :2, 2] = (t * self.epsilon * dbeta)[:, None] * self.e_s
        return jac


def sigma_flow(field, p, t):
    """Time-``t`` map of the flow generated by ``field``."""
    return field.sigma(p, t)
