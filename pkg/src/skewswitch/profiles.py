"""One-dimensional profiles driving the skew product.

``h`` is the circle map acting on the fiber coordinate, ``tau`` the shear
time used on the fundamental domain, and ``rho`` the flow-time ramp for
the Anosov-flow variant.  All three are given by closed formulas so that
their derivatives are exact.

``h`` has three branches::

    h(z) = lam * z               0 <= z <= c
    h(z) = convex blend          c <  z <  a
    h(z) = 1 - mu * (1 - z)      a <= z <= 1

On the blend ``h'`` rises monotonically from ``lam`` to ``mu`` along an
incomplete-beta ramp whose derivative vanishes at both ends, so ``h`` is
C^2 and convex, and ``h(z) < z`` on (0, 1) follows from convexity.  The switch point ``c`` is tied to the orbit of ``a`` by
``c = h^3(a) / 2`` and is found by fixed-point iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import betainc, betaln

from .errors import BlendNotMonotone, BranchOverlap, ConstantsOutOfOrder, OutOfDomain

_DOMAIN_TOL = 1e-12


def smoothstep(t):
    """Quintic smoothstep ``6t^5 - 15t^4 + 10t^3`` clipped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_prime(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _blend_coefficients(c, a, lam, mu, sharp=3.0):
    """Shape ``(alpha, beta)`` of the derivative ramp on ``[c, a]``.

    On the blend ``h' = lam + (mu - lam) * I_t(alpha, beta)`` with ``I`` the
    regularized incomplete beta function and ``t = (z - c) / (a - c)``.  The
    mean of ``I_t`` over [0, 1] is ``beta / (alpha + beta)``, which is fixed
    by requiring ``h`` to reach ``1 - mu (1 - a)`` at ``a``.
    """
    width = a - c
    chord = (1.0 - mu * (1.0 - a) - lam * c) / width
    m = (chord - lam) / (mu - lam)
    if not 0.0 < m < 1.0:
        raise BlendNotMonotone(
            f"chord slope {chord:.6g} over [c, a] must lie strictly between lambda and mu")
    if m <= 0.5:
        return np.array([sharp * (1.0 - m) / m, sharp])
    return np.array([sharp, sharp * m / (1.0 - m)])


@dataclass(frozen=True)
class ShearProfile:
    """The triple (h, tau, rho) with its constants.

    Construct with :func:`build_profile`; the dataclass itself does not
    validate.
    """

    lam: float
    eta: float
    mu: float
    a: float
    c: float
    N: int = 1
    coeffs: np.ndarray = field(repr=False, default=None)
    grid: int = 10_000

    # -- h -------------------------------------------------------------
    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < -_DOMAIN_TOL) or np.any(z > 1.0 + _DOMAIN_TOL):
            raise OutOfDomain(f"profile argument outside [0, 1]: {z.min()}..{z.max()}")
        return np.clip(z, 0.0, 1.0)

    def _blend(self, z, order=0):
        width = self.a - self.c
        t = np.clip((z - self.c) / width, 0.0, 1.0)
        al, be = self.coeffs
        span = self.mu - self.lam
        if order == 0:
            ramp = t * betainc(al, be, t) - al / (al + be) * betainc(al + 1.0, be, t)
            return self.lam * z + span * width * ramp
        if order == 1:
            return self.lam + span * betainc(al, be, t)
        if order == 2:
            with np.errstate(divide="ignore"):
                return span * np.exp((al - 1.0) * np.log(t) + (be - 1.0) * np.log1p(-t)
                                     - betaln(al, be)) / width
        raise ValueError("order must be 0, 1 or 2")

    def h(self, z):
        z = self._check(z)
        out = np.where(z <= self.c, self.lam * z, 1.0 - self.mu * (1.0 - z))
        mid = (z > self.c) & (z < self.a)
        if np.any(mid):
            out = np.where(mid, self._blend(z), out)
        return out[()] if out.ndim == 0 else out

    def dh(self, z):
        z = self._check(z)
        out = np.where(z <= self.c, self.lam, self.mu) * np.ones_like(z)
        mid = (z > self.c) & (z < self.a)
        if np.any(mid):
            out = np.where(mid, self._blend(z, 1), out)
        return out[()] if out.ndim == 0 else out

    def h_iter(self, z, k):
        for _ in range(k):
            z = self.h(z)
        return z

    def h_inverse(self, w):
        """Solve ``h(z) = w``: analytic on the outer branches, Newton on the
        blend."""
        w = self._check(w)
        lo_edge, hi_edge = self.lam * self.c, 1.0 - self.mu * (1.0 - self.a)
        out = np.where(w <= lo_edge, w / self.lam, 1.0 - (1.0 - w) / self.mu)
        mid = (w > lo_edge) & (w < hi_edge)
        if np.any(mid):
            # h is convex on the blend, so Newton from the right end
            # decreases monotonically onto the root
            target = w[mid]
            z = np.full_like(target, self.a)
            for _ in range(100):
                step = (self._blend(z) - target) / self._blend(z, 1)
                z = np.clip(z - step, self.c, self.a)
                if np.all(np.abs(step) <= 1e-15 * np.maximum(z, 1e-300)):
                    break
            out = out.copy()
            out[mid] = z
        return out[()] if out.ndim == 0 else out

    # -- branch points -------------------------------------------------
    @cached_property
    def ha(self):
        return float(self.h(self.a))

    @cached_property
    def h2a(self):
        return float(self.h_iter(self.a, 2))

    @cached_property
    def h3a(self):
        return float(self.h_iter(self.a, 3))

    # -- tau, rho --------------------------------------------------------
    def tau(self, z):
        z = self._check(z)
        lo = self.h2a
        return smoothstep((z - lo) / (self.a - lo))

    def dtau(self, z):
        z = self._check(z)
        lo = self.h2a
        width = self.a - lo
        return smoothstep_prime((z - lo) / width) / width

    def rho(self, z):
        z = self._check(z)
        lo, hi = self.h3a, self.h2a
        return 1.0 + (self.N - 1) * smoothstep((z - lo) / (hi - lo))

    def drho(self, z):
        z = self._check(z)
        lo, hi = self.h3a, self.h2a
        width = hi - lo
        return (self.N - 1) * smoothstep_prime((z - lo) / width) / width

    # -- diagnostics ----------------------------------------------------
    def margins(self):
        """Grid diagnostics used by manifests and the profile suite."""
        z = np.linspace(0.0, 1.0, self.grid)
        inner = z[1:-1]
        return {
            "min_gap_z_minus_h": float(np.min(inner - self.h(inner))),
            "min_dh": float(np.min(self.dh(z))),
            "max_dh": float(np.max(self.dh(z))),
            "h3a_minus_c": self.h3a - self.c,
        }

    def branch_points(self):
        return {"c": self.c, "a": self.a, "h(a)": self.ha, "h2(a)": self.h2a, "h3(a)": self.h3a}

    def constants(self):
        return {"lambda": self.lam, "eta": self.eta, "mu": self.mu, "a": self.a, "c": self.c, "N": self.N}


def build_profile(lam, eta, mu, a, N=1, smoothness_grid=10_000, max_iter=200):
    """Build and validate a :class:`ShearProfile`.

    Raises
    ------
    ConstantsOutOfOrder
        unless ``0 < lam < eta < 1 < mu`` and ``0 < a < 1`` and ``h(a) > 0``.
    BlendNotMonotone
        if the blend has a non-positive slope, or fails ``h(z) < z``, on the grid.
    BranchOverlap
        if the final ``c`` does not satisfy ``c < h^3(a)``.
    """
    if not (0.0 < lam < eta < 1.0 < mu):
        raise ConstantsOutOfOrder(
            f"need 0 < lambda < eta < 1 < mu, got lambda={lam}, eta={eta}, mu={mu}")
    if not (0.0 < a < 1.0):
        raise ConstantsOutOfOrder(f"need 0 < a < 1, got a={a}")
    if int(N) != N or N < 1:
        raise ConstantsOutOfOrder(f"N must be a positive integer, got {N}")
    ha = 1.0 - mu * (1.0 - a)
    if ha <= 0.0:
        raise ConstantsOutOfOrder(f"h(a) = 1 - mu (1 - a) = {ha} must be positive")

    c = lam * ha * 0.5
    for _ in range(max_iter):
        prof = ShearProfile(lam, eta, mu, a, c, int(N), _blend_coefficients(c, a, lam, mu), smoothness_grid)
        c_next = 0.5 * prof.h3a
        if not (0.0 < c_next < a):
            raise BranchOverlap(f"fixed-point iteration for c left (0, a): {c_next}")
        if abs(c_next - c) <= 1e-15:
            break
        c = c_next
    prof = ShearProfile(lam, eta, mu, a, c, int(N), _blend_coefficients(c, a, lam, mu), smoothness_grid)

    z = np.linspace(0.0, 1.0, smoothness_grid)
    if np.min(prof.dh(z)) <= 0.0:
        raise BlendNotMonotone("h' <= 0 somewhere on the grid")
    inner = z[1:-1]
    if np.any(prof.h(inner) >= inner):
        raise BlendNotMonotone("h(z) >= z somewhere on (0, 1)")
    if not (prof.c < prof.h3a):
        raise BranchOverlap(f"c = {prof.c} is not below h^3(a) = {prof.h3a}")
    if not (prof.c < prof.h3a < prof.h2a < prof.ha < prof.a):
        raise BranchOverlap("branch points out of order")
    return prof
