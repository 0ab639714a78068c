"""The switching skew product and its towers.

A :class:`SkewMap` acts on ``base x circle`` by::

    f(x, z) = (g_tau(z)(x), h(z))              z in [0, 1]
    f(x, z) = (x1, -z1),  (x1, z1) = f(x, -z)   z in [-1, 0)

where ``g_t = sigma_t o g`` and ``sigma`` is the flow of the stable field.
The circle is ``[-1, 1]`` with the endpoints glued; with ``doubling`` it is
``[-1, 3]`` and ``f(x, z + 2) = f(x, z) + (0, 2)``.  In ``flow`` mode the
lower part ``|z| <= h^2(a)`` uses the suspension flow with variable time
``rho(|z|)`` instead of ``g``.

Since ``sigma_t`` preserves the base, a :class:`SkewMap` is itself a valid
base for another stage; :class:`SwitchTower` keeps the chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base_systems import (
    ConstantField,
    LinearAnosov,
    SuspensionField,
    SuspensionFlow,
    TimeMap,
)
from .errors import (
    CocycleOverflow,
    ConstantsOutOfOrder,
    OrientationReversed,
    SplittingUnavailable,
)


@dataclass(frozen=True)
class SkewMap:
    """One switching stage over ``base``.

    Parameters
    ----------
    base : base object (see :mod:`skewswitch.base_systems`)
    profile : ShearProfile
    field : stable field on ``base`` generating ``sigma``
    mode : {"diffeo", "flow"}
    doubling : bool
    flow : SuspensionFlow, required in flow mode
    """

    base: object
    profile: object
    field: object
    mode: str = "diffeo"
    doubling: bool = False
    flow: object = None

    @property
    def dim(self):
        return self.base.dim + 1

    @property
    def counts(self):
        s, c, u = self.base.counts
        return (s, c + 1, u)

    @property
    def period(self):
        return 4.0 if self.doubling else 2.0

    # -- circle bookkeeping -------------------------------------------
    def _fold(self, z):
        shift = np.where(self.doubling & (z >= 1.0), 2.0, 0.0) if self.doubling else np.zeros_like(z)
        zf = z - shift
        sgn = np.where(zf < 0.0, -1.0, 1.0)
        return np.abs(zf), sgn, shift

    def _split(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return p[:, :-1], p[:, -1]

    def wrap(self, p):
        x, z = self._split(p)
        top = 3.0 if self.doubling else 1.0
        outside = (z < -1.0) | (z > top)
        z = np.where(outside, np.mod(z + 1.0, self.period) - 1.0, z)
        return np.column_stack([self.base.wrap(x), z])

    def delta(self, p, q):
        px, pz = self._split(p)
        qx, qz = self._split(q)
        dz = qz - pz
        dz = dz - self.period * np.round(dz / self.period)
        return np.column_stack([self.base.delta(px, qx), dz])

    def random_points(self, rng, n):
        x = self.base.random_points(rng, n)
        z = rng.uniform(-1.0, 3.0 if self.doubling else 1.0, n)
        return np.column_stack([x, z])

    def _low(self, az):
        if self.mode != "flow":
            return np.zeros(az.shape, dtype=bool)
        return az <= self.profile.h2a

    # -- point maps -----------------------------------------------------
    def apply(self, p):
        x, z = self._split(p)
        az, sgn, shift = self._fold(z)
        low = self._low(az)
        out_x = np.empty_like(x)
        hi = ~low
        if np.any(hi):
            t = self.profile.tau(az[hi])
            out_x[hi] = self.field.sigma(self.base.apply(x[hi]), t)
        if np.any(low):
            out_x[low] = self.flow.flow(x[low], self.profile.rho(az[low]))
        out_z = sgn * self.profile.h(az) + shift
        return np.column_stack([out_x, out_z])

    def inverse(self, p):
        x1, z1 = self._split(p)
        az1, sgn, shift = self._fold(z1)
        az = self.profile.h_inverse(az1)
        low = self._low(az)
        out_x = np.empty_like(x1)
        hi = ~low
        if np.any(hi):
            t = self.profile.tau(az[hi])
            out_x[hi] = self.base.inverse(self.field.sigma(x1[hi], -t))
        if np.any(low):
            out_x[low] = self.flow.flow(x1[low], -self.profile.rho(az[low]))
        return np.column_stack([out_x, sgn * az + shift])

    # -- tangent maps -----------------------------------------------------
    def jacobian(self, p):
        """``(n, D, D)`` derivative in ambient coordinates."""
        x, z = self._split(p)
        n, m = x.shape
        az, sgn, _ = self._fold(z)
        low = self._low(az)
        hi = ~low
        jac = np.zeros((n, m + 1, m + 1))
        jac[:, m, m] = self.profile.dh(az)
        if np.any(hi):
            xh = x[hi]
            t = self.profile.tau(az[hi])
            gx = self.base.apply(xh)
            y = self.field.sigma(gx, t)
            jac[hi, :m, :m] = self.field.sigma_jacobian(gx, t) @ self.base.jacobian(xh)
            jac[hi, :m, m] = (sgn[hi] * self.profile.dtau(az[hi]))[:, None] * self.field.value(y)
        if np.any(low):
            xl = x[low]
            r = self.profile.rho(az[low])
            y = self.flow.flow(xl, r)
            jac[low, :m, :m] = self.flow.flow_jacobian(xl, r)
            jac[low, :m, m] = (sgn[low] * self.profile.drho(az[low]))[:, None] * self.flow.direction(y)
        return jac

    def inverse_jacobian(self, q):
        """Derivative of ``f^-1`` at ``q``, from the inverse formula
        ``x = g^-1(sigma_-t(y))`` (or ``phi_-r(y)`` on the flow part)."""
        y, z1 = self._split(q)
        n, m = y.shape
        az1, sgn, _ = self._fold(z1)
        az = self.profile.h_inverse(az1)
        dz = 1.0 / self.profile.dh(az)
        low = self._low(az)
        hi = ~low
        jac = np.zeros((n, m + 1, m + 1))
        jac[:, m, m] = dz
        if np.any(hi):
            yh = y[hi]
            t = self.profile.tau(az[hi])
            w = self.field.sigma(yh, -t)
            Ginv = self.base.inverse_jacobian(w)
            jac[hi, :m, :m] = Ginv @ self.field.sigma_jacobian(yh, -t)
            dt = sgn[hi] * self.profile.dtau(az[hi]) * dz[hi]
            jac[hi, :m, m] = -np.einsum("nij,nj->ni", Ginv, self.field.value(w)) * dt[:, None]
        if np.any(low):
            yl = y[low]
            r = self.profile.rho(az[low])
            x = self.flow.flow(yl, -r)
            jac[low, :m, :m] = self.flow.flow_jacobian(yl, -r)
            dr = sgn[low] * self.profile.drho(az[low]) * dz[low]
            jac[low, :m, m] = -self.flow.direction(x) * dr[:, None]
        return jac

    def frame(self, p):
        x, _ = self._split(p)
        n, m = x.shape
        T = np.zeros((n, m + 1, m + 1))
        T[:, :m, :m] = self.base.frame(x)
        T[:, m, m] = 1.0
        return T


@dataclass(frozen=True)
class SwitchTower:
    """Chain of switching stages; the last one is the map under study.

    ``root`` is the original base system (a :class:`LinearAnosov` or a
    :class:`SuspensionFlow`).
    """

    stages: tuple
    root: object
    mode: str = "diffeo"
    epsilon: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def top(self):
        return self.stages[-1]

    @property
    def depth(self):
        return len(self.stages)

    @property
    def dim(self):
        return self.top.dim

    @property
    def counts(self):
        return self.top.counts

    @property
    def base_dim(self):
        return self.dim - self.depth

    def apply(self, p):
        return self.top.apply(p)

    def inverse(self, p):
        return self.top.inverse(p)

    def jacobian(self, p):
        return self.top.jacobian(p)

    def inverse_jacobian(self, q):
        return self.top.inverse_jacobian(q)

    def frame(self, p):
        return self.top.frame(p)

    def wrap(self, p):
        return self.top.wrap(p)

    def delta(self, p, q):
        return self.top.delta(p, q)

    def random_points(self, rng, n):
        return self.top.random_points(rng, n)

    def adapted_jacobian(self, p, fp=None):
        """Derivative in adapted coordinates, ``T(f p)^{-1} Df(p) T(p)``."""
        p = np.atleast_2d(p)
        if fp is None:
            fp = self.apply(p)
        return np.linalg.solve(self.frame(fp), self.jacobian(p) @ self.frame(p))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def f_apply(tower, p):
    return tower.apply(p)


def f_inverse(tower, p):
    return tower.inverse(p)


def df_apply(tower, p, w):
    """Push tangent vectors ``w`` (ambient coordinates) at ``p``."""
    w = np.atleast_2d(w)
    return np.einsum("nij,nj->ni", tower.jacobian(p), w)


def orbit(tower, p, n):
    """Points ``f^k(p)`` for ``k = 0..n`` (negative ``n`` walks backwards),
    shape ``(|n| + 1, npts, D)``."""
    p = np.atleast_2d(np.asarray(p, float))
    step = tower.apply if n >= 0 else tower.inverse
    out = [p]
    for _ in range(abs(n)):
        out.append(step(out[-1]))
    return np.stack(out)


@dataclass
class CocycleTrace:
    """Forward orbit and normalized tangent vectors.

    ``points[k]`` is ``f^k(p)``, ``w[k]`` the unit (adapted) direction of
    ``Df^k w``, and ``log_growth[k]`` the log of the norm increase from
    step ``k`` to ``k + 1``.
    """

    points: np.ndarray
    z: np.ndarray
    t: np.ndarray
    w: np.ndarray
    log_growth: np.ndarray

    @property
    def log_norm(self):
        return np.concatenate([[0.0], np.cumsum(self.log_growth)])


def iterate_cocycle(tower, p, w, n, raw=False):
    """Iterate ``(p, w)`` for ``n`` steps in adapted coordinates.

    With ``raw=True`` the unnormalized vectors are also returned, and
    :class:`CocycleOverflow` is raised if their norm would overflow.
    """
    p = np.asarray(p, float).reshape(1, -1)
    w = np.asarray(w, float).reshape(-1)
    pts = [p[0]]
    ws = [w / np.linalg.norm(w)]
    growth = []
    cur = ws[0]
    log_total = np.log(np.linalg.norm(w))
    for _ in range(n):
        fp = tower.apply(p)
        nxt = tower.adapted_jacobian(p, fp)[0] @ cur
        g = np.linalg.norm(nxt)
        growth.append(np.log(g))
        log_total += growth[-1]
        if raw and abs(log_total) > 700.0:
            raise CocycleOverflow(f"raw tangent norm exp({log_total:.1f}) not representable")
        cur = nxt / g
        p = fp
        pts.append(p[0])
        ws.append(cur)
    pts = np.array(pts)
    z = pts[:, -1]
    az = np.abs(z)
    if tower.top.doubling:
        az = np.abs(np.where(z >= 1.0, z - 2.0, z))
    trace = CocycleTrace(pts, z, tower.top.profile.tau(az), np.array(ws), np.array(growth))
    if raw:
        trace.raw = trace.w * np.exp(trace.log_norm)[:, None] * np.linalg.norm(w)
    return trace


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def build_tower(base, profiles, mode="diffeo", d=1, doubling=False, epsilon=0.05, direction=None):
    """Assemble ``d`` nested switching stages over ``base``.

    Parameters
    ----------
    base : LinearAnosov or SuspensionFlow
    profiles : ShearProfile or sequence of ``d`` of them
        Stage ``k`` uses ``profiles[k]``; the vertical rates must decrease
        so each new fiber direction contracts more strongly than all
        previous stable directions.
    mode : {"diffeo", "flow"}
    d : int
        Number of switches; stage ``k`` switches the ``k``-th weakest stable
        eigendirection of ``base``.
    doubling : bool
        Use the circle ``[-1, 3]`` on the last stage.
    epsilon : float
        Common scale of the stable field on every stage.
    direction : array_like, optional
        Ambient direction of the field on a torus base.  Defaults to the
        weak-stable eigenvector when ``d == 1`` and to the sum of the ``d``
        weakest stable eigenvectors otherwise.

    Raises
    ------
    SplittingUnavailable, OrientationReversed, ConstantsOutOfOrder
    """
    if not isinstance(profiles, (list, tuple)):
        profiles = [profiles] * d
    if len(profiles) != d:
        raise SplittingUnavailable(f"need {d} profiles, got {len(profiles)}")
    meta = {}

    if mode == "flow":
        if not isinstance(base, SuspensionFlow):
            raise SplittingUnavailable("flow mode needs a suspension base")
        if d != 1:
            raise SplittingUnavailable("flow mode supports a single switch")
        prof = profiles[0]
        rate = base.mu_s
        if not (prof.lam < rate < prof.eta and prof.mu < base.mu_u):
            raise ConstantsOutOfOrder(
                f"need lambda < mu_s={rate:.6g} < eta and mu < mu_u={base.mu_u:.6g}")
        if not (prof.eta ** prof.N < prof.lam and rate ** prof.N < prof.lam):
            raise ConstantsOutOfOrder(
                f"need eta^N < lambda with N={prof.N}: eta^N={prof.eta ** prof.N:.6g}, lambda={prof.lam}")
        g = TimeMap(base, prof.N)
        fld = SuspensionField(base, epsilon)
        stage = SkewMap(g, prof, fld, "flow", doubling, base)
        meta["time_map_rates"] = [rate ** prof.N, 1.0, base.mu_u ** prof.N]
        return SwitchTower((stage,), base, "flow", epsilon, meta)

    if mode != "diffeo":
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(base, LinearAnosov):
        raise SplittingUnavailable("diffeo mode needs a toral automorphism base")
    s = base.stable_count
    if d < 1 or d > s:
        raise SplittingUnavailable(f"cannot switch {d} directions of a {s}-dimensional stable bundle")
    stable_vals = base.eigenvalues[:s]
    if np.any(stable_vals <= 0.0):
        raise OrientationReversed("switched stable directions must keep their orientation")
    unstable_min = np.min(np.abs(base.eigenvalues[s + base.center_count:]))
    floor = np.min(stable_vals)
    for k, prof in enumerate(profiles):
        if not (prof.lam < floor and np.max(stable_vals) < prof.eta and prof.mu < unstable_min):
            raise ConstantsOutOfOrder(
                f"stage {k + 1}: need lambda < {floor:.6g}, eta > {np.max(stable_vals):.6g}, "
                f"mu < {unstable_min:.6g}")
        floor = prof.lam

    if direction is None:
        vec = base.eigenvectors[:, s - d:s]
        direction = vec.sum(axis=1)
    direction = np.asarray(direction, float)

    stages = []
    current = base
    for k in range(d):
        lifted = np.concatenate([direction, np.zeros(k)])
        fld = ConstantField(current, lifted, epsilon)
        last = k == d - 1
        stage = SkewMap(current, profiles[k], fld, "diffeo", doubling and last)
        stages.append(stage)
        current = stage
    meta["field_direction"] = direction.tolist()
    return SwitchTower(tuple(stages), base, "diffeo", epsilon, meta)
