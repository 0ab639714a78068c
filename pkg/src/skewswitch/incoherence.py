"""Falling curves and the incoherence mechanism.

Below the switching region the center-unstable bundle of ``f`` meets
``E^s_g x R`` in a line.  Choosing the orientation whose horizontal part
points along ``E^-`` (the negative side of the weak stable direction) gives
a line field whose integral curves fall monotonically towards ``M x {0}``
after finite projected length.  Everything here works in adapted
coordinates, where the base's stable directions are the first ``s``
coordinates and the fiber coordinate is the last.

Lengths of projected curves are measured in the adapted metric of the base.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDelta, SplittingUnavailable, StepRejected, TransversalityLost
from .splitting import estimate_bundle


def _check_tower(tower):
    if tower.depth != 1:
        raise SplittingUnavailable("falling curves are defined for a single switch")
    return tower.top.base.counts


def _depth_needed(tower, z, n0):
    """Iterations for the backward orbit of height ``z`` to leave the
    product region and then settle near the top fiber."""
    prof = tower.top.profile
    az = np.abs(np.asarray(z, float))
    az = az[az > 0]
    if az.size == 0:
        return n0
    climb = np.log(prof.h2a / az.min()) / np.log(1.0 / prof.lam)
    return int(n0 + max(0.0, np.ceil(climb)))


@dataclass
class LineFieldValue:
    """Line field at a batch of points.

    ``u`` is the horizontal part (adapted, length ``s``) normalized to unit
    length, ``v`` the matching vertical component, ``direction`` the unit
    adapted tangent ``(u, v)`` embedded in all coordinates, ``velocity`` the
    ambient base velocity ``T u`` and ``transversality`` the smallest
    relevant singular value of ``[E^cu, E^s x R]``.
    """

    u: np.ndarray
    v: np.ndarray
    direction: np.ndarray
    velocity: np.ndarray
    transversality: np.ndarray


def line_field(tower, p, n0=40, seed=0, sign=-1.0, transversality_tol=None):
    """Direction of ``E^cu_f  cap  (E^s_g x R)`` at points ``p``.

    Parameters
    ----------
    sign : float
        ``-1`` orients the horizontal part along ``E^-`` (falling curves),
        ``+1`` along ``E^+``.
    transversality_tol : float, optional
        Raise :class:`TransversalityLost` if the intersection is not
        transverse to that tolerance at some point.
    """
    s, _, _ = _check_tower(tower)
    p = np.atleast_2d(np.asarray(p, float))
    npts, D = p.shape
    n = _depth_needed(tower, p[:, -1], n0)
    Q = estimate_bundle(tower, p, D - s, "forward", n, seed, residual=False).basis
    S = np.zeros((D, s + 1))
    S[:s, :s] = np.eye(s)
    S[-1, s] = 1.0
    stacked = np.concatenate([Q, -np.broadcast_to(S, (npts, D, s + 1))], axis=2)
    _, sv, vt = np.linalg.svd(stacked)
    coef = vt[:, -1, D - s:]
    w = coef @ S.T
    u = w[:, :s]
    unorm = np.linalg.norm(u, axis=1)
    # orient by the weak stable coordinate
    flip = np.where(np.sign(u[:, s - 1]) == np.sign(sign), 1.0, -1.0)
    w = w * (flip / unorm)[:, None]
    u = w[:, :s]
    v = w[:, -1]
    trans = sv[:, D - 1]
    if transversality_tol is not None and np.any(trans < transversality_tol):
        raise TransversalityLost(f"intersection degenerate: {trans.min():.3g}")
    T = tower.top.base.frame(p[:, :-1])
    velocity = T[:, :, :s] @ u[:, :, None]
    direction = w / np.linalg.norm(w, axis=1)[:, None]
    return LineFieldValue(u, v, direction, velocity[:, :, 0], trans)


def _rhs(tower, x, z, n0, seed):
    lf = line_field(tower, np.column_stack([x, z]), n0, seed)
    return lf.velocity, lf.v, lf


@dataclass
class FallingCurve:
    """One integrated falling curve.

    ``points`` are ambient samples, ``arclength`` the projected length at
    each sample and ``z`` the fiber coordinate.  ``status`` is ``"floor"``
    (reached ``|z| < z_floor``), ``"length"`` (hit the requested length) or
    ``"max_len"``.
    """

    points: np.ndarray
    arclength: np.ndarray
    z: np.ndarray
    step: float
    status: str
    min_transversality: float
    rejections: int = 0

    @property
    def length(self):
        return float(self.arclength[-1])

    @property
    def terminal_z(self):
        return float(self.z[-1])

    def monotone(self):
        dz = np.diff(self.z)
        return bool(np.all(dz < 0) if self.z[0] > 0 else np.all(dz > 0))

    def z_at(self, s):
        return np.interp(s, self.arclength, self.z)


def integrate_falling(tower, starts, step=0.05, length=None, max_len=None, z_floor=None,
                      n0=40, seed=0, max_angle=30.0, max_halvings=20, drop_cap=0.25,
                      max_steps=100_000):
    """Integrate the falling line field from each start with classical RK4.

    Curves are parameterized by projected arclength.  Integration stops at
    ``|z| < z_floor`` (default ``1e-8 c``), at ``length`` if given, or at
    ``max_len``.  A step is halved whenever the tangent direction turns by
    more than ``max_angle`` degrees, and each step is capped so that
    ``|z|`` drops by at most ``drop_cap * |z|``.

    Returns a list of :class:`FallingCurve`.

    Raises
    ------
    StepRejected
        if a step is still rejected after ``max_halvings`` halvings.
    """
    _check_tower(tower)
    starts = np.atleast_2d(np.asarray(starts, float))
    prof = tower.top.profile
    if z_floor is None:
        z_floor = 1e-8 * prof.c
    if max_len is None:
        max_len = np.inf
    target = min(length, max_len) if length is not None else max_len
    m = starts.shape[0]
    x = starts[:, :-1].copy()
    z = starts[:, -1].copy()
    s = np.zeros(m)
    active = np.abs(z) >= z_floor
    status = np.where(active, "", "floor").astype(object)
    tracks = [[starts[i].copy()] for i in range(m)]
    arcs = [[0.0] for _ in range(m)]
    min_trans = np.full(m, np.inf)
    rejections = 0
    cos_lim = np.cos(np.deg2rad(max_angle))
    base = tower.top.base

    vel, dz, lf = _rhs(tower, x, z, n0, seed)
    min_trans = np.minimum(min_trans, lf.transversality)
    k1x, k1z, d1 = vel, dz, lf.direction
    h = np.full(m, float(step))
    for _ in range(max_steps):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        hi = h[idx].copy()
        cap = drop_cap * np.abs(z[idx]) / np.maximum(np.abs(k1z[idx]), 1e-300)
        hi = np.minimum(hi, cap)
        if np.isfinite(target):
            hi = np.minimum(hi, target - s[idx])
        pending = np.ones(idx.size, dtype=bool)
        new_x = np.empty((idx.size, x.shape[1]))
        new_z = np.empty(idx.size)
        new_k = [np.empty_like(k1x[idx]), np.empty_like(k1z[idx]), np.empty_like(d1[idx])]
        new_t = np.empty(idx.size)
        for _halve in range(max_halvings + 1):
            j = np.flatnonzero(pending)
            if j.size == 0:
                break
            ii = idx[j]
            hj = hi[j]
            x0, z0 = x[ii], z[ii]
            a1x, a1z = k1x[ii], k1z[ii]
            a2x, a2z, _ = _rhs(tower, base.wrap(x0 + 0.5 * hj[:, None] * a1x), z0 + 0.5 * hj * a1z, n0, seed)
            a3x, a3z, _ = _rhs(tower, base.wrap(x0 + 0.5 * hj[:, None] * a2x), z0 + 0.5 * hj * a2z, n0, seed)
            a4x, a4z, _ = _rhs(tower, base.wrap(x0 + hj[:, None] * a3x), z0 + hj * a3z, n0, seed)
            xn = base.wrap(x0 + hj[:, None] / 6.0 * (a1x + 2 * a2x + 2 * a3x + a4x))
            zn = z0 + hj / 6.0 * (a1z + 2 * a2z + 2 * a3z + a4z)
            bx, bz, blf = _rhs(tower, xn, zn, n0, seed)
            turn = np.einsum("ij,ij->i", d1[ii], blf.direction)
            ok = (turn >= cos_lim) & (np.sign(zn) == np.sign(z0))
            rejections += int(np.sum(~ok))
            acc = j[ok]
            new_x[acc], new_z[acc] = xn[ok], zn[ok]
            new_k[0][acc], new_k[1][acc], new_k[2][acc] = bx[ok], bz[ok], blf.direction[ok]
            new_t[acc] = blf.transversality[ok]
            pending[acc] = False
            hi[j[~ok]] *= 0.5
        if np.any(pending):
            raise StepRejected(f"step rejected after {max_halvings} halvings at z={z[idx[pending]].min():.3g}")
        x[idx], z[idx] = new_x, new_z
        s[idx] += hi
        k1x[idx], k1z[idx], d1[idx] = new_k
        min_trans[idx] = np.minimum(min_trans[idx], new_t)
        for loc, i in enumerate(idx):
            tracks[i].append(np.concatenate([x[i], [z[i]]]))
            arcs[i].append(s[i])
        done_floor = np.abs(z[idx]) < z_floor
        done_len = np.isfinite(target) & (s[idx] >= target - 1e-12)
        status[idx[done_floor]] = "floor"
        label = "length" if length is not None and length <= max_len else "max_len"
        status[idx[done_len & ~done_floor]] = label
        active[idx[done_floor | done_len]] = False
    else:
        raise StepRejected(f"curve did not terminate within {max_steps} steps")
    curves = []
    for i in range(m):
        pts = np.array(tracks[i])
        curves.append(FallingCurve(pts, np.array(arcs[i]), pts[:, -1], float(step), str(status[i]),
                                   float(min_trans[i]), rejections))
    return curves


# ---------------------------------------------------------------------------
# falling-curve checks
# ---------------------------------------------------------------------------

def start_grid(tower, n_x=32, n_z=8, z_lo=None, z_hi=None, seed=0):
    """``n_x`` base points (scrambled Sobol) times ``n_z`` heights in
    ``[z_lo, z_hi]`` (default ``[h(c), c]``)."""
    from scipy.stats import qmc

    prof = tower.top.profile
    z_lo = float(prof.h(prof.c)) if z_lo is None else z_lo
    z_hi = prof.c if z_hi is None else z_hi
    base = tower.top.base
    xs = qmc.Sobol(base.dim, scramble=True, seed=seed).random(n_x)
    zs = np.linspace(z_lo, z_hi, n_z)
    X = np.repeat(xs, n_z, axis=0)
    Z = np.tile(zs, n_x)
    return np.column_stack([X, Z])


def measure_delta(tower, starts, step=0.05, n0=40, seed=0):
    """Minimum drop in height over curves of projected length one.

    Returns ``(delta, drops, curves)``.

    Raises
    ------
    NonPositiveDelta
        if some curve fails to drop.
    """
    curves = integrate_falling(tower, starts, step=step, length=1.0, n0=n0, seed=seed)
    drops = np.array([c.z[0] - c.terminal_z for c in curves])
    # a curve that reaches the floor before length one has dropped by its full height
    delta = float(drops.min())
    if not delta > 0:
        raise NonPositiveDelta(f"measured delta = {delta:.3g}")
    return delta, drops, curves


def length_constant(tower, delta):
    """Smallest integer ``L`` with ``delta * L > c - h(c)``."""
    prof = tower.top.profile
    gap = prof.c - float(prof.h(prof.c))
    return int(np.floor(gap / delta)) + 1


def pullback_length(tower, curve, k):
    """Projected adapted length of ``f^-k`` applied to a sampled curve."""
    pts = curve.points
    for _ in range(k):
        pts = tower.inverse(pts)
    s = tower.top.base.counts[0]
    base = tower.top.base
    d = base.delta(pts[:-1, :-1], pts[1:, :-1])
    T = base.frame(pts[:-1, :-1])
    coords = np.linalg.solve(T, d[:, :, None])[:, :, 0]
    return float(np.sum(np.linalg.norm(coords, axis=1)))


def verify_falln(tower, k, L, n_x=8, n_z=4, step=0.05, n0=40, seed=0, slack=1.01):
    """Curves starting in ``[h^{k+1}(c), h^k(c)]`` with projected length
    ``L eta^k slack`` must end below ``h^{k+1}(c)``; the ``f^-k`` pullback
    of each curve must be longer by at least ``eta^-k``."""
    prof = tower.top.profile
    hi = float(prof.h_iter(prof.c, k))
    lo = float(prof.h_iter(prof.c, k + 1))
    starts = start_grid(tower, n_x, n_z, lo, hi, seed)
    length = L * prof.eta ** k * slack
    curves = integrate_falling(tower, starts, step=min(step, length / 8), length=length, n0=n0, seed=seed)
    ends = np.array([c.terminal_z for c in curves])
    ratios = []
    for c in curves:
        if c.length > 0:
            ratios.append(pullback_length(tower, c, k) / c.length)
    ratios = np.array(ratios)
    return {
        "k": k,
        "band": [lo, hi],
        "length": length,
        "curves": len(curves),
        "max_terminal_z": float(ends.max()),
        "below_next_level": bool(np.all(ends < lo)),
        "min_pullback_ratio": float(ratios.min()) if ratios.size else None,
        "required_ratio": float(prof.eta ** -k),
        "pullback_ok": bool(ratios.size == 0 or ratios.min() >= 0.98 * prof.eta ** -k),
        "passed": bool(np.all(ends < lo) and (ratios.size == 0 or ratios.min() >= 0.98 * prof.eta ** -k)),
    }


def sign_dichotomy(tower, points, n0=40, seed=0):
    """Count points where the sign of ``v`` disagrees with the side of
    ``E^s_g`` containing ``u`` (sign dichotomy)."""
    s, _, _ = _check_tower(tower)
    lf = line_field(tower, points, n0, seed, sign=+1.0)
    # u oriented into E^+; v must be positive
    exceptions_plus = int(np.sum(~(lf.v > 0)))
    lf_minus = line_field(tower, points, n0, seed, sign=-1.0)
    exceptions_minus = int(np.sum(~(lf_minus.v < 0)))
    return {
        "points": int(np.atleast_2d(points).shape[0]),
        "exceptions": exceptions_plus + exceptions_minus,
        "min_abs_v": float(np.min(np.abs(lf.v))),
        "min_transversality": float(lf.transversality.min()),
    }


def random_low_points(tower, n, rng):
    """``n`` points in ``M x (0, h^2(a)]``."""
    prof = tower.top.profile
    x = tower.top.base.random_points(rng, n)
    z = prof.h2a * (1.0 - rng.random(n))
    return np.column_stack([x, z])


def pushforward_consistency(tower, curve, n0=40, seed=0):
    """Push a falling curve by ``f``, reintegrate from the pushed start and
    compare heights at equal projected arclength.

    Returns the maximum height discrepancy relative to the starting height.
    """
    pushed = tower.apply(curve.points)
    base = tower.top.base
    d = base.delta(pushed[:-1, :-1], pushed[1:, :-1])
    T = base.frame(pushed[:-1, :-1])
    seg = np.linalg.norm(np.linalg.solve(T, d[:, :, None])[:, :, 0], axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    fresh = integrate_falling(tower, pushed[:1], step=curve.step * arc[-1] / max(curve.length, 1e-300),
                              length=arc[-1], n0=n0, seed=seed)[0]
    zi = fresh.z_at(arc)
    return float(np.max(np.abs(zi - pushed[:, -1])) / abs(pushed[0, -1]))


def foliation_box_demo(tower, x=None, window=None, n_tracks=6, step=0.05, n0=40, seed=0):
    """Tracks of the induced line field on ``W^s_g(x) x window`` from a fan
    of heights above and below ``M x {0}``.

    Returns ``(rows, summary)`` where ``rows`` are
    ``(track, z0, arclength, z, x_1, ..., x_m)`` tuples.
    """
    _check_tower(tower)
    prof = tower.top.profile
    if window is None:
        window = (-prof.c, prof.c)
    lo, hi = window
    if not (-prof.c <= lo < 0 < hi <= prof.c):
        raise ValueError("window must straddle 0 inside (-c, c)")
    base = tower.top.base
    if x is None:
        x = np.full(base.dim, 0.5)
    x = np.asarray(x, float)
    half = n_tracks // 2
    zs = np.concatenate([np.linspace(hi, 0, half + 1)[:-1], np.linspace(lo, 0, n_tracks - half + 1)[:-1]])
    zs = zs * (1.0 - 1e-9)
    starts = np.column_stack([np.tile(x, (zs.size, 1)), zs])
    curves = integrate_falling(tower, starts, step=step, n0=n0, seed=seed,
                               max_len=np.inf)
    rows = []
    crossings = 0
    monotone = True
    for i, c in enumerate(curves):
        crossings += int(np.any(np.sign(c.z) != np.sign(c.z[0])))
        monotone &= c.monotone()
        for a, p in zip(c.arclength, c.points):
            rows.append((i, float(zs[i]), float(a), float(p[-1]), *map(float, p[:-1])))
    summary = {
        "tracks": len(curves),
        "from_above_fall": bool(all(c.monotone() for c, z0 in zip(curves, zs) if z0 > 0)),
        "from_below_rise": bool(all(c.monotone() for c, z0 in zip(curves, zs) if z0 < 0)),
        "crossings": crossings,
        "terminal_abs_z_max": float(max(abs(c.terminal_z) for c in curves)),
        "all_reach_floor": bool(all(c.status == "floor" for c in curves)),
        "passed": bool(monotone and crossings == 0 and all(c.status == "floor" for c in curves)),
    }
    return rows, summary


@dataclass
class IncoherenceReport:
    delta_measured: float
    L_measured: int
    eta: float
    bound: float
    curves_examined: int
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.delta_measured > 0 and np.isfinite(self.bound)
                    and all(v.get("passed", False) for v in self.checks.values()))


def witness_incoherence(tower, n_x=32, n_z=8, step=0.05, n0=40, seed=0, sign_points=1000,
                        falln_levels=(0, 1, 2, 3), length_slack=1.05):
    """Run every falling-curve check and collect a :class:`IncoherenceReport`."""
    prof = tower.top.profile
    rng = np.random.default_rng(seed)
    starts = start_grid(tower, n_x, n_z, seed=seed)
    delta, drops, _ = measure_delta(tower, starts, step, n0, seed)
    L = length_constant(tower, delta)
    bound = L / (1.0 - prof.eta)

    # curves of length L from the band end below h(c)
    band = integrate_falling(tower, starts, step=step, length=float(L), n0=n0, seed=seed)
    hc = float(prof.h(prof.c))
    band_ends = np.array([c.terminal_z for c in band])

    # full falls to the floor
    full = integrate_falling(tower, starts, step=step, max_len=4.0 * bound, n0=n0, seed=seed)
    lengths = np.array([c.length for c in full])
    ends = np.array([c.terminal_z for c in full])
    monotone = all(c.monotone() for c in full)
    z_floor = 1e-8 * prof.c

    # half-step consistency on a subset of distinct heights
    sub = starts[:: max(1, len(starts) // 8)]
    coarse = integrate_falling(tower, sub, step=step, max_len=4.0 * bound, n0=n0, seed=seed)
    fine = integrate_falling(tower, sub, step=step / 2, max_len=4.0 * bound, n0=n0, seed=seed,
                             drop_cap=0.125)
    rel = max(abs(a.length - b.length) / b.length for a, b in zip(coarse, fine))

    checks = {
        "delta": {"passed": bool(delta > 0), "delta": delta, "grid": [n_x, n_z]},
        "fundamental_drop": {
            "passed": bool(np.all(band_ends < hc)),
            "L": L,
            "max_terminal_z": float(band_ends.max()),
            "h(c)": hc,
        },
        "falling_monotone": {"passed": bool(monotone), "curves": len(full)},
        "terminal_floor": {
            "passed": bool(np.all(ends < z_floor) and all(c.status == "floor" for c in full)),
            "max_terminal_z": float(ends.max()),
            "z_floor": z_floor,
        },
        "length_bound": {
            "passed": bool(np.all(lengths <= bound * length_slack)),
            "max_length": float(lengths.max()),
            "bound": bound,
            "slack": length_slack,
        },
        "half_step": {"passed": bool(rel < 5e-3), "max_relative_change": float(rel)},
    }
    falln = [verify_falln(tower, k, L, step=step, n0=n0, seed=seed) for k in falln_levels]
    checks["falln"] = {"passed": all(r["passed"] for r in falln), "levels": falln}
    sd = sign_dichotomy(tower, random_low_points(tower, sign_points, rng), n0, seed)
    sd["passed"] = sd["exceptions"] == 0
    checks["sign_dichotomy"] = sd
    push = pushforward_consistency(tower, full[0], n0, seed)
    checks["pushforward"] = {"passed": bool(push < 0.01), "max_relative_dz": push}
    return IncoherenceReport(delta, L, prof.eta, bound, len(full), checks), full
