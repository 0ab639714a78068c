"""Finite-time estimates of the invariant splitting.

Bundles are computed in adapted coordinates by subspace iteration along
stored orbits: frames are pushed forward from ``f^-n(p)`` (giving the
unstable and center-unstable bundles) or pulled back from ``f^n(p)``
(stable and center-stable).  Orthonormalizing with QR after every step
keeps the first ``k`` columns converging to the ``k``-dimensional most
expanded (resp. contracted) subspace, so one sweep yields a whole flag.

Singular values of long products are taken from exterior powers, which
keeps the small ones accurate when the product is badly conditioned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DegenerateSeed, NotConverged
from .skew_product import orbit


# ---------------------------------------------------------------------------
# subspace helpers
# ---------------------------------------------------------------------------

def orthonormalize(frames):
    q, _ = np.linalg.qr(frames)
    return q


def subspace_distance(A, B):
    """Sine of the largest principal angle between column spans.

    ``A`` and ``B`` are orthonormal, shape ``(..., D, k)``; computed as the
    norm of the part of ``B`` outside ``span(A)``, accurate for tiny angles.
    """
    resid = B - A @ (np.swapaxes(A, -1, -2) @ B)
    return np.linalg.norm(resid, ord=2, axis=(-2, -1))


def min_angle(A, B):
    """Smallest principal angle (radians) between two spans."""
    s = np.linalg.svd(np.swapaxes(A, -1, -2) @ B, compute_uv=False)
    return np.arccos(np.clip(s[..., 0], -1.0, 1.0))


def intersect(A, B, dim):
    """Orthonormal basis of the ``dim``-dimensional intersection of two
    spans, from the leading singular vectors of ``A^T B``."""
    _, _, vt = np.linalg.svd(np.swapaxes(A, -1, -2) @ B)
    V = np.swapaxes(vt, -1, -2)[..., :dim]
    return orthonormalize(B @ V)


def seed_frame(D, k, rng=None, seed=0, npts=1):
    rng = rng if rng is not None else np.random.default_rng(seed)
    raw = rng.standard_normal((D, k))
    return np.broadcast_to(orthonormalize(raw), (npts, D, k)).copy()


def _check_seed(frames):
    s = np.linalg.svd(frames, compute_uv=False)
    if np.any(s[..., -1] <= 1e-10 * s[..., 0]):
        raise DegenerateSeed("seed frame is rank deficient")


# ---------------------------------------------------------------------------
# sweeps along stored orbits
# ---------------------------------------------------------------------------

def _steps(tower, pts, nxt):
    flat_p = pts.reshape(-1, pts.shape[-1])
    flat_n = nxt.reshape(-1, nxt.shape[-1])
    return tower.adapted_jacobian(flat_p, flat_n).reshape(pts.shape[:-1] + (pts.shape[-1],) * 2)


def push_sweep(tower, chain, Q, record=()):
    """Push frames ``Q`` along ``chain[0] -> chain[1] -> ...``.

    ``chain`` has shape ``(m + 1, npts, D)``.  Returns the final frames and
    a dict of frames at the requested chain indices.
    """
    rec = {}
    if 0 in record:
        rec[0] = Q
    for j in range(chain.shape[0] - 1):
        J = _steps(tower, chain[j], chain[j + 1])
        Q = orthonormalize(J @ Q)
        if j + 1 in record:
            rec[j + 1] = Q
    return Q, rec


def pull_sweep(tower, chain, Q, record=()):
    """Pull frames back along ``chain[m] -> chain[m - 1] -> ... -> chain[0]``."""
    m = chain.shape[0] - 1
    rec = {}
    if m in record:
        rec[m] = Q
    for j in range(m - 1, -1, -1):
        J = _steps(tower, chain[j], chain[j + 1])
        Q = orthonormalize(np.linalg.solve(J, Q))
        if j in record:
            rec[j] = Q
    return Q, rec


@dataclass
class BundleEstimate:
    """Orthonormal adapted basis of one estimated bundle at each point."""

    points: np.ndarray
    basis: np.ndarray
    n: int
    direction: str
    residual: np.ndarray = None


def estimate_bundle(tower, p, dim, direction, n, seed=0, frame=None, tol=None, residual=True):
    """Estimate a ``dim``-dimensional bundle at points ``p``.

    Parameters
    ----------
    direction : {"forward", "backward"}
        ``forward`` pushes a frame from ``f^-n(p)`` and returns the most
        expanded ``dim``-plane (unstable, center-unstable); ``backward``
        pulls back from ``f^n(p)`` and returns the most contracted one.
    frame : (D, dim) array, optional
        Seed frame; a fixed random orthonormal frame by default.
    tol : float, optional
        Raise :class:`NotConverged` if any residual exceeds it.
    residual : bool
        Also run from one step further out and record the subspace
        distance between the two estimates.

    Raises
    ------
    DegenerateSeed, NotConverged
    """
    p = np.atleast_2d(np.asarray(p, float))
    npts, D = p.shape
    if not 1 <= dim <= D:
        raise ValueError(f"dim must be in 1..{D}")
    if frame is None:
        Q0 = seed_frame(D, dim, seed=seed, npts=npts)
    else:
        frame = np.asarray(frame, float)
        _check_seed(frame)
        Q0 = np.broadcast_to(orthonormalize(frame), (npts, D, dim)).copy()
    steps = n + 1 if residual else n
    if direction == "forward":
        chain = orbit(tower, p, -steps)[::-1]
        Q, _ = push_sweep(tower, chain[steps - n:], Q0)
        res = None
        if residual:
            Q1, _ = push_sweep(tower, chain, Q0)
            res = subspace_distance(Q, Q1)
    elif direction == "backward":
        chain = orbit(tower, p, steps)
        Q, _ = pull_sweep(tower, chain[: n + 1], Q0)
        res = None
        if residual:
            Q1, _ = pull_sweep(tower, chain, Q0)
            res = subspace_distance(Q, Q1)
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if tol is not None and res is not None and np.any(res > tol):
        raise NotConverged(f"residual {np.max(res):.3g} above {tol:.3g} after {n} steps")
    return BundleEstimate(p, Q, n, direction, res)


@dataclass
class SplittingEstimate:
    """Estimated ``E^s, E^c, E^u`` (and ``E^cs, E^cu``) at each point."""

    points: np.ndarray
    s: np.ndarray
    c: np.ndarray
    u: np.ndarray
    cs: np.ndarray
    cu: np.ndarray
    n: int
    residual: dict = field(default_factory=dict)

    def angles(self):
        """Smallest principal angles between the three bundles."""
        out = {}
        pairs = {"s-u": (self.s, self.u)}
        if self.c.shape[-1]:
            pairs.update({"s-c": (self.s, self.c), "c-u": (self.c, self.u)})
        for key, (A, B) in pairs.items():
            out[key] = min_angle(A, B)
        return out


def estimate_splitting(tower, p, n, seed=0, residual=True):
    """All bundles at ``p`` from one forward and one backward flag sweep."""
    s, c, u = tower.counts
    p = np.atleast_2d(np.asarray(p, float))
    back = estimate_bundle(tower, p, s + c, "backward", n, seed, residual=residual)
    fwd = estimate_bundle(tower, p, c + u, "forward", n, seed + 1, residual=residual)
    cs, cu = back.basis, fwd.basis
    Es = cs[..., :s]
    Eu = cu[..., :u]
    Ec = intersect(cs, cu, c) if c else np.zeros(p.shape + (0,))
    res = {}
    if residual:
        res = {"cs": back.residual, "cu": fwd.residual}
    return SplittingEstimate(p, Es, Ec, Eu, cs, cu, n, res)


def bundles_along_orbit(tower, p, n, k, seed=0):
    """Estimated bundles at ``f^j(p)`` for ``j = 0..k``.

    Returns ``(points, est)`` where ``points`` has shape ``(k + 1, npts, D)``
    and ``est`` maps bundle names to arrays of shape ``(k + 1, npts, D, dim)``.
    """
    s, c, u = tower.counts
    p = np.atleast_2d(np.asarray(p, float))
    npts, D = p.shape
    fwd_orbit = orbit(tower, p, n + k)
    back_orbit = orbit(tower, p, -n)[::-1]
    chain_push = np.concatenate([back_orbit, fwd_orbit[1 : k + 1]])
    Q0 = seed_frame(D, c + u, seed=seed + 1, npts=npts)
    _, rec_cu = push_sweep(tower, chain_push, Q0, record=range(n, n + k + 1))
    Q0 = seed_frame(D, s + c, seed=seed, npts=npts)
    _, rec_cs = pull_sweep(tower, fwd_orbit, Q0, record=range(k + 1))
    cu = np.stack([rec_cu[n + j] for j in range(k + 1)])
    cs = np.stack([rec_cs[j] for j in range(k + 1)])
    est = {"cs": cs, "cu": cu, "s": cs[..., :s], "u": cu[..., :u]}
    est["c"] = intersect(cs, cu, c) if c else np.zeros(cs.shape[:-1] + (0,))
    return fwd_orbit[: k + 1], est


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------

@dataclass
class LyapunovReport:
    """QR Lyapunov exponents along one forward orbit.

    Attributes
    ----------
    exponents : (D,) array, ascending
    stderr : (D,) array
        Standard error from block means of the per-step increments.
    n : int
    log_det_mean : float
        Average of ``log |det Df|`` in adapted coordinates.
    running : (n_checkpoints, D) array
        Running averages at ``checkpoints`` (ascending within each row).
    """

    exponents: np.ndarray
    stderr: np.ndarray
    n: int
    log_det_mean: float
    running: np.ndarray
    checkpoints: np.ndarray

    @property
    def sum_defect(self):
        return float(abs(np.sum(self.exponents) - self.log_det_mean))


def lyapunov_qr(tower, p, n, seed=0, blocks=20, checkpoints=64):
    """Lyapunov spectrum by QR iteration of the adapted cocycle."""
    if n < 1:
        raise ValueError("n must be positive")
    p = np.asarray(p, float).reshape(1, -1)
    D = p.shape[1]
    pts = orbit(tower, p, n)[:, 0]
    J = tower.adapted_jacobian(pts[:-1], pts[1:])
    log_det = np.log(np.abs(np.linalg.det(J)))
    Q = seed_frame(D, D, seed=seed)[0]
    incr = np.empty((n, D))
    for j in range(n):
        Q, R = np.linalg.qr(J[j] @ Q)
        d = np.diag(R)
        Q = Q * np.sign(d)
        incr[j] = np.log(np.abs(d))
    cum = np.cumsum(incr, axis=0)
    marks = np.unique(np.linspace(1, n, min(checkpoints, n)).astype(int))
    running = np.sort(cum[marks - 1] / marks[:, None], axis=1)
    total = cum[-1] / n
    order = np.argsort(total)
    nb = max(2, min(blocks, n))
    block_means = np.array([b.mean(axis=0) for b in np.array_split(incr, nb)])
    stderr = block_means.std(axis=0, ddof=1) / np.sqrt(nb)
    return LyapunovReport(total[order], stderr[order], n, float(log_det.mean()), running, marks)


# ---------------------------------------------------------------------------
# finite-time singular values and domination
# ---------------------------------------------------------------------------

def compound(M, k):
    """``k``-th exterior power of ``(..., D, D)`` matrices, entries are the
    ``k x k`` minors in lexicographic order of index sets."""
    D = M.shape[-1]
    idx = np.array(list(combinations(range(D), k)))
    rows = idx[:, None, :, None]
    cols = idx[None, :, None, :]
    sub = M[..., rows, cols]
    return np.linalg.det(sub)


def log_sv_product(steps):
    """Ascending log singular values of ``steps[-1] @ ... @ steps[0]``.

    ``steps`` is a sequence of ``(npts, m, m)`` arrays (or a callable
    ``j -> array`` with ``len``).  Each exterior power is accumulated with
    renormalization, so singular values far below machine precision relative
    to the largest are still resolved.
    """
    first = steps[0]
    npts, m = first.shape[0], first.shape[-1]
    sizes = {k: len(list(combinations(range(m), k))) for k in range(1, m)}
    acc = {k: np.broadcast_to(np.eye(sizes[k]), (npts, sizes[k], sizes[k])).copy() for k in sizes}
    logs = {k: np.zeros(npts) for k in sizes}
    log_det = np.zeros(npts)
    for J in steps:
        log_det += np.log(np.abs(np.linalg.det(J)))
        for k in sizes:
            P = compound(J, k) @ acc[k]
            scale = np.linalg.norm(P, axis=(1, 2))
            acc[k] = P / scale[:, None, None]
            logs[k] += np.log(scale)
    L = np.zeros((npts, m + 1))
    for k in sizes:
        L[:, k] = logs[k] + np.log(np.linalg.norm(acc[k], ord=2, axis=(1, 2)))
    L[:, m] = log_det
    return np.diff(L, axis=1)[:, ::-1]


class _OrbitSteps:
    def __init__(self, tower, chain):
        self.tower, self.chain = tower, chain

    def __len__(self):
        return self.chain.shape[0] - 1

    def __getitem__(self, j):
        if j >= len(self):
            raise IndexError(j)
        return _steps(self.tower, self.chain[j], self.chain[j + 1])


def log_singular_values(tower, p, n):
    """Log singular values of the adapted ``Df^n`` at points ``p``,
    ascending, shape ``(npts, D)``."""
    p = np.atleast_2d(np.asarray(p, float))
    return log_sv_product(_OrbitSteps(tower, orbit(tower, p, n)))


def domination_margins(tower, p, n, split_dims=None):
    """Per-step log gaps of finite-time singular values at the group
    boundaries given by ``split_dims`` (ascending: stable first).

    Returns an ``(npts, len(split_dims) - 1)`` array; positive entries
    certify finite-time domination at resolution ``n``.
    """
    if split_dims is None:
        split_dims = tower.counts
    split_dims = [d for d in split_dims]
    if sum(split_dims) != tower.dim:
        raise ValueError(f"split_dims {split_dims} must sum to {tower.dim}")
    p = np.atleast_2d(np.asarray(p, float))
    if len(split_dims) < 2:
        return np.zeros((p.shape[0], 0))
    ls = log_singular_values(tower, p, n)
    bounds = np.cumsum(split_dims)[:-1]
    return np.stack([(ls[:, b] - ls[:, b - 1]) / n for b in bounds], axis=1)


# ---------------------------------------------------------------------------
# absolute partial hyperbolicity and nested splittings
# ---------------------------------------------------------------------------

def _restricted_steps(est, J_steps, name, k):
    B = est[name]
    return [np.swapaxes(B[j + 1], -1, -2) @ J_steps[j] @ B[j] for j in range(k)]


def restricted_rates(tower, p, n=60, k=1, seed=0):
    """Per-step log norms of ``Df^k`` restricted to estimated bundles.

    Returns a dict with ``s_max``, ``c_min``, ``c_max``, ``u_min`` arrays
    (one value per point).
    """
    pts, est = bundles_along_orbit(tower, p, n, k, seed)
    J = [_steps(tower, pts[j], pts[j + 1]) for j in range(k)]
    out = {}
    for name in ("s", "c", "u"):
        if est[name].shape[-1] == 0:
            continue
        ls = log_sv_product(_restricted_steps(est, J, name, k))
        out[f"{name}_max"] = ls[:, -1] / k
        out[f"{name}_min"] = ls[:, 0] / k
    return out


def absolute_ph_check(tower, grid, lam, mu, k=1, n=60, chunk=8192, seed=0):
    """Uniform rate sandwich ``|Df^k v^s| <= lam^k < |Df^k v^c| < mu^k <=
    |Df^k v^u|`` over ``grid`` using estimated bundles.

    Margins are in per-step logarithms; all four must be positive for a
    strict pass.  Diffeo-mode towers are skipped.
    """
    if tower.mode != "flow":
        return {"skipped": True, "note": "uniform rate sandwich is only claimed for the flow construction"}
    grid = np.atleast_2d(grid)
    acc = {"s_max": [], "c_min": [], "c_max": [], "u_min": []}
    for start in range(0, grid.shape[0], chunk):
        r = restricted_rates(tower, grid[start:start + chunk], n, k, seed)
        for key in acc:
            acc[key].append(r[key])
    rates = {key: np.concatenate(v) for key, v in acc.items()}
    ll, lm = np.log(lam), np.log(mu)
    margins = {
        "stable <= lambda": float(ll - rates["s_max"].max()),
        "lambda < center": float(rates["c_min"].min() - ll),
        "center < mu": float(lm - rates["c_max"].max()),
        "mu <= unstable": float(rates["u_min"].min() - lm),
    }
    worst = min(margins.values())
    return {
        "skipped": False,
        "k": k,
        "n": n,
        "lambda": lam,
        "mu": mu,
        "points": int(grid.shape[0]),
        "max_stable_rate": float(np.exp(rates["s_max"].max())),
        "min_center_rate": float(np.exp(rates["c_min"].min())),
        "max_center_rate": float(np.exp(rates["c_max"].max())),
        "min_unstable_rate": float(np.exp(rates["u_min"].min())),
        "margins": margins,
        "worst_margin": float(worst),
        "passed": bool(worst > 0),
        "_rates": rates,
    }


def nested_splitting_check(tower, p, n=32):
    """Domination gaps for every regrouping of a ``d``-switch tower.

    For level ``k`` the stable bundle has dimension ``d - k + 1`` and the
    gaps are taken at that boundary and at the center/unstable boundary.
    """
    d = tower.depth
    s, c, u = tower.counts
    D = tower.dim
    ls = log_singular_values(tower, p, n)
    levels = []
    for k in range(1, d + 1):
        b_s = d - k + 1
        b_u = D - u
        gap_s = (ls[:, b_s] - ls[:, b_s - 1]) / n
        gap_u = (ls[:, b_u] - ls[:, b_u - 1]) / n
        levels.append({
            "k": k,
            "stable_dim": b_s,
            "min_gap_stable": float(gap_s.min()),
            "min_gap_unstable": float(gap_u.min()),
            "passed": bool(gap_s.min() > 0 and gap_u.min() > 0),
        })
    stable_gaps = [(ls[:, b] - ls[:, b - 1]) / n for b in range(1, s)]
    return {
        "levels": levels,
        "min_stable_internal_gap": float(min(g.min() for g in stable_gaps)) if stable_gaps else None,
        "passed": all(lv["passed"] for lv in levels),
    }


def equivariance_defect(tower, p, n=60, seed=0):
    """Subspace distance between ``Df(E(p))`` and an independent estimate
    of ``E(f(p))`` for each bundle, plus pairwise minimum angles at ``p``."""
    p = np.atleast_2d(np.asarray(p, float))
    fp = tower.apply(p)
    here = estimate_splitting(tower, p, n, seed, residual=False)
    there = estimate_splitting(tower, fp, n, seed + 7, residual=False)
    J = tower.adapted_jacobian(p, fp)
    out = {}
    for name in ("s", "c", "u", "cs", "cu"):
        B0, B1 = getattr(here, name), getattr(there, name)
        if B0.shape[-1] == 0:
            continue
        out[name] = subspace_distance(B1, orthonormalize(J @ B0))
    return out, here.angles()
