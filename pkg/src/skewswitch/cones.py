"""Quadratic cone families and sampled strict-inclusion margins.

Cones live in adapted coordinates of the base, where every linear model
has a constant derivative.  A :class:`ConeField` is an intersection of
quadratic cones ``{v : v^T Q v >= 0}``, optionally cut by a sign
functional to select one half.

Margins are scale free: the score of a vector ``v`` against a form ``Q``
is ``v^T Q v / v^T |Q| v`` where ``|Q|`` has the absolute eigenvalues of
``Q``.  It is 1 on the core of the cone, 0 on its boundary and -1 on the
core of the dual.  An inclusion margin is the minimum score of the target
over sampled images of the source; positive means strictly inside.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .errors import ApertureTooWide, CannotRescale, NoPowerFound, NotTransverse

DEFAULT_TIMES = (-1.0, -0.5, 0.0, 0.5, 1.0)
INTERIOR_LAYERS = (1.0, 0.9, 0.5, 0.0)


def default_directions(dim):
    return 64 if dim <= 3 else 256


def sphere_points(n, dim, seed=0):
    """``n`` low-discrepancy unit vectors in ``R^dim``."""
    if dim == 1:
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
    sob = qmc.Sobol(dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    u = sob.random_base2(m)[:n]
    g = stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _quad(Q, v):
    return np.einsum("ni,ij,nj->n", v, Q, v)


@dataclass(frozen=True)
class ConeField:
    """Intersection of quadratic cones in adapted coordinates.

    Parameters
    ----------
    forms : tuple of (D, D) arrays
        Membership is ``v^T Q v >= 0`` for every form.
    sign : (D,) array, optional
        Half-cone functional; members must also satisfy ``sign . v > 0``.
    name : str
    """

    forms: tuple
    sign: np.ndarray = None
    name: str = ""
    gauges: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gauges = []
        for Q in self.forms:
            d, V = np.linalg.eigh(Q)
            gauges.append((V * np.abs(d)) @ V.T)
        object.__setattr__(self, "gauges", tuple(gauges))

    @property
    def dim(self):
        return self.forms[0].shape[0]

    @property
    def core_dim(self):
        """Dimension of the subspace the (single-form) cone surrounds."""
        return int(np.sum(np.linalg.eigvalsh(self.forms[0]) > 0))

    def values(self, v):
        v = np.atleast_2d(v)
        return np.stack([_quad(Q, v) for Q in self.forms], axis=1)

    def normalized(self, v):
        """Scale-free score in [-1, 1]; the minimum over the forms."""
        v = np.atleast_2d(v)
        gauge = np.stack([_quad(G, v) for G in self.gauges], axis=1)
        return (self.values(v) / np.maximum(gauge, 1e-300)).min(axis=1)

    def contains(self, v, tol=0.0):
        v = np.atleast_2d(v)
        ok = self.normalized(v) >= -tol
        if self.sign is not None:
            ok &= v @ self.sign > 0
        return ok

    def dual(self):
        if len(self.forms) != 1:
            raise ValueError("dual is only defined for a single quadratic form")
        return ConeField((-self.forms[0],), None, f"{self.name}*")

    def image(self, M, name=None):
        """Cone ``M(self)`` for an invertible constant map ``M``."""
        Minv = np.linalg.inv(M)
        forms = tuple(Minv.T @ Q @ Minv for Q in self.forms)
        sign = None if self.sign is None else Minv.T @ self.sign
        return ConeField(forms, sign, name or f"M({self.name})")

    def intersect(self, other, name=None):
        sign = self.sign if self.sign is not None else other.sign
        return ConeField(self.forms + other.forms, sign, name or f"{self.name}&{other.name}")

    def half(self, sign, name=None):
        return ConeField(self.forms, np.asarray(sign, float), name or f"{self.name}+")

    def sample(self, n_dirs=None, layers=INTERIOR_LAYERS, seed=0):
        """Unit vectors in the cone: boundary directions of each form plus
        radial interior layers, filtered by the remaining forms."""
        n_dirs = n_dirs or default_directions(self.dim)
        out = []
        for k, Q in enumerate(self.forms):
            out.append(_sample_form(Q, n_dirs, layers, seed + k))
        v = np.concatenate(out)
        if self.sign is not None:
            s = v @ self.sign
            v = v[np.abs(s) > 1e-14] * np.sign(s[np.abs(s) > 1e-14])[:, None]
        return v[self.normalized(v) >= -1e-9]


def _sample_form(Q, n_dirs, layers, seed):
    d, V = np.linalg.eigh(Q)
    scale = np.max(np.abs(d))
    pos, neg = d > 1e-14 * scale, d < -1e-14 * scale
    p, q = int(pos.sum()), int(neg.sum())
    if p == 0:
        return np.zeros((0, Q.shape[0]))
    if q == 0:
        pts = sphere_points(n_dirs, Q.shape[0], seed)
        return pts
    sph = sphere_points(n_dirs, p + q, seed)
    om = sph[:, :p]
    om = om / np.linalg.norm(om, axis=1, keepdims=True)
    xi = sph[:, p:]
    xi = xi / np.maximum(np.linalg.norm(xi, axis=1, keepdims=True), 1e-300)
    a = om / np.sqrt(d[pos])
    b = xi / np.sqrt(-d[neg])
    rows = []
    for r in layers:
        v = a @ V[:, pos].T + r * (b @ V[:, neg].T)
        rows.append(v)
    v = np.concatenate(rows)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def inclusion_scores(src, dst, maps, n_dirs=None, seed=0):
    """Per-sample normalized scores of ``dst`` on images of ``src``."""
    maps = np.asarray(maps, float)
    if maps.ndim == 2:
        maps = maps[None]
    v = src.sample(n_dirs, seed=seed)
    scores = []
    for M in maps:
        w = v @ M.T
        sc = dst.normalized(w)
        if dst.sign is not None:
            lin = (w @ dst.sign) / (np.linalg.norm(w, axis=1) * np.linalg.norm(dst.sign))
            sc = np.minimum(sc, lin)
        scores.append(sc)
    return np.concatenate(scores), v.shape[0]


def check_inclusion(src, dst, maps, n_dirs=None, seed=0):
    """Sampled margin of ``M(src) \\subset\\subset dst`` over all ``maps``.

    Returns the minimum normalized score; positive certifies strict
    inclusion at the sampled resolution, zero means touching.
    """
    scores, _ = inclusion_scores(src, dst, maps, n_dirs, seed)
    return float(scores.min())


# ---------------------------------------------------------------------------
# base derivatives in adapted coordinates
# ---------------------------------------------------------------------------

def adapted_base_map(base, field=None, t=0.0, points=None):
    """Adapted derivative of ``g_t = sigma_t o g`` at ``points``,
    shape ``(n, D, D)``."""
    if points is None:
        points = np.random.default_rng(0).random((4, base.dim))
    points = np.atleast_2d(points)
    gx = base.apply(points)
    J = base.jacobian(points)
    y = gx
    if field is not None:
        tt = np.full(points.shape[0], float(t))
        J = field.sigma_jacobian(gx, tt) @ J
        y = field.sigma(gx, tt)
    return np.linalg.solve(base.frame(y), J @ base.frame(points))


def adapted_field(base, field, points):
    """Field values in adapted coordinates."""
    return np.linalg.solve(base.frame(points), field.value(points)[..., None])[..., 0]


# ---------------------------------------------------------------------------
# cone families
# ---------------------------------------------------------------------------

@dataclass
class ConeFamily:
    """Cones for one base together with the data used to build them."""

    cones: dict
    Dg: np.ndarray
    groups: dict
    mode: str
    C: float = None
    kappa: float = None
    n_power: int = None
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.cones[key]


def _groups(counts, weak_count=1):
    s, c, u = counts
    return {
        "s": np.arange(s), "c": np.arange(s, s + c), "u": np.arange(s + c, s + c + u),
        "ss": np.arange(s - weak_count), "ws": np.arange(s - weak_count, s),
        "cu": np.arange(s, s + c + u), "cs": np.arange(s + c),
    }


def _diag_form(D, plus, minus, w_plus=1.0, w_minus=1.0):
    Q = np.zeros((D, D))
    Q[plus, plus] = w_plus
    Q[minus, minus] = -w_minus
    return Q


def constant_adapted_derivative(base):
    """Adapted derivative of ``g``; checked to be point independent."""
    J = adapted_base_map(base, None, 0.0)
    if np.max(np.abs(J - J[0])) > 1e-9 * np.max(np.abs(J[0])):
        raise ValueError("cone families need a base with constant adapted derivative")
    return J[0]


def build_standard_cones(base, aperture=0.5):
    """Cones around ``E^s`` (A), its images B = Dg^2 A, C = Dg(B*), and U
    around ``E^u``.

    Raises
    ------
    ApertureTooWide
        if the base inclusions ``A << Dg A``, ``Dg C << C``, ``Dg U << U``
        fail at the sampled resolution.
    """
    if not aperture > 0:
        raise ValueError(f"aperture must be positive, got {aperture}")
    Dg = constant_adapted_derivative(base)
    D = Dg.shape[0]
    grp = _groups(base.counts)
    A = ConeField((_diag_form(D, grp["s"], grp["cu"], aperture**2),), None, "A")
    B = A.image(Dg @ Dg, "B")
    C = B.dual().image(Dg, "C")
    U = ConeField((_diag_form(D, grp["u"], grp["cs"], aperture**2),), None, "U")
    sign = np.zeros(D)
    sign[grp["ws"]] = 1.0
    cones = {"A": A, "B": B, "C": C, "U": U, "A+": A.half(sign, "A+"), "B+": B.half(sign, "B+")}
    fam = ConeFamily(cones, Dg, grp, "single", extra={"aperture": aperture})
    _base_guard(fam)
    return fam


def _base_guard(fam):
    Dg, Dinv = fam.Dg, np.linalg.inv(fam.Dg)
    checks = {
        "A<<DgA": check_inclusion(fam["A"], fam["A"], Dinv),
        "DgC<<C": check_inclusion(fam["C"], fam["C"], Dg),
        "DgU<<U": check_inclusion(fam["U"], fam["U"], Dg),
    }
    bad = {k: v for k, v in checks.items() if not v > 0}
    if bad:
        raise ApertureTooWide(f"base inclusions fail: {bad}")


def build_cones_given_X(base, field, kappa=None, c_floor=1.0, inflate=1.1, points=None):
    """Cones adapted to a given stable field when the stable bundle has a
    strong part.

    ``A`` is ``C w^2 + kappa |ss|^2 - |cu|^2 >= 0`` and ``E`` is
    ``C w^2 + kappa |cu|^2 - |ss|^2 >= 0`` where ``w`` is the weakest stable
    coordinate.  ``C`` is 10% above the largest ratio
    ``(|ss|^2 + |cu|^2) / w^2`` over the field and its ``Dg^-2`` preimage,
    and at least ``inflate * c_floor``.

    Raises
    ------
    NotTransverse
        if a sampled field value has no weak-stable component.
    """
    Dg = constant_adapted_derivative(base)
    D = Dg.shape[0]
    grp = _groups(base.counts)
    if points is None:
        points = np.random.default_rng(0).random((64, base.dim))
    X = adapted_field(base, field, points)
    Xpre = X @ np.linalg.matrix_power(np.linalg.inv(Dg), 2).T
    ratios = []
    for vec in (X, Xpre):
        w2 = np.sum(vec[:, grp["ws"]] ** 2, axis=1)
        rest = np.sum(vec[:, grp["ss"]] ** 2, axis=1) + np.sum(vec[:, grp["cu"]] ** 2, axis=1)
        if np.any(w2 <= 1e-300) or np.any(w2 <= 1e-24 * (rest + w2)):
            raise NotTransverse("stable field has a vanishing weak-stable component")
        ratios.append(rest / w2)
    sup = float(np.max(np.concatenate(ratios)))
    C = inflate * max(sup, c_floor)
    rates = np.abs(np.diag(Dg))
    if kappa is None:
        kappa = 0.5 * (np.min(rates[grp["ss"]]) / np.max(rates[grp["cu"]])) ** 2

    QA = np.zeros((D, D))
    QA[grp["ws"], grp["ws"]] = C
    QA[grp["ss"], grp["ss"]] = kappa
    QA[grp["cu"], grp["cu"]] = -1.0
    QE = np.zeros((D, D))
    QE[grp["ws"], grp["ws"]] = C
    QE[grp["cu"], grp["cu"]] = kappa
    QE[grp["ss"], grp["ss"]] = -1.0
    A = ConeField((QA,), None, "A")
    E = ConeField((QE,), None, "E")
    B = A.image(Dg @ Dg, "B")
    U = ConeField((_diag_form(D, grp["u"], grp["cs"], 0.25),), None, "U")
    sign = np.zeros(D)
    sign[grp["ws"]] = 1.0
    A_plus = A.intersect(E.image(Dg), "A+").half(sign, "A+")
    B_plus = B.intersect(E, "B+").half(sign, "B+")
    cones = {"A": A, "E": E, "B": B, "U": U, "A+": A_plus, "B+": B_plus, "BE": B.intersect(E, "B&E")}
    fam = ConeFamily(cones, Dg, grp, "strong", C=C, kappa=float(kappa),
                     extra={"C_sup_ratio": sup, "c_floor": c_floor})
    return fam


def weighted_zero_intersection(fam, weight=None, n_dirs=None):
    """Largest normalized violation of the zero-intersection
    ``B & E & {w = 0} = {0}``.

    Returns the maximum over unit vectors with zero weak-stable part of
    ``min(Q_B, Q_E)``; negative means only the zero vector passes.  With
    ``weight`` the cross weight ``kappa`` is replaced, e.g. to test other
    choices.
    """
    grp = fam.groups
    D = fam.Dg.shape[0]
    B, E = fam["B"], fam["E"]
    if weight is not None:
        QA = np.zeros((D, D))
        QA[grp["ws"], grp["ws"]] = fam.C
        QA[grp["ss"], grp["ss"]] = weight
        QA[grp["cu"], grp["cu"]] = -1.0
        QE = np.zeros((D, D))
        QE[grp["ws"], grp["ws"]] = fam.C
        QE[grp["cu"], grp["cu"]] = weight
        QE[grp["ss"], grp["ss"]] = -1.0
        B = ConeField((QA,), None, "A").image(fam.Dg @ fam.Dg)
        E = ConeField((QE,), None, "E")
    keep = np.setdiff1d(np.arange(D), grp["ws"])
    n_dirs = n_dirs or 4096
    sub = sphere_points(n_dirs, keep.size, seed=7)
    v = np.zeros((n_dirs, D))
    v[:, keep] = sub
    return float(np.max(np.minimum(B.normalized(v), E.normalized(v))))


def weighted_zero_intersection_raw(fam, weight):
    """Same test with the printed weights applied to ``Dg^2 A`` directly,
    i.e. ``|cu|^2 <= C w^2 + weight |ss|^2`` and
    ``|ss|^2 <= C w^2 + weight |cu|^2``."""
    grp = fam.groups
    D = fam.Dg.shape[0]
    QB = np.zeros((D, D))
    QB[grp["ws"], grp["ws"]] = fam.C
    QB[grp["ss"], grp["ss"]] = weight
    QB[grp["cu"], grp["cu"]] = -1.0
    QE = np.zeros((D, D))
    QE[grp["ws"], grp["ws"]] = fam.C
    QE[grp["cu"], grp["cu"]] = weight
    QE[grp["ss"], grp["ss"]] = -1.0
    keep = np.setdiff1d(np.arange(D), grp["ws"])
    sub = sphere_points(4096, keep.size, seed=7)
    v = np.zeros((4096, D))
    v[:, keep] = sub
    both = np.minimum(_quad(QB, v), _quad(QE, v))
    return float(np.max(both))


def _dist_to_ss(vecs, grp):
    keep = np.setdiff1d(np.arange(vecs.shape[-1]), grp["ss"])
    return vecs[..., keep]


def power_margin(fam, n, n_dirs=None):
    """Min distance from ``E^ss`` of ``u + v`` with ``u`` in ``B & E``,
    ``v`` in ``Dg^n(B*)`` and ``max(|u|, |v|) = 1``."""
    grp = fam.groups
    Cn = fam["B"].dual().image(np.linalg.matrix_power(fam.Dg, n), f"Dg^{n}(B*)")
    u = fam["BE"].sample(n_dirs, seed=3)
    v = Cn.sample(n_dirs, seed=5)
    a = _dist_to_ss(u, grp)
    b = _dist_to_ss(v, grp)
    # |u| = 1, v -> zeta v with zeta in [-1, 1] (the cone is symmetric)
    ab = a @ b.T
    bb = np.sum(b * b, axis=1)[None, :]
    aa = np.sum(a * a, axis=1)[:, None]
    zeta = np.clip(-ab / bb, -1.0, 1.0)
    d1 = aa + 2 * zeta * ab + zeta**2 * bb
    # |v| = 1, u -> xi u with xi in [0, 1]
    xi = np.clip(-ab / aa, 0.0, 1.0)
    d2 = xi**2 * aa + 2 * xi * ab + bb
    xi = np.clip(ab / aa, 0.0, 1.0)
    d3 = xi**2 * aa - 2 * xi * ab + bb
    d = np.sqrt(np.maximum(np.minimum(np.minimum(d1, d2), d3), 0.0))
    return float(d.min()), Cn


def find_C_power(fam, margin=1e-3, cap=20, n_dirs=None):
    """Smallest ``n >= 1`` with :func:`power_margin` above ``margin``.

    Returns ``(n, cone, measured_margin)``.  With a one-dimensional stable
    bundle the strong-stable bundle is trivial, distances are to ``0`` and
    any positive margin is enough, so ``n = 1``.

    Raises
    ------
    NoPowerFound
    """
    if "BE" not in fam.cones:
        fam.cones["BE"] = fam["B"]
    need = margin if fam.groups["ss"].size else 0.0
    history = []
    for n in range(1, cap + 1):
        m, Cn = power_margin(fam, n, n_dirs)
        history.append(m)
        if m > need:
            fam.n_power = n
            fam.cones["C"] = ConeField(Cn.forms, None, "C")
            fam.extra["power_history"] = history
            return n, fam.cones["C"], m
    raise NoPowerFound(f"no n <= {cap} separates B&E + Dg^n(B*) from E^ss; margins {history}")


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def required_inclusions(fam, base, field, times=DEFAULT_TIMES, n_dirs=None, flow=None):
    """All strict inclusions the construction relies on, as name -> margin."""
    out = {}
    A, B, C, U = fam["A"], fam["B"], fam["C"], fam["U"]
    for t in times:
        Jt = adapted_base_map(base, field, t)
        Jinv = np.linalg.inv(Jt)
        tag = f"t={t:+.2f}"
        out[f"A << Dg_t A [{tag}]"] = check_inclusion(A, A, Jinv, n_dirs)
        out[f"Dg_t A << B [{tag}]"] = check_inclusion(A, B, Jt, n_dirs)
        out[f"B << Dg_t B [{tag}]"] = check_inclusion(B, B, Jinv, n_dirs)
        out[f"Dg_t C << C [{tag}]"] = check_inclusion(C, C, Jt, n_dirs)
        out[f"Dg_t U << U [{tag}]"] = check_inclusion(U, U, Jt, n_dirs)
        if "E" in fam.cones:
            out[f"Dg_t E < E [{tag}]"] = check_inclusion(fam["E"], fam["E"], Jt, n_dirs)
            out[f"Dg_t A+ << B+ [{tag}]"] = check_inclusion(fam["A+"], fam["B+"], Jt, n_dirs)
    if flow is not None:
        for t in (0.5, 1.0, 2.0):
            pts = np.random.default_rng(0).random((4, 3))
            Jf = np.linalg.solve(flow.frame(flow.flow(pts, t)), flow.flow_jacobian(pts, t) @ flow.frame(pts))
            tag = f"flow t={t:.1f}"
            out[f"A << Dphi_t A [{tag}]"] = check_inclusion(A, A, np.linalg.inv(Jf), n_dirs)
            out[f"Dphi_t C << C [{tag}]"] = check_inclusion(C, C, Jf, n_dirs)
            out[f"Dphi_t U << U [{tag}]"] = check_inclusion(U, U, Jf, n_dirs)
    return out


def structural_margins(fam, base, field, n_dirs=None):
    """Bundle placement, disjointness and field membership margins."""
    D = fam.Dg.shape[0]
    grp = fam.groups
    eye = np.eye(D)
    A = fam["A"]
    out = {}
    out["E^s << A"] = float(np.min(A.normalized(_subspace_sphere(eye[:, grp["s"]]))))
    out["E^cu << A*"] = float(np.min(A.dual().normalized(_subspace_sphere(eye[:, grp["cu"]]))))
    out["E^u << U"] = float(np.min(fam["U"].normalized(_subspace_sphere(eye[:, grp["u"]]))))
    Bside = fam["BE"] if "BE" in fam.cones else fam["B"]
    out["B+ & C = empty"] = check_inclusion(Bside, fam["C"].dual(), np.eye(D), n_dirs)
    out["A+ << B+"] = check_inclusion(fam["A+"], fam["B+"], np.eye(D), n_dirs)
    pts = np.random.default_rng(1).random((64, base.dim))
    X = adapted_field(base, field, pts)
    sc = fam["A+"].normalized(X)
    lin = X @ fam["A+"].sign / np.linalg.norm(X, axis=1)
    out["X in A+"] = float(np.min(np.minimum(sc, lin)))
    return out


def _subspace_sphere(basis, n=64):
    k = basis.shape[1]
    if k == 0:
        return np.zeros((0, basis.shape[0]))
    return sphere_points(n, k, seed=11) @ basis.T


def additivity_failures(cone, n=2000, seed=0):
    """Fraction of random pairs in a half cone whose sum leaves it."""
    rng = np.random.default_rng(seed)
    v = cone.sample(None, seed=seed)
    i, j = rng.integers(0, v.shape[0], (2, n))
    s = v[i] + v[j]
    keep = np.linalg.norm(s, axis=1) > 1e-9
    return float(np.mean(~cone.contains(s[keep], tol=1e-12)))


def rescale_X_epsilon(base, fam, field, eps0=0.05, floor=1e-3, kmax=40, times=DEFAULT_TIMES,
                      n_dirs=None, flow=None):
    """Largest ``eps0 * 2^-k`` for which every required inclusion has
    margin at least ``floor``.

    Returns ``(epsilon, margins)``.

    Raises
    ------
    CannotRescale
    """
    last = None
    for k in range(kmax + 1):
        eps = eps0 * 2.0**-k
        margins = required_inclusions(fam, base, field.with_epsilon(eps), times, n_dirs, flow)
        last = min(margins.values())
        if last >= floor:
            return eps, margins
    raise CannotRescale(f"worst margin {last:.3g} below floor {floor:.3g} at epsilon {eps:.3g}")
