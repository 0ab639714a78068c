"""Verification suites and report assembly.

Each suite takes a :class:`Context` and returns ``(section, exports)``:
``section`` is a JSON-ready dict with a ``status`` of ``"pass"``,
``"fail"`` or ``"skipped"`` and ``exports`` maps CSV file names to
``(header, rows)``.  Suites are independent given the context, which is
rebuilt from the config (deterministically) wherever a suite runs.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import cones as K
from . import incoherence as I
from . import splitting as S
from .base_systems import LinearAnosov, SuspensionFlow, make_linear_anosov
from .config import SCHEMA_VERSION
from .errors import CannotRescale, NoPowerFound, ApertureTooWide, NotTransverse, SkewSwitchError
from .profiles import build_profile
from .skew_product import build_tower

SUITES = ("construct", "cones", "splitting", "lyapunov", "incoherence")
COMMAND_SUITES = {
    "construct": ("construct",),
    "verify-cones": ("cones",),
    "verify-splitting": ("splitting",),
    "lyapunov": ("lyapunov",),
    "witness-incoherence": ("incoherence",),
    "report": SUITES,
}


@dataclass
class Context:
    cfg: object
    base: object
    profiles: list
    tower: object = None
    cone_family: object = None
    cone_base: object = None
    flow: object = None
    epsilon: float = None
    cone_margins: dict = field(default_factory=dict)
    cone_error: str = None
    build_seconds: float = 0.0


def suite_rng(cfg, name):
    return np.random.default_rng([cfg.seed, SUITES.index(name) if name in SUITES else len(SUITES)])


def build_base(cfg):
    base = make_linear_anosov(cfg.matrix, cfg.stable_count)
    if cfg.mode == "flow":
        return SuspensionFlow(base)
    return base


def build_profiles(cfg):
    return [build_profile(p["lambda"], p["eta"], p["mu"], p["a"], p.get("N", 1)) for p in cfg.profiles]


def _cone_setup(cfg, base, draft):
    """Cone family, the base map it lives on, the stable field and the flow."""
    stage = draft.stages[0]
    g = stage.base
    fld = stage.field
    flow = base if isinstance(base, SuspensionFlow) else None
    if isinstance(g, LinearAnosov) and g.stable_count > 1:
        fam = K.build_cones_given_X(g, fld)
    else:
        fam = K.build_standard_cones(g, cfg.cones["aperture"])
    K.find_C_power(fam, cfg.cones["power_margin"], cfg.cones["power_cap"], cfg.cones["directions"])
    return fam, g, fld, flow


def build_context(cfg):
    """Base, profiles, certified field scale and the tower.

    Construction errors (constants out of order, bad matrices) propagate;
    cone failures are recorded on the context and leave ``tower`` unset.
    """
    t0 = time.perf_counter()
    base = build_base(cfg)
    profiles = build_profiles(cfg)
    kw = dict(mode=cfg.mode, d=cfg.depth, doubling=cfg.doubling)
    draft = build_tower(base, profiles, epsilon=cfg.cones["epsilon0"], **kw)
    ctx = Context(cfg, base, profiles)
    try:
        fam, g, fld, flow = _cone_setup(cfg, base, draft)
        eps, margins = K.rescale_X_epsilon(g, fam, fld, cfg.cones["epsilon0"], cfg.cones["margin_floor"],
                                           cfg.cones["max_halvings"], tuple(cfg.cones["times"]),
                                           cfg.cones["directions"], flow)
        ctx.cone_family, ctx.cone_base, ctx.flow = fam, g, flow
        ctx.epsilon, ctx.cone_margins = eps, margins
        ctx.tower = build_tower(base, profiles, epsilon=eps, **kw)
    except (CannotRescale, NoPowerFound, ApertureTooWide, NotTransverse) as exc:
        ctx.cone_error = f"{type(exc).__name__}: {exc}"
    ctx.build_seconds = time.perf_counter() - t0
    return ctx


def _status(ok):
    return "pass" if ok else "fail"


def _no_tower(ctx, prop):
    return {"property": prop, "status": "fail", "reason": f"no certified field scale ({ctx.cone_error})"}, {}


# ---------------------------------------------------------------------------
# construct: profiles and the diffeomorphism
# ---------------------------------------------------------------------------

def profile_checks(prof, grid=10_000, fd_step=1e-6, fd_tol=1e-6):
    z = np.linspace(0.0, 1.0, grid)
    inner = z[1:-1]
    zi = np.linspace(fd_step, 1.0 - fd_step, grid)
    fd = {
        "dh": np.max(np.abs((prof.h(zi + fd_step) - prof.h(zi - fd_step)) / (2 * fd_step) - prof.dh(zi))),
        "dtau": np.max(np.abs((prof.tau(zi + fd_step) - prof.tau(zi - fd_step)) / (2 * fd_step) - prof.dtau(zi))),
        "drho": np.max(np.abs((prof.rho(zi + fd_step) - prof.rho(zi - fd_step)) / (2 * fd_step) - prof.drho(zi))),
    }
    hz = prof.h(z)
    inv = np.max(np.abs(prof.h_inverse(hz) - z))
    checks = {
        "h(0) == 0": bool(prof.h(np.array([0.0]))[0] == 0.0),
        "h(1) == 1": bool(prof.h(np.array([1.0]))[0] == 1.0),
        "h(z) < z": bool(np.all(prof.h(inner) < inner)),
        "h' > 0": bool(np.all(prof.dh(z) > 0)),
        "c < h^3(a)": bool(prof.c < prof.h3a),
        "finite differences": bool(max(fd.values()) < fd_tol),
    }
    return {
        "status": _status(all(checks.values())),
        "checks": checks,
        "constants": prof.constants(),
        "branch_points": prof.branch_points(),
        "grid": grid,
        "min_gap_z_minus_h": float(np.min(inner - prof.h(inner))),
        "min_dh": float(np.min(prof.dh(z))),
        "max_dh": float(np.max(prof.dh(z))),
        "fd_max_error": {k: float(v) for k, v in fd.items()},
        "fd_tolerance": fd_tol,
        "inverse_max_error": float(inv),
    }


def diffeo_checks(tower, rng, n=10_000, round_tol=1e-9, chain_tol=1e-10):
    p = tower.random_points(rng, n)
    fp = tower.apply(p)
    back = tower.inverse(fp)
    err_fwd = np.max(np.abs(tower.delta(back, p)))
    q = tower.random_points(rng, n)
    fq = tower.apply(tower.inverse(q))
    err_inv = np.max(np.abs(tower.delta(fq, q)))
    # chain rule for f o f^-1 = id with an independently derived D(f^-1)
    pre = tower.inverse(q)
    chain = tower.jacobian(pre) @ tower.inverse_jacobian(q)
    chain_defect = float(np.max(np.abs(chain - np.eye(tower.dim))))
    # C^1 across the seams z = 0 and z = +-1
    x = p[:64, :-1]
    e = 1e-13
    seams = []
    for za, zb in ((e, -e), (1.0, -1.0)):
        pa = np.column_stack([x, np.full(len(x), za)])
        pb = np.column_stack([x, np.full(len(x), zb)])
        dpt = np.max(np.abs(tower.delta(tower.apply(pa), tower.apply(pb))))
        djac = np.max(np.abs(tower.jacobian(pa) - tower.jacobian(pb)))
        seams.append(max(dpt, djac))
    seam = float(max(seams))
    checks = {
        "round trip": bool(max(err_fwd, err_inv) < round_tol),
        "chain rule": bool(chain_defect < chain_tol),
        "seams C1": bool(seam < 1e-9),
    }
    return {
        "status": _status(all(checks.values())),
        "checks": checks,
        "points": n,
        "round_trip_error": float(max(err_fwd, err_inv)),
        "round_trip_tolerance": round_tol,
        "chain_rule_defect": chain_defect,
        "chain_rule_tolerance": chain_tol,
        "seam_defect": seam,
    }


def suite_construct(ctx):
    prop = "profiles are valid shear profiles and the tower is a C1 diffeomorphism"
    profiles = [profile_checks(p) for p in ctx.profiles]
    if ctx.tower is None:
        sec, _ = _no_tower(ctx, prop)
        sec["profiles"] = profiles
        return sec, {}
    diffeo = diffeo_checks(ctx.tower, suite_rng(ctx.cfg, "construct"))
    ok = all(p["status"] == "pass" for p in profiles) and diffeo["status"] == "pass"
    return {"property": prop, "status": _status(ok), "profiles": profiles, "diffeomorphism": diffeo}, {}


def profiles_dump(ctx):
    n = ctx.cfg.profiles_dump["points"]
    z = np.linspace(0.0, 1.0, n)
    rows = []
    for k, p in enumerate(ctx.profiles):
        cols = [p.h(z), p.dh(z), p.tau(z), p.dtau(z), p.rho(z), p.drho(z)]
        rows.extend([k, *vals] for vals in zip(z, *cols))
    header = ["stage", "z", "h", "dh", "tau", "dtau", "rho", "drho"]
    return {"profiles.csv": (header, rows)}


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

def suite_cones(ctx):
    cfg = ctx.cfg.cones
    prop = "strict invariance of the stable, center and unstable cone families under the sheared base maps"
    if ctx.cone_family is None:
        return {"property": prop, "status": "fail", "reason": ctx.cone_error}, {}
    fam, g = ctx.cone_family, ctx.cone_base
    fld = ctx.tower.stages[0].field
    dim = fam.Dg.shape[0]
    n_dirs = cfg["directions"] or K.default_directions(dim)
    structural = K.structural_margins(fam, g, fld, cfg["directions"])
    worst = min(ctx.cone_margins.values())
    checks = {
        "inclusions above floor": bool(worst > cfg["margin_floor"]),
        "directions per cone >= 64": bool(n_dirs >= 64),
        "structural margins positive": bool(min(structural.values()) > 0),
    }
    sec = {
        "property": prop,
        "mode": fam.mode,
        "epsilon": ctx.epsilon,
        "epsilon0": cfg["epsilon0"],
        "margin_floor": cfg["margin_floor"],
        "directions": int(n_dirs),
        "times": list(cfg["times"]),
        "worst_inclusion_margin": float(worst),
        "inclusions": {k: float(v) for k, v in sorted(ctx.cone_margins.items())},
        "structural": {k: float(v) for k, v in structural.items()},
        "power": {"n": fam.n_power, "history": [float(h) for h in fam.extra.get("power_history", [])]},
    }
    if fam.mode == "strong":
        zero = K.weighted_zero_intersection(fam)
        sec["strong_stable"] = {
            "C": fam.C,
            "kappa": fam.kappa,
            "zero_intersection_violation": zero,
            "zero_intersection_violation_weight2": K.weighted_zero_intersection_raw(fam, 2.0),
            "power_margin": float(fam.extra["power_history"][-1]),
            "additivity_failures_B+": K.additivity_failures(fam["B+"]),
        }
        checks["zero intersection"] = bool(zero < 0)
        checks["power found"] = bool(fam.extra["power_history"][-1] > 0)
    sec["checks"] = checks
    sec["status"] = _status(all(checks.values()))
    return sec, {}


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def _sin_to_subspace(v, B):
    """Sine of the angle between unit vector ``v`` and span of ``B`` (per point)."""
    proj = np.einsum("nij,i->nj", B, v)
    return np.sqrt(np.maximum(0.0, 1.0 - np.sum(proj**2, axis=1)))


def switch_check(tower, rng, npts, n):
    D = tower.dim
    s = tower.counts[0]
    x = tower.top.base.random_points(rng, npts)
    if tower.depth > 1:
        x[:, -(tower.depth - 1):] = 0.0
    ez = np.zeros(D)
    ez[-1] = 1.0
    p0 = np.column_stack([x, np.zeros(npts)])
    p1 = np.column_stack([x, np.ones(npts)])
    Es0 = S.estimate_splitting(tower, p0, n, residual=False).s
    Es1 = S.estimate_splitting(tower, p1, n, residual=False).s
    vertical = np.arcsin(np.minimum(1.0, _sin_to_subspace(ez, Es0)))
    horiz = np.arcsin(np.minimum(1.0, np.linalg.norm(Es1[:, -1, :], axis=1)))
    out = {
        "points": npts,
        "n": n,
        "max_angle_fiber_to_Es_at_z0": float(vertical.max()),
        "max_angle_Es_to_horizontal_at_z1": float(horiz.max()),
    }
    if tower.depth == 1:
        exact = np.zeros((D, s))
        exact[:s, :s] = np.eye(s)
        dist = S.subspace_distance(np.broadcast_to(exact, Es1.shape), Es1)
        out["max_distance_Es_to_base_stable_at_z1"] = float(np.max(dist))
    return out


def fiber_span_check(tower, rng, npts, n):
    """At ``M_0 x {0}`` the stable bundle should be spanned by the fibers."""
    D, d = tower.dim, tower.depth
    x = tower.root.random_points(rng, npts)
    p = np.column_stack([x, np.zeros((npts, d))])
    Es = S.estimate_splitting(tower, p, n, residual=False).s
    fib = np.zeros((D, d))
    fib[D - d:, :] = np.eye(d)
    dist = S.subspace_distance(np.broadcast_to(fib, (npts, D, d)), Es) if Es.shape[-1] == d else np.full(npts, np.inf)
    return {"points": npts, "stable_dim": int(Es.shape[-1]), "max_distance": float(np.max(dist))}


def suite_splitting(ctx):
    prop = "estimated invariant splitting: bundle switch, finite-time domination and equivariance"
    if ctx.tower is None:
        return _no_tower(ctx, prop)
    cfg = ctx.cfg.splitting
    tower = ctx.tower
    rng = suite_rng(ctx.cfg, "splitting")
    sec = {"property": prop, "counts": list(tower.counts)}
    checks = {}

    sw = switch_check(tower, rng, cfg["switch_points"], cfg["n_backward"])
    sw["tolerance"] = cfg["switch_tol"]
    sw_ok = sw["max_angle_fiber_to_Es_at_z0"] < cfg["switch_tol"] and sw["max_angle_Es_to_horizontal_at_z1"] < cfg["switch_tol"]
    if "max_distance_Es_to_base_stable_at_z1" in sw:
        sw_ok = sw_ok and sw["max_distance_Es_to_base_stable_at_z1"] < cfg["switch_tol"]
    sw["status"] = _status(sw_ok)
    sec["bundle_switch"] = sw
    checks["bundle switch"] = bool(sw_ok)

    pts = tower.random_points(rng, cfg["domination_points"])
    gaps = S.domination_margins(tower, pts, cfg["domination_n"])
    dom_ok = bool(np.all(gaps > 0))
    sec["domination"] = {
        "n": cfg["domination_n"],
        "points": int(pts.shape[0]),
        "min_gaps": [float(g) for g in gaps.min(axis=0)],
        "status": _status(dom_ok),
    }
    checks["domination gaps positive"] = dom_ok

    # gap monotonicity in n is reported, not required (see README)
    mpts = tower.random_points(rng, cfg["monotone_points"])
    ns = list(cfg["monotone_ns"])
    series = np.stack([S.domination_margins(tower, mpts, n) for n in ns])
    steps = np.diff(series, axis=0)
    nondec = np.all(steps >= -1e-12, axis=0)
    worst_pt = int(np.argmin(steps.min(axis=(0, 2)))) if steps.size else 0
    sec["gap_monotonicity"] = {
        "ns": ns,
        "points": int(mpts.shape[0]),
        "fraction_non_decreasing": [float(f) for f in nondec.mean(axis=0)],
        "all_non_decreasing": bool(np.all(nondec)),
        "largest_decrease": float(-steps.min()) if steps.size else 0.0,
        "worst_point_z": float(mpts[worst_pt, -1]),
        "informational": True,
    }

    epts = tower.random_points(rng, cfg["equivariance_points"])
    eq, angles = S.equivariance_defect(tower, epts, cfg["n_backward"])
    eq_max = {k: float(v.max()) for k, v in eq.items()}
    ang_min = {k: float(v.min()) for k, v in angles.items()}
    eq_ok = max(eq_max.values()) < cfg["equivariance_tol"]
    ang_ok = min(ang_min.values()) > cfg["angle_tol"]
    sec["equivariance"] = {"points": int(epts.shape[0]), "n": cfg["n_backward"], "max_defect": eq_max,
                           "tolerance": cfg["equivariance_tol"], "status": _status(eq_ok)}
    sec["transversality"] = {"min_angles": ang_min, "tolerance": cfg["angle_tol"], "status": _status(ang_ok)}
    checks["equivariance"] = bool(eq_ok)
    checks["bundles transverse"] = bool(ang_ok)

    if tower.depth > 1:
        npts = tower.random_points(rng, cfg["nested_points"])
        nested = S.nested_splitting_check(tower, npts, cfg["nested_n"])
        fib = fiber_span_check(tower, rng, cfg["switch_points"], cfg["n_backward"])
        fib["tolerance"] = cfg["fiber_tol"]
        fib_ok = fib["max_distance"] < cfg["fiber_tol"]
        fib["status"] = _status(fib_ok)
        nested["status"] = _status(nested["passed"])
        sec["nested"] = nested
        sec["fiber_stable_span"] = fib
        checks["nested splittings"] = bool(nested["passed"])
        checks["stable bundle spanned by fibers"] = bool(fib_ok)

    if tower.mode == "flow":
        sec["absolute"] = absolute_section(ctx)
        checks["absolute sandwich"] = sec["absolute"]["status"] == "pass"

    sec["checks"] = checks
    sec["status"] = _status(all(checks.values()))
    return sec, {}


def absolute_grid(tower, m):
    g = np.arange(m) / m
    zs = -1.0 + 2.0 * np.arange(m) / m
    return np.stack(np.meshgrid(g, g, g, zs, indexing="ij"), -1).reshape(-1, 4)


def sandwich_constants(tower):
    """Geometric means of the competing rates on ``M x {0}``."""
    prof = tower.top.profile
    F = tower.root
    return math.sqrt(prof.lam * F.mu_s), math.sqrt(prof.mu * F.mu_u)


def _strip(res):
    return {k: v for k, v in res.items() if not k.startswith("_")}


def absolute_section(ctx):
    cfg = ctx.cfg.absolute
    tower = ctx.tower
    grid = absolute_grid(tower, cfg["grid"])
    lam_s, mu_s = sandwich_constants(tower)
    prof = tower.top.profile
    res = S.absolute_ph_check(tower, grid, lam_s, mu_s, k=cfg["k"], n=cfg["n"], chunk=cfg["chunk"])
    literal = S.absolute_ph_check(tower, grid, prof.lam, prof.mu, k=1, n=cfg["n"], chunk=cfg["chunk"])
    return {
        "grid": [cfg["grid"]] * 4,
        "sandwich": _strip(res),
        "single_step_with_profile_constants": _strip(literal),
        "status": _status(res["passed"]),
    }


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------

def lyapunov_targets(tower):
    """Exact exponents on ``M x {0}`` (all fiber coordinates zero)."""
    lams = [math.log(st.profile.lam) for st in tower.stages]
    if tower.mode == "flow":
        F = tower.root
        horiz = [math.log(F.mu_s), 0.0, math.log(F.mu_u)]
    else:
        horiz = [math.log(abs(v)) for v in tower.root.eigenvalues]
    return sorted(horiz + lams)


def suite_lyapunov(ctx):
    prop = "Lyapunov exponents on the invariant fiber M x {0}"
    if ctx.tower is None:
        return _no_tower(ctx, prop)
    cfg = ctx.cfg.lyapunov
    tower = ctx.tower
    rng = suite_rng(ctx.cfg, "lyapunov")
    x = tower.root.random_points(rng, 1)[0]
    p = np.concatenate([x, np.zeros(tower.depth)])
    rep = S.lyapunov_qr(tower, p, cfg["n"], checkpoints=cfg["checkpoints"])
    target = np.array(lyapunov_targets(tower))
    err = np.abs(rep.exponents - target)
    ok = bool(np.all(err < cfg["tol"]) and rep.sum_defect < cfg["sum_tol"])
    sec = {
        "property": prop,
        "n": cfg["n"],
        "start": [float(v) for v in p],
        "exponents": [float(v) for v in rep.exponents],
        "targets": [float(v) for v in target],
        "abs_errors": [float(v) for v in err],
        "stderr": [float(v) for v in rep.stderr],
        "tolerance": cfg["tol"],
        "sum_defect": rep.sum_defect,
        "sum_tolerance": cfg["sum_tol"],
        "status": _status(ok),
    }
    header = ["n"] + [f"exp_{i}" for i in range(tower.dim)]
    rows = [[int(m), *map(float, r)] for m, r in zip(rep.checkpoints, rep.running)]
    return sec, {"lyapunov_running.csv": (header, rows)}


# ---------------------------------------------------------------------------
# incoherence
# ---------------------------------------------------------------------------

def suite_incoherence(ctx):
    prop = ("falling curves tangent to the center-unstable bundle reach M x {0} after bounded "
            "length, which no center-unstable foliation allows")
    if ctx.tower is None:
        return _no_tower(ctx, prop)
    tower = ctx.tower
    if tower.depth != 1:
        return {"property": prop, "status": "skipped", "reason": "falling curves need a single switch"}, {}
    cfg = ctx.cfg.incoherence
    seed = ctx.cfg.seed
    rep, curves = I.witness_incoherence(tower, cfg["n_x"], cfg["n_z"], cfg["step"], cfg["n0"], seed,
                                        cfg["sign_points"], tuple(cfg["falln_levels"]), cfg["length_slack"])
    box_rows, box = I.foliation_box_demo(tower, n_tracks=cfg["box_tracks"], step=cfg["step"], n0=cfg["n0"],
                                         seed=seed)
    box["informational"] = True
    sec = {
        "property": prop,
        "delta_measured": rep.delta_measured,
        "delta_note": "empirical lower estimate at grid resolution",
        "L_measured": rep.L_measured,
        "eta": rep.eta,
        "length_bound": rep.bound,
        "curves": rep.curves_examined,
        "checks": rep.checks,
        "foliation_box": box,
        "status": _status(rep.passed),
    }
    m = tower.dim - 1
    header = ["curve", "arclength"] + [f"x{i}" for i in range(m)] + ["z"]
    rows = []
    for i, c in enumerate(curves):
        for a, pt in zip(c.arclength, c.points):
            rows.append([i, float(a), *map(float, pt)])
    box_header = ["track", "z0", "arclength", "z"] + [f"x{i}" for i in range(m)]
    return sec, {"falling_curves.csv": (header, rows), "foliation_box.csv": (box_header, box_rows)}


SUITE_FUNCS = {
    "construct": suite_construct,
    "cones": suite_cones,
    "splitting": suite_splitting,
    "lyapunov": suite_lyapunov,
    "incoherence": suite_incoherence,
}


def manifest(ctx):
    cfg = ctx.cfg
    out = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "base_eigenvalues": [float(v) for v in
                             (ctx.base.fiber.eigenvalues if isinstance(ctx.base, SuspensionFlow) else ctx.base.eigenvalues)],
        "profiles": [{"constants": p.constants(), "branch_points": p.branch_points()} for p in ctx.profiles],
        "epsilon": ctx.epsilon,
    }
    if ctx.tower is not None:
        out["tower"] = {"dim": ctx.tower.dim, "depth": ctx.tower.depth, "counts": list(ctx.tower.counts),
                        "mode": ctx.tower.mode}
    return out


def run_suite(ctx, name):
    t0 = time.perf_counter()
    try:
        sec, exports = SUITE_FUNCS[name](ctx)
    except SkewSwitchError as exc:
        sec, exports = {"status": "fail", "error": f"{type(exc).__name__}: {exc}"}, {}
    return sec, exports, time.perf_counter() - t0


def _worker(cfg, name):
    ctx = build_context(cfg)
    return run_suite(ctx, name)


def run_suites(cfg, names, threads=1, extra_exports=False):
    """Build the context, run ``names`` and assemble the report.

    Returns ``(report, exports, timings)``.
    """
    ctx = build_context(cfg)
    results = {}
    if threads > 1 and len(names) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {name: pool.submit(_worker, cfg, name) for name in names}
            results = {name: fut.result() for name, fut in futures.items()}
    else:
        results = {name: run_suite(ctx, name) for name in names}
    sections = {name: results[name][0] for name in names}
    exports = {}
    for name in names:
        exports.update(results[name][1])
    if extra_exports:
        exports.update(profiles_dump(ctx))
    failed = [n for n, s in sections.items() if s["status"] == "fail"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "manifest": manifest(ctx),
        "suites": sections,
        "verdict": "fail" if failed else "pass",
        "failed_suites": failed,
    }
    timings = {"context_build": ctx.build_seconds}
    timings.update({name: results[name][2] for name in names})
    return report, exports, timings
