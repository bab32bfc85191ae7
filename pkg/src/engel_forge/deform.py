"""Deformations of spherical curves near equator tangencies.

Three constructions:

* ``flatten_endpoint``: prepend (or append) a short equatorial run that
  meets the curve with infinite-order contact, by reparametrizing the
  graph coordinate of the curve over the equator with a cutoff that is
  identically zero near the new endpoint.  The run-in begins with an
  exactly linear equator angle, so downstream gluing against
  constant-speed equatorial bands matches all jets.

* ``flatten_interior``: flatten a marked interior point of a convex curve
  to infinite-order contact with the equator through a family of curves
  that stay convex away from the point.  The graph is composed with
  g_s(u) = (1-s) u + s int_0^u h, where h has an exactly-zero core, a
  plateau above 1 and unit tail, normalized so g_s is the identity outside
  the window.  Convexity away from the core is certified by the
  sufficient inequality c0 (g')^2 - |c1 g''| > 0 on the region where
  h >= 1 and by direct margin positivity on the rise.

* ``stretch_flat_point``: replace a flat endpoint by an arbitrarily long
  equatorial segment winding with negative angular velocity, smoothing the
  junction inside the exactly flat zone.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import constants as C
from .bumps import FlatBump, smoothstep, smoothstep_antideriv, smoothstep_d1, smoothstep_d2
from .catalog import CurveFamily
from .errors import (GlueFailureError, InvalidInputError, OutOfDomainError,
                     ShrinkEpsilonError)
from .sphere import SphereCurve, chart_curve, frenet, inflection_margin, lift_plane_curve

M_FLIP = np.diag([1.0, -1.0, -1.0])  # rotation by pi about the x-axis


def reverse_curve(curve):
    return curve.reparametrize(lambda t: 1.0 - np.asarray(t),
                               lambda t: -np.ones_like(np.asarray(t, dtype=float)),
                               lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                               closed=curve.closed, name=f"rev({curve.name})")


def piecewise_sphere_curve(breaks, pieces, *, closed=False, name=""):
    """Concatenate sphere-curve evaluators on [0,1] split at ``breaks``.

    Pieces must agree at the break points; each piece is an object with
    point/velocity/acceleration taking the global parameter.
    """
    breaks = list(breaks)
    edges = np.array([0.0] + breaks + [1.0])

    def dispatch(attr):
        def ev(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            out = np.zeros(ts.shape + (3,))
            idx = np.clip(np.searchsorted(edges, ts, side="right") - 1, 0, len(pieces) - 1)
            for k, piece in enumerate(pieces):
                m = idx == k
                if np.any(m):
                    out[m] = getattr(piece, attr)(ts[m])
            return out
        return ev

    return SphereCurve(dispatch("point"), dispatch("velocity"), dispatch("acceleration"),
                       closed=closed, name=name, check_unit=False)


class _Evaluators:
    """Ad-hoc point/velocity/acceleration triple over the global parameter."""

    def __init__(self, point, velocity, acceleration):
        self.point = point
        self.velocity = velocity
        self.acceleration = acceleration


def _invert_monotone(fval, fder, targets, lo, hi, iters=60):
    """Solve fval(t) = target for increasing fval on [lo, hi], vectorized."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    a = np.full_like(targets, lo)
    b = np.full_like(targets, hi)
    t = 0.5 * (a + b)
    for _ in range(iters):
        r = fval(t) - targets
        if np.max(np.abs(r)) < 1e-15:
            break
        high = r > 0
        b = np.where(high, t, b)
        a = np.where(high, a, t)
        d = fder(t)
        step = np.where(np.abs(d) > 1e-30, r / np.where(d == 0, 1.0, d), 0.0)
        tn = t - step
        converged = np.abs(r) < 1e-15
        bad = ((tn <= a) | (tn >= b) | ~np.isfinite(tn)) & ~converged
        t = np.where(converged, t, np.where(bad, 0.5 * (a + b), tn))
    return t


def equator_angle_jets(curve, ts):
    """(theta, theta', theta'') of a curve running along the equator."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    p = curve.point(ts)
    v = curve.velocity(ts)
    a = curve.acceleration(ts)
    x, y = p[..., 0], p[..., 1]
    r2 = x * x + y * y
    th = np.arctan2(y, x)
    d1 = (x * v[..., 1] - y * v[..., 0]) / r2
    d2 = (x * a[..., 1] - y * a[..., 0]) / r2 \
        - d1 * 2.0 * (x * v[..., 0] + y * v[..., 1]) / r2
    return th, d1, d2


def _equator_curve(theta, theta_d1, theta_d2):
    def pt(ts):
        th = theta(np.asarray(ts))
        return np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)

    def vel(ts):
        ts = np.asarray(ts)
        th, d1 = theta(ts), theta_d1(ts)
        return d1[..., None] * np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)

    def acc(ts):
        ts = np.asarray(ts)
        th, d1, d2 = theta(ts), theta_d1(ts), theta_d2(ts)
        tang = np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)
        rad = np.stack([-np.cos(th), -np.sin(th), np.zeros_like(th)], axis=-1)
        return d2[..., None] * tang + (d1 ** 2)[..., None] * rad

    return _Evaluators(pt, vel, acc)


def endpoint_speed_warp(curve, v0=None, v1=None, window=0.1):
    """Reparametrize so the endpoint speeds become v0 and v1.

    The warp has all-order-flat derivative corrections at the ends and a
    middle bump restoring w(1) = 1; the curve's image is unchanged.
    """
    s0 = float(np.linalg.norm(curve.velocity(0.0)))
    s1 = float(np.linalg.norm(curve.velocity(1.0)))
    k0 = 1.0 if v0 is None else s0 / v0
    k1 = 1.0 if v1 is None else s1 / v1
    if abs(k0 - 1.0) < 1e-15 and abs(k1 - 1.0) < 1e-15:
        return curve
    w = window
    bump = FlatBump.plateau_bump(2.0 * w, 3.0 * w, 1.0 - 3.0 * w, 1.0 - 2.0 * w)
    ib = float(bump.antiderivative(1.0))
    lam = -((k0 - 1.0) * w / 2.0 + (k1 - 1.0) * w / 2.0) / ib

    def wp(ts):
        ts = np.asarray(ts, dtype=float)
        return (1.0 + (k0 - 1.0) * (1.0 - smoothstep(ts / w))
                + (k1 - 1.0) * smoothstep((ts - 1.0 + w) / w) + lam * bump(ts))

    if np.min(wp(np.linspace(0, 1, 801))) <= 1e-3:
        raise InvalidInputError("endpoint speed warp would stall the parametrization")

    def wval(ts):
        ts = np.asarray(ts, dtype=float)
        return (ts + (k0 - 1.0) * (ts - w * smoothstep_antideriv(ts / w))
                + (k1 - 1.0) * w * smoothstep_antideriv((ts - 1.0 + w) / w)
                + lam * bump.antiderivative(ts))

    def wpp(ts):
        ts = np.asarray(ts, dtype=float)
        return (-(k0 - 1.0) * smoothstep_d1(ts / w) / w
                + (k1 - 1.0) * smoothstep_d1((ts - 1.0 + w) / w) / w
                + lam * bump.d1(ts))

    return curve.reparametrize(wval, wp, wpp, name=f"warp({curve.name})")


@dataclass
class _StartFlatten:
    """One-slice data of the start-flattening construction."""
    curve: SphereCurve
    run_in: float
    t_mod: float
    t_zone: float


def _chart_window_start(curve, t_max):
    """Largest initial window on which the curve is chart-graphical."""
    ts = np.linspace(0.0, t_max, 129)[1:]
    p = curve.point(ts)
    pc = chart_curve(curve)
    ok = p[:, 0] > 0.6
    if np.any(ok):
        u1 = pc.velocity(ts)[:, 0]
        ok &= u1 > 0.25 * float(pc.velocity(0.0)[0])
    idx = np.argmin(ok) if not np.all(ok) else len(ts)
    if idx == 0:
        raise ShrinkEpsilonError("no chart-graphical window at the start")
    return float(ts[idx - 1]), pc


def _build_start_flatten(curve, eps, amp, band_speed):
    if amp <= 0.0:
        return _StartFlatten(curve, 0.0, 0.0, 0.0)
    F = frenet(curve, 0.0)
    if np.max(np.abs(F - np.eye(3))) > 1e-6:
        raise InvalidInputError("flatten_endpoint needs identity Frenet frame at t=0")
    t_w, pc = _chart_window_start(curve, min(3.0 * eps, 0.12))
    t_mod = min(eps, 0.5 * t_w)

    def u(ts):
        return pc.point(np.asarray(ts))[..., 0]

    def u1(ts):
        return pc.velocity(np.asarray(ts))[..., 0]

    def u2(ts):
        return pc.acceleration(np.asarray(ts))[..., 0]

    def v(ts):
        return pc.point(np.asarray(ts))[..., 1]

    def v1(ts):
        return pc.velocity(np.asarray(ts))[..., 1]

    def v2(ts):
        return pc.acceleration(np.asarray(ts))[..., 1]

    v0 = float(np.linalg.norm(curve.velocity(0.0)))
    u_mod = float(u(t_mod))
    u_off0 = amp * min(np.tan(0.4 * eps / max(1.0, v0)), 0.25 * u_mod)
    gamma_pts = curve.point(np.linspace(0.0, 1.0, 257))
    gamma_vel = curve.velocity(np.linspace(0.0, 1.0, 257))

    u_off = u_off0
    for _ in range(40):
        cand = _assemble_start(curve, pc, u, u1, u2, v, v1, v2,
                               u_off, t_mod, t_w, band_speed)
        ts = np.linspace(0.0, 1.0, 257)
        dp = np.max(np.linalg.norm(cand.curve.point(ts) - gamma_pts, axis=-1))
        dv = np.max(np.linalg.norm(cand.curve.velocity(ts) - gamma_vel, axis=-1))
        if max(dp, dv) <= 0.95 * eps:
            return cand
        u_off *= 0.5
        if u_off < 1e-14:
            break
    raise ShrinkEpsilonError("could not meet the C1 budget; shrink epsilon")


def _assemble_start(curve, pc, u, u1, u2, v, v1, v2, u_off, t_mod, t_w, band_speed):
    eps_run = float(np.arctan(u_off))

    def chi(x):
        return u_off * smoothstep_antideriv((np.asarray(x) + 0.5 * u_off) / u_off)

    def chi1(x):
        return smoothstep((np.asarray(x) + 0.5 * u_off) / u_off)

    def chi2(x):
        return smoothstep_d1((np.asarray(x) + 0.5 * u_off) / u_off) / u_off

    def un(ts):
        ts = np.asarray(ts, dtype=float)
        return u(ts) - u_off * (1.0 - smoothstep(ts / t_mod))

    def un1(ts):
        ts = np.asarray(ts, dtype=float)
        return u1(ts) + u_off * smoothstep_d1(ts / t_mod) / t_mod

    def un2(ts):
        ts = np.asarray(ts, dtype=float)
        return u2(ts) + u_off * smoothstep_d2(ts / t_mod) / t_mod ** 2

    # zone boundary: u_new = -u_off/2 is where the cutoff stops being zero
    t_zone = float(_invert_monotone(un, un1, [-0.5 * u_off], 0.0, t_mod)[0])

    def t_hat(w_targets):
        return _invert_monotone(u, u1, w_targets, 0.0, t_w)

    def lifted_evals():
        def make(ts):
            ts = np.asarray(ts, dtype=float)
            U, U1, U2 = un(ts), un1(ts), un2(ts)
            W = chi(U)
            W1 = chi1(U) * U1
            W2 = chi2(U) * U1 ** 2 + chi1(U) * U2
            th = t_hat(W)
            uth1 = u1(th)
            T1 = W1 / uth1
            T2 = (W2 - u2(th) * T1 ** 2) / uth1
            V = v(th)
            Vd1 = v1(th) * T1
            Vd2 = v2(th) * T1 ** 2 + v1(th) * T2
            return U, U1, U2, V, Vd1, Vd2

        def pt(ts):
            U, _, _, V, _, _ = make(ts)
            return np.stack([U, V], axis=-1)

        def vel(ts):
            _, U1, _, _, Vd1, _ = make(ts)
            return np.stack([U1, Vd1], axis=-1)

        def acc(ts):
            _, _, U2, _, _, Vd2 = make(ts)
            return np.stack([U2, Vd2], axis=-1)

        from .sphere import PlaneCurve
        return lift_plane_curve(PlaneCurve(pt, vel, acc), closed=False)

    lift = lifted_evals()

    # exactly linear equator angle at the very start
    v_zone = band_speed if band_speed is not None else float(u1(np.array([0.0]))[0]) / (1.0 + u_off ** 2)
    bl_lo, bl_w = 0.2 * t_zone, 0.5 * t_zone

    def theta(ts):
        ts = np.asarray(ts, dtype=float)
        lin = -eps_run + v_zone * ts
        delta = np.arctan(un(ts)) - lin
        return lin + smoothstep((ts - bl_lo) / bl_w) * delta

    def theta1(ts):
        ts = np.asarray(ts, dtype=float)
        U, U1 = un(ts), un1(ts)
        lin1 = v_zone
        at1 = U1 / (1.0 + U * U)
        delta = np.arctan(U) - (-eps_run + v_zone * ts)
        s = smoothstep((ts - bl_lo) / bl_w)
        s1 = smoothstep_d1((ts - bl_lo) / bl_w) / bl_w
        return lin1 + s1 * delta + s * (at1 - lin1)

    def theta2(ts):
        ts = np.asarray(ts, dtype=float)
        U, U1, U2 = un(ts), un1(ts), un2(ts)
        at1 = U1 / (1.0 + U * U)
        at2 = (U2 * (1.0 + U * U) - 2.0 * U * U1 ** 2) / (1.0 + U * U) ** 2
        delta = np.arctan(U) - (-eps_run + v_zone * ts)
        d1 = at1 - v_zone
        x = (ts - bl_lo) / bl_w
        s = smoothstep(x)
        s1 = smoothstep_d1(x) / bl_w
        s2 = smoothstep_d2(x) / bl_w ** 2
        return s2 * delta + 2.0 * s1 * d1 + s * at2

    zone = _equator_curve(theta, theta1, theta2)
    out = piecewise_sphere_curve([t_zone, t_mod], [zone, lift, curve],
                                 name=f"flat0({curve.name})")
    return _StartFlatten(out, eps_run, t_mod, t_zone)


def flatten_start(curve, eps, *, amplitude=1.0, band_speed=None):
    """Flatten the start of a curve with identity frame at t = 0.

    Returns (curve, run_in_angle): the new curve begins at equator angle
    -run_in_angle, runs along the equator with an exactly linear angle, and
    meets the original curve with infinite-order contact; it equals the
    input on [eps, 1].
    """
    built = _build_start_flatten(curve, eps, amplitude, band_speed)
    return built.curve, built.run_in


def flatten_end(curve, eps, *, amplitude=1.0, band_speed=None):
    """Mirror of flatten_start acting at t = 1 (frame there must preserve
    the equator).  Returns (curve, run_out_angle); the new curve ends at
    equator angle (end angle of the input) + run_out_angle."""
    rev = reverse_curve(curve)
    R = frenet(rev, 0.0)
    if abs(abs(R[2, 2]) - 1.0) > 1e-6:
        raise InvalidInputError("flatten_end needs an equator-preserving end frame")
    norm = rev.rotate(R.T)
    flat, eps_run = flatten_start(norm, eps, amplitude=amplitude, band_speed=band_speed)
    out = reverse_curve(flat.rotate(R))
    # R maps Rot(-e) e1 to the end point advanced by +e along the equator
    return out, eps_run


def flatten_endpoint(family, eps, *, ends=("start", "end"), amplitude=None,
                     band_speed=None):
    """Apply the endpoint flattening to every slice of a family.

    ``amplitude`` is an optional callable s -> [0,1] grading the deformation
    (flat-zero grading keeps early slices exactly untouched).  Returns a
    CurveFamily whose meta carries per-slice run-in/run-out angles.
    """
    if isinstance(family, SphereCurve):
        single = family
        family = CurveFamily(lambda s: single, 0.0, 1.0, name=f"single({single.name})")
    amp = amplitude or (lambda s: 1.0)
    angles = {}

    def make(s):
        cur = family.slice(s)
        a = float(amp(s))
        run_in = run_out = 0.0
        if a > 0.0:
            if "start" in ends:
                cur, run_in = flatten_start(cur, eps, amplitude=a, band_speed=band_speed)
            if "end" in ends:
                cur, run_out = flatten_end(cur, eps, amplitude=a, band_speed=band_speed)
        angles[round(float(s), 14)] = (run_in, run_out)
        return cur

    fam = CurveFamily(make, family.s_lo, family.s_hi,
                      name=f"flattened({family.name})",
                      meta={"eps": eps, "angles": angles, "parent": family})
    return fam


@dataclass
class FlattenInteriorReport:
    """Window data and convexity certificates of flatten_interior."""
    t0: float
    delta: float
    core: float
    rise_end: float
    plateau: float
    c0: float
    c1: float
    cmax: float
    window: tuple
    inequality_min: float = np.inf
    rise_margin_min: float = np.inf
    samples: dict = field(default_factory=dict)

    def certified(self):
        return self.inequality_min > 0.0 and self.rise_margin_min > 0.0


def _interior_chart(curve, t0, eps):
    ts = np.linspace(t0 - eps, t0 + eps, 257)
    pc = chart_curve(curve)
    p = pc.point(ts)
    u1 = pc.velocity(ts)[:, 0]
    ok = (np.abs(p).max(axis=-1) < 2.0) & (u1 > 0)
    mid = len(ts) // 2
    lo = mid
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = mid
    while hi < len(ts) - 1 and ok[hi + 1]:
        hi += 1
    if hi - lo < 16:
        raise OutOfDomainError("no graphical window around the flattening point")
    return pc, float(ts[lo]), float(ts[hi])


def flatten_interior(curve, t0=0.5, eps=C.EPS_STRETCH, *, min_delta=1e-4):
    """Family flattening an interior point to infinite-order equator contact.

    The Frenet frame at t0 must be the identity or the half-turn
    diag(1,-1,-1) (both preserve the equator).  Slices equal the input
    outside [t0 - eps, t0 + eps]; the final slice coincides with the
    equator on an exact core around t0 and is convex elsewhere on the
    window.  Returns (CurveFamily, FlattenInteriorReport).
    """
    F = frenet(curve, t0)
    if np.max(np.abs(F - np.eye(3))) <= 1e-6:
        R0 = np.eye(3)
    elif np.max(np.abs(F - M_FLIP)) <= 1e-6:
        R0 = M_FLIP
    else:
        raise InvalidInputError(
            "flatten_interior needs frame Id or diag(1,-1,-1) at the marked point")
    zeta = curve.rotate(R0.T)
    pc, t_lo, t_hi = _interior_chart(zeta, t0, eps)

    def u(ts):
        return pc.point(np.asarray(ts))[..., 0]

    def u1(ts):
        return pc.velocity(np.asarray(ts))[..., 0]

    def u2(ts):
        return pc.acceleration(np.asarray(ts))[..., 0]

    def v(ts):
        return pc.point(np.asarray(ts))[..., 1]

    def v1(ts):
        return pc.velocity(np.asarray(ts))[..., 1]

    def v2(ts):
        return pc.acceleration(np.asarray(ts))[..., 1]

    delta = 0.9 * min(-float(u(t_lo)), float(u(t_hi)))
    report = None
    for _ in range(25):
        if delta < min_delta:
            raise OutOfDomainError("flattening window shrank below the floor")
        tt = _invert_monotone(u, u1, np.array([-delta, delta]), t_lo, t_hi)
        uu = np.linspace(-delta, delta, 513)
        th = _invert_monotone(u, u1, uu, float(tt[0]), float(tt[1]))
        fu1 = v1(th) / u1(th)
        fu2 = (v2(th) * u1(th) - v1(th) * u2(th)) / u1(th) ** 3
        if np.min(fu2) * np.max(fu2) <= 0:
            raise InvalidInputError("curvature changes sign on the window")
        c0 = 0.99 * float(np.min(np.abs(fu2)))
        cmax = float(np.max(np.abs(fu2)))
        c1 = 1.01 * float(np.max(np.abs(fu1))) + 1e-15
        core, rise_end = delta / 40.0, delta / 12.0
        P = (5.0 * delta / 8.0) / (5.0 * delta / 8.0 - (core + rise_end) / 2.0)
        desc_max = 2.2 * (P - 1.0) / (delta / 4.0)
        if c0 - c1 * desc_max > 0.05 * c0:
            report = FlattenInteriorReport(
                t0, delta, core, rise_end, P, c0, c1, cmax,
                (float(tt[0]), float(tt[1])))
            break
        delta /= 1.5
    if report is None:
        raise OutOfDomainError("no window satisfies the convexity inequality")

    rise = FlatBump.step(report.core, report.rise_end)
    desc = FlatBump.step(delta / 2.0, 3.0 * delta / 4.0)

    def h(x):
        x = np.abs(np.asarray(x, dtype=float))
        return P * rise(x) - (P - 1.0) * desc(x)

    def h1(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.sign(x) * (P * rise.d1(ax) - (P - 1.0) * desc.d1(ax))

    def H(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.sign(x) * (P * rise.antiderivative(ax) - (P - 1.0) * desc.antiderivative(ax))

    t_out = _invert_monotone(u, u1, np.array([-0.95 * delta, 0.95 * delta]),
                             t_lo, t_hi)
    t_out_lo, t_out_hi = float(t_out[0]), float(t_out[1])

    def t_hat(targets, lo=t_lo, hi=t_hi):
        return _invert_monotone(u, u1, targets, lo, hi)

    def make_slice(s):
        if s <= 0.0:
            return curve

        def g(x):
            return (1.0 - s) * np.asarray(x) + s * H(x)

        def g1(x):
            return (1.0 - s) + s * h(x)

        def g2(x):
            return s * h1(x)

        from .sphere import PlaneCurve

        def parts(ts):
            ts = np.asarray(ts, dtype=float)
            U, U1, U2 = u(ts), u1(ts), u2(ts)
            W, W1, W2 = g(U), g1(U) * U1, g2(U) * U1 ** 2 + g1(U) * U2
            th = t_hat(W)
            uth1 = u1(th)
            T1 = W1 / uth1
            T2 = (W2 - u2(th) * T1 ** 2) / uth1
            return (U, U1, U2, v(th), v1(th) * T1,
                    v2(th) * T1 ** 2 + v1(th) * T2)

        def pt(ts):
            U, _, _, V, _, _ = parts(ts)
            return np.stack([U, V], axis=-1)

        def vel(ts):
            _, U1, _, _, V1, _ = parts(ts)
            return np.stack([U1, V1], axis=-1)

        def acc(ts):
            _, _, U2, _, _, V2 = parts(ts)
            return np.stack([U2, V2], axis=-1)

        inner = lift_plane_curve(PlaneCurve(pt, vel, acc)).rotate(R0)
        return piecewise_sphere_curve([t_out_lo, t_out_hi],
                                      [curve, inner, curve],
                                      name=f"flatint(s={s:.3f})")

    fam = CurveFamily(make_slice, 0.0, 1.0, name=f"flatint({curve.name})",
                      meta={"report": report, "t0": t0})

    # certificates: the sufficient inequality where h >= 1, margins on the rise
    ss = np.linspace(0.0, 1.0, 9)
    cert_u = np.concatenate([np.linspace(report.rise_end, delta, 129),
                             -np.linspace(report.rise_end, delta, 129)])
    rise_u = np.concatenate([np.linspace(report.core * 1.5, report.rise_end, 65),
                             -np.linspace(report.core * 1.5, report.rise_end, 65)])
    ineq_min = np.inf
    rise_min = np.inf
    for s in ss:
        gp = (1.0 - s) + s * h(cert_u)
        gpp = s * h1(cert_u)
        ineq_min = min(ineq_min, float(np.min(report.c0 * gp ** 2
                                              - np.abs(report.c1 * gpp))))
        if s > 0:
            trise = t_hat(rise_u)
            m = inflection_margin(fam.slice(s), trise)
            rise_min = min(rise_min, float(np.min(np.abs(m))))
    report.inequality_min = ineq_min
    report.rise_margin_min = rise_min
    report.samples = {"s_grid": ss}
    return fam, report


def _flat_zone_end(curve, search=0.2):
    """Largest terminal zone on which the curve lies exactly on the equator."""
    ts = 1.0 - np.linspace(0.0, search, 513)
    z = np.abs(curve.point(ts)[:, 2])
    ok = z <= 1e-13
    if not ok[0]:
        return None
    idx = np.argmin(ok) if not np.all(ok) else len(ts)
    return float(ts[idx - 1])


def stretch_flat_point(curve, profile=None, *, pull=1.0, eps=C.EPS_STRETCH):
    """Family stretching a flat endpoint into a negatively wound equator arc.

    slice s traverses curve(t/(1-s/2)) and then the arc
    Rot(f(s(2t-2+s))) curve(1), f the rotation profile (default -pull * x);
    the junction is smoothed inside the exactly flat terminal zone.
    """
    R = frenet(curve, 1.0)
    if abs(R[2, 2] + 1.0) > 1e-6 and abs(R[2, 2] - 1.0) > 1e-6:
        raise GlueFailureError("stretch needs an equator-preserving end frame",
                               residuals={"frame": R})
    if profile is None:
        def profile(x):
            return -pull * np.asarray(x)

        def profile_d1(x):
            return -pull * np.ones_like(np.asarray(x, dtype=float))
    else:
        def profile_d1(x, h=1e-6):
            return (profile(np.asarray(x) + h) - profile(np.asarray(x) - h)) / (2 * h)
    if profile_d1(0.0) >= 0:
        raise InvalidInputError("rotation profile needs f'(0) < 0")
    t_flat = _flat_zone_end(curve)
    if t_flat is None:
        z = float(np.abs(curve.point(1.0)[2]))
        raise GlueFailureError("endpoint is not flat on the equator",
                               residuals={"z": z})
    end_angle = float(np.arctan2(curve.point(1.0)[1], curve.point(1.0)[0]))

    def make(s):
        if s <= 0.0:
            return curve
        tj = 1.0 - 0.5 * s
        wb = min(C.BLEND_WINDOW, 0.25 * s, 0.5 * (1.0 - t_flat))
        # junction window [ta, tb] in the new parameter; piece1 must stay flat
        ta = tj - wb
        scale1 = 1.0 / (1.0 - 0.5 * s)
        if ta * scale1 < t_flat:
            ta = t_flat / scale1
            if ta >= tj:
                raise GlueFailureError("flat zone too short for the blend window",
                                       residuals={"t_flat": t_flat})
        tb = min(1.0, tj + (tj - ta))

        piece1 = curve.reparametrize(
            lambda t: np.asarray(t) * scale1,
            lambda t: scale1 * np.ones_like(np.asarray(t, dtype=float)),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)))

        def arc_arg(t):
            return s * (2.0 * np.asarray(t) - 2.0 + s)

        def th2(t):
            return end_angle + np.asarray(profile(arc_arg(t)), dtype=float)

        def th2_d1(t):
            return 2.0 * s * np.asarray(profile_d1(arc_arg(t)), dtype=float)

        def th2_d2(t, h=1e-6):
            return (th2_d1(np.asarray(t) + h) - th2_d1(np.asarray(t) - h)) / (2 * h)

        piece2 = _equator_curve(th2, th2_d1, th2_d2)

        # blended angle across [ta, tb]: speeds interpolated, bump fixes the total
        th1, th1d, _ = equator_angle_jets(piece1, np.linspace(ta, tj, 65))
        sp1 = np.abs(th1d)
        nodes = np.linspace(ta, tb, 257)

        def sp1_of(t):
            tt = np.clip(np.asarray(t), ta, tj)
            _, d1, _ = equator_angle_jets(piece1, tt)
            return np.abs(d1)

        def sp2_of(t):
            return np.abs(th2_d1(np.asarray(t)))

        bump = FlatBump.plateau_bump(0.25, 0.4, 0.6, 0.75)

        def speed_base(t):
            x = (np.asarray(t) - ta) / (tb - ta)
            blend = smoothstep(x)
            return sp1_of(t) * (1.0 - blend) + sp2_of(t) * blend

        base_int = np.trapezoid(speed_base(nodes), nodes)
        th_a = float(equator_angle_jets(piece1, np.array([ta]))[0][0])
        th_b = float(th2(tb))
        target = th_a - th_b  # total decrease (positive when winding west)
        ib = float(bump.antiderivative(1.0)) * (tb - ta)
        A = (target - base_int) / ib
        mn = float(np.min(speed_base(nodes)))
        if A < -0.9 * mn:
            raise GlueFailureError("blend window cannot absorb the speed jump",
                                   residuals={"A": A, "min_speed": mn})

        def speed(t):
            x = (np.asarray(t) - ta) / (tb - ta)
            return speed_base(t) + A * bump(x)

        vals = th_a - np.concatenate(
            [[0.0], np.cumsum((speed(nodes)[1:] + speed(nodes)[:-1]) / 2
                              * np.diff(nodes))])
        spl = CubicSpline(nodes, vals)

        blendp = _equator_curve(lambda t: spl(np.asarray(t)),
                                lambda t: -speed(np.asarray(t)),
                                lambda t: spl(np.asarray(t), 2))
        pieces = [piece1, blendp, piece2] if tb < 1.0 else [piece1, blendp]
        breaks = [ta, tb] if tb < 1.0 else [ta]
        return piecewise_sphere_curve(breaks, pieces, name=f"stretch(s={s:.3f})")

    return CurveFamily(make, 0.0, 1.0, name=f"stretch({curve.name})",
                       meta={"end_angle": end_angle, "t_flat": t_flat})
