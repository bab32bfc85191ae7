"""Primitive geometry of the round 2-sphere.

Curves are maps [0,1] -> S2 in ambient R3 coordinates.  The Frenet frame of
a regular curve is the SO(3) matrix with columns (position, unit tangent,
normal), where the normal is position x tangent; with that convention the
constant-speed equator through (1,0,0) has the identity frame at t = 0.

The inflection margin <t'(t), n(t)> evaluates to det(g, g', g'') / |g'|^2,
which vanishes exactly at inflection points and whose sign is the turning
direction.  Closed convex curves are classified into the three components
of the space of convex curves by lifting the Frenet path to the unit
quaternions and scanning for self-intersections.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import constants as C
from .errors import DegenerateVelocityError, InvalidInputError, OutOfDomainError

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def rot_z(theta):
    """Rotation of angle theta around the z-axis."""
    if not np.isfinite(theta):
        raise InvalidInputError(f"rot_z angle must be finite, got {theta}")
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def affine_chart(p):
    """Central projection (x,y,z) -> (y/x, z/x) of the open hemisphere x > 0."""
    p = np.asarray(p, dtype=float)
    x = p[..., 0]
    if np.any(x <= C.TAU_CHART):
        raise OutOfDomainError(f"affine chart needs x > {C.TAU_CHART}, got x = {np.min(x)}")
    return np.stack([p[..., 1] / x, p[..., 2] / x], axis=-1)


def affine_chart_inv(uv):
    """Inverse chart (u,v) -> (1,u,v)/|(1,u,v)|."""
    uv = np.asarray(uv, dtype=float)
    if not np.all(np.isfinite(uv)):
        raise InvalidInputError("chart coordinates must be finite")
    w = np.concatenate([np.ones(uv.shape[:-1] + (1,)), uv], axis=-1)
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def _as_batch(ts):
    ts = np.asarray(ts, dtype=float)
    return np.atleast_1d(ts), ts.ndim == 0


class SphereCurve:
    """Parametrized curve [0,1] -> S2 with derivative access.

    ``point`` must be vectorized ((N,) -> (N,3)).  Analytic velocity and
    acceleration evaluators are used when supplied; otherwise derivatives
    fall back to central finite differences with step H_FD (closed curves
    wrap the parameter, open evaluators are assumed to extend smoothly a
    few steps past [0,1], which every catalog formula does).
    """

    def __init__(self, point, velocity=None, acceleration=None, *, closed=False,
                 sample_count=C.CONVEXITY_SAMPLES, name="", check_unit=True):
        self._point = point
        self._velocity = velocity
        self._acceleration = acceleration
        self.closed = bool(closed)
        self.sample_count = int(sample_count)
        self.name = name
        self._samples = None
        if check_unit:
            ts = np.linspace(0.0, 1.0, 65)
            r = np.linalg.norm(self.point(ts), axis=-1)
            err = np.max(np.abs(r - 1.0))
            if err > 1e3 * C.TAU_UNIT:
                raise InvalidInputError(
                    f"curve {name!r} leaves the unit sphere by {err:.2e}")

    def _wrap(self, ts):
        if self.closed:
            return np.mod(ts, 1.0)
        return ts

    def point(self, ts):
        ts, scalar = _as_batch(ts)
        out = np.asarray(self._point(self._wrap(ts)), dtype=float)
        return out[0] if scalar else out

    def velocity(self, ts):
        ts, scalar = _as_batch(ts)
        if self._velocity is not None:
            out = np.asarray(self._velocity(self._wrap(ts)), dtype=float)
        else:
            h = C.H_FD
            out = (self.point(ts + h) - self.point(ts - h)) / (2.0 * h)
        return out[0] if scalar else out

    def acceleration(self, ts):
        ts, scalar = _as_batch(ts)
        if self._acceleration is not None:
            out = np.asarray(self._acceleration(self._wrap(ts)), dtype=float)
        else:
            h = C.H_FD
            out = (-self.point(ts + 2 * h) + 16 * self.point(ts + h)
                   - 30 * self.point(ts) + 16 * self.point(ts - h)
                   - self.point(ts - 2 * h)) / (12.0 * h * h)
        return out[0] if scalar else out

    @property
    def samples(self):
        if self._samples is None:
            ts = np.linspace(0.0, 1.0, self.sample_count)
            self._samples = (ts, self.point(ts))
        return self._samples

    def rotate(self, R):
        """Compose with a fixed rotation R in SO(3)."""
        R = np.asarray(R, dtype=float)
        vel = None if self._velocity is None else (lambda ts: self._velocity(ts) @ R.T)
        acc = None if self._acceleration is None else (lambda ts: self._acceleration(ts) @ R.T)
        return SphereCurve(lambda ts: self._point(ts) @ R.T, vel, acc,
                           closed=self.closed, sample_count=self.sample_count,
                           name=self.name, check_unit=False)

    def reparametrize(self, w, w_d1=None, w_d2=None, *, closed=None, name=None):
        """Compose with a parameter change t -> w(t) (chain-rule derivatives)."""
        def pt(ts):
            return self.point(np.asarray(w(ts)))

        vel = acc = None
        if w_d1 is not None:
            def vel(ts):
                u = np.asarray(w(ts))
                return self.velocity(u) * np.asarray(w_d1(ts))[..., None]
            if w_d2 is not None:
                def acc(ts):
                    u = np.asarray(w(ts))
                    d1 = np.asarray(w_d1(ts))[..., None]
                    d2 = np.asarray(w_d2(ts))[..., None]
                    return (self.acceleration(u) * d1 ** 2
                            + self.velocity(u) * d2)
        return SphereCurve(pt, vel, acc,
                           closed=self.closed if closed is None else closed,
                           sample_count=self.sample_count,
                           name=self.name if name is None else name,
                           check_unit=False)


def frenet_path(curve, ts):
    """Frenet frames along the curve, shape (N, 3, 3)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    g = curve.point(ts)
    v = curve.velocity(ts)
    speed = np.linalg.norm(v, axis=-1)
    bad = speed <= C.TAU_REG
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DegenerateVelocityError(float(ts[i]), float(speed[i]))
    g = g / np.linalg.norm(g, axis=-1, keepdims=True)
    v = v - np.sum(v * g, axis=-1, keepdims=True) * g
    t = v / np.linalg.norm(v, axis=-1, keepdims=True)
    n = np.cross(g, t)
    return np.stack([g, t, n], axis=-1)


def frenet(curve, t):
    """Frenet frame (position, tangent, normal) as an SO(3) matrix."""
    return frenet_path(curve, [t])[0]


def inflection_margin(curve, ts):
    """<t'(t), n(t)> = det(g, g', g'') / |g'|^2 (vectorized)."""
    ts, scalar = _as_batch(ts)
    g = curve.point(ts)
    v = curve.velocity(ts)
    a = curve.acceleration(ts)
    sp2 = np.sum(v * v, axis=-1)
    bad = sp2 <= C.TAU_REG ** 2
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DegenerateVelocityError(float(ts[i]), float(np.sqrt(sp2[i])))
    m = np.sum(g * np.cross(v, a), axis=-1) / sp2
    return m[0] if scalar else m


@dataclass
class ConvexityResult:
    ok: bool
    witness: float | None
    min_abs_margin: float
    sign: int

    def __bool__(self):
        return self.ok


def is_convex(curve, tol=C.TOL_CONVEX, sample_count=None):
    """True iff the sampled inflection margin stays one-signed above tol.

    On failure the witness is a parameter where the margin is smallest in
    absolute value (refined near sign changes).
    """
    n = sample_count or curve.sample_count
    ts = np.linspace(0.0, 1.0, n)
    m = inflection_margin(curve, ts)
    flips = np.nonzero(np.diff(np.sign(m)))[0]
    for i in flips[:64]:  # refine sign changes toward the actual zero
        fine = np.linspace(ts[i], ts[i + 1], 33)
        mf = inflection_margin(curve, fine)
        ts = np.concatenate([ts, fine])
        m = np.concatenate([m, mf])
    k = int(np.argmin(np.abs(m)))
    min_abs = float(np.abs(m[k]))
    sign = int(np.sign(m[k])) if m[k] != 0 else 0
    ok = min_abs > tol and (bool(np.all(m > 0)) or bool(np.all(m < 0)))
    witness = None if ok else float(ts[k])
    return ConvexityResult(bool(ok), witness, min_abs, sign)


class LittleClass(enum.Enum):
    TrivialClass = "TrivialClass"
    EmbeddedNontrivial = "EmbeddedNontrivial"
    NonembeddedNontrivial = "NonembeddedNontrivial"


def _quaternion_from_rotation(R):
    """Unit quaternion (w, x, y, z) for R in SO(3), Shepperd's branch rule."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        return np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                         (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    i = int(np.argmax(np.diag(R)))
    if i == 0:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        return np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                         (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    if i == 1:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        return np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                         0.25 * s, (R[1, 2] + R[2, 1]) / s])
    s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
    return np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                     (R[1, 2] + R[2, 1]) / s, 0.25 * s])


def frenet_lift_sign(curve, n0=512, max_doublings=6):
    """Sign of the quaternion lift of the Frenet path at t=1 against t=0.

    +1 means the Frenet loop is null-homotopic in SO(3).  The path is
    integrated with step-doubling until the endpoint sign is stable across
    two consecutive resolutions.
    """
    prev = None
    n = n0
    for _ in range(max_doublings + 1):
        frames = frenet_path(curve, np.linspace(0.0, 1.0, n + 1))
        q = _quaternion_from_rotation(frames[0])
        q0 = q.copy()
        ok = True
        for k in range(1, n + 1):
            qk = _quaternion_from_rotation(frames[k])
            d = float(np.dot(q, qk))
            if abs(d) < 0.5:  # step too coarse to track the lift
                ok = False
                break
            q = qk if d > 0 else -qk
        if ok:
            d_end = float(np.dot(q0, q))
            if abs(d_end) > 0.9:
                sign = 1 if d_end > 0 else -1
                if prev == sign:
                    return sign
                prev = sign
        n *= 2
    raise InvalidInputError("quaternion lift did not stabilize; curve too wild")


def self_intersection(curve, sample_count=None, tol=C.SELF_INTERSECT_TOL,
                      param_sep=0.02):
    """Search for a pair t1 != t2 with |g(t1) - g(t2)| < tol.

    Proximity candidates come from a KD-tree over the sample polyline;
    candidates are polished by Newton on the squared distance.  Tangential
    near-contacts count.  Returns (found, (t1, t2) or None).
    """
    n = sample_count or curve.sample_count
    ts = np.linspace(0.0, 1.0, n, endpoint=False) if curve.closed else np.linspace(0.0, 1.0, n)
    pts = curve.point(ts)
    seg = np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1))
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=max(4.0 * seg, 10.0 * tol), output_type="ndarray")
    if len(pairs) == 0:
        return False, None
    dt = np.abs(ts[pairs[:, 0]] - ts[pairs[:, 1]])
    if curve.closed:
        dt = np.minimum(dt, 1.0 - dt)
    pairs = pairs[dt > param_sep]
    best = (np.inf, None)
    for i, j in pairs:
        a, b = float(ts[i]), float(ts[j])
        for _ in range(40):  # Newton on f(a,b) = |g(a)-g(b)|^2 / 2
            pa, pb = curve.point(a), curve.point(b)
            va, vb = curve.velocity(a), curve.velocity(b)
            d = pa - pb
            grad = np.array([np.dot(d, va), -np.dot(d, vb)])
            aa, ab = curve.acceleration(a), curve.acceleration(b)
            H = np.array([[np.dot(va, va) + np.dot(d, aa), -np.dot(va, vb)],
                          [-np.dot(va, vb), np.dot(vb, vb) - np.dot(d, ab)]])
            try:
                step = np.linalg.solve(H + 1e-12 * np.eye(2), grad)
            except np.linalg.LinAlgError:
                break
            step = np.clip(step, -2.0 / n, 2.0 / n)
            a, b = a - step[0], b - step[1]
            if curve.closed:
                a, b = a % 1.0, b % 1.0
            else:
                a, b = np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0)
            if np.max(np.abs(step)) < 1e-14:
                break
        sep = abs(a - b)
        if curve.closed:
            sep = min(sep, 1.0 - sep)
        if sep <= param_sep:
            continue
        dist = float(np.linalg.norm(curve.point(a) - curve.point(b)))
        if dist < best[0]:
            best = (dist, (a, b))
        if dist < tol:
            return True, (a, b)
    return False, None


def little_component(curve, convexity_tol=1e-9):
    """Component of a closed convex curve in the space of convex curves.

    The Frenet class comes from the quaternion double-cover lift; embedded
    versus non-embedded is decided by the self-intersection scan.
    """
    if not curve.closed:
        raise InvalidInputError("little_component needs a closed curve")
    ends = np.asarray(curve._point(np.array([0.0, 1.0])), dtype=float)
    gap = float(np.linalg.norm(ends[1] - ends[0]))
    if gap > 1e3 * C.TAU_GLUE:
        raise InvalidInputError(f"closed curve has endpoint gap {gap:.2e}")
    conv = is_convex(curve, tol=convexity_tol)
    if not conv.ok:
        raise InvalidInputError(
            f"little_component needs a convex curve (witness t={conv.witness})")
    if frenet_lift_sign(curve) > 0:
        return LittleClass.TrivialClass
    found, _ = self_intersection(curve)
    return LittleClass.NonembeddedNontrivial if found else LittleClass.EmbeddedNontrivial


class PlaneCurve:
    """Parametrized curve [0,1] -> R2 with derivative access."""

    def __init__(self, point, velocity=None, acceleration=None, *, closed=False,
                 sample_count=C.CONVEXITY_SAMPLES, name=""):
        self._point = point
        self._velocity = velocity
        self._acceleration = acceleration
        self.closed = bool(closed)
        self.sample_count = int(sample_count)
        self.name = name

    def _wrap(self, ts):
        return np.mod(ts, 1.0) if self.closed else ts

    def point(self, ts):
        ts, scalar = _as_batch(ts)
        out = np.asarray(self._point(self._wrap(ts)), dtype=float)
        return out[0] if scalar else out

    def velocity(self, ts):
        ts, scalar = _as_batch(ts)
        if self._velocity is not None:
            out = np.asarray(self._velocity(self._wrap(ts)), dtype=float)
        else:
            h = C.H_FD
            out = (self.point(ts + h) - self.point(ts - h)) / (2.0 * h)
        return out[0] if scalar else out

    def acceleration(self, ts):
        ts, scalar = _as_batch(ts)
        if self._acceleration is not None:
            out = np.asarray(self._acceleration(self._wrap(ts)), dtype=float)
        else:
            h = C.H_FD
            out = (-self.point(ts + 2 * h) + 16 * self.point(ts + h)
                   - 30 * self.point(ts) + 16 * self.point(ts - h)
                   - self.point(ts - 2 * h)) / (12.0 * h * h)
        return out[0] if scalar else out


def signed_curvature(pcurve, ts):
    """Plane signed curvature det(g', g'') / |g'|^3."""
    ts, scalar = _as_batch(ts)
    v = pcurve.velocity(ts)
    a = pcurve.acceleration(ts)
    sp = np.linalg.norm(v, axis=-1)
    bad = sp <= C.TAU_REG
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DegenerateVelocityError(float(ts[i]), float(sp[i]))
    k = (v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]) / sp ** 3
    return k[0] if scalar else k


def lift_plane_curve(pcurve, *, closed=None, name=None):
    """Lift (u,v) -> (1,u,v)/|.| through the inverse affine chart.

    First and second derivatives are exact chain-rule formulas, so lifted
    catalog curves keep analytic jets.
    """
    def _w(ts):
        uv = pcurve.point(ts)
        return np.concatenate([np.ones(uv.shape[:-1] + (1,)), uv], axis=-1)

    def _wd(ts, which):
        uv = which(ts)
        return np.concatenate([np.zeros(uv.shape[:-1] + (1,)), uv], axis=-1)

    def pt(ts):
        w = _w(ts)
        return w / np.linalg.norm(w, axis=-1, keepdims=True)

    def vel(ts):
        w = _w(ts)
        wp = _wd(ts, pcurve.velocity)
        n2 = np.sum(w * w, axis=-1, keepdims=True)
        n = np.sqrt(n2)
        s = np.sum(w * wp, axis=-1, keepdims=True)
        return wp / n - w * s / (n2 * n)

    def acc(ts):
        w = _w(ts)
        wp = _wd(ts, pcurve.velocity)
        wpp = _wd(ts, pcurve.acceleration)
        n2 = np.sum(w * w, axis=-1, keepdims=True)
        n = np.sqrt(n2)
        s = np.sum(w * wp, axis=-1, keepdims=True)
        sp = np.sum(wp * wp, axis=-1, keepdims=True) + np.sum(w * wpp, axis=-1, keepdims=True)
        return (wpp / n - (2.0 * wp * s + w * sp) / (n2 * n)
                + 3.0 * w * s * s / (n2 * n2 * n))

    return SphereCurve(pt, vel, acc,
                       closed=pcurve.closed if closed is None else closed,
                       sample_count=pcurve.sample_count,
                       name=name or f"lift({pcurve.name})", check_unit=False)


def chart_curve(curve, *, name=None):
    """Push a sphere curve lying in {x > 0} through the affine chart."""
    def coords(ts):
        p = curve.point(ts)
        x = p[..., 0]
        if np.any(x <= C.TAU_CHART):
            raise OutOfDomainError("curve leaves the chart domain x > 0")
        return p, x

    def pt(ts):
        p, x = coords(ts)
        return np.stack([p[..., 1] / x, p[..., 2] / x], axis=-1)

    def vel(ts):
        p, x = coords(ts)
        dp = curve.velocity(ts)
        xp = dp[..., 0]
        out = []
        for k in (1, 2):
            out.append((dp[..., k] * x - p[..., k] * xp) / x ** 2)
        return np.stack(out, axis=-1)

    def acc(ts):
        p, x = coords(ts)
        dp = curve.velocity(ts)
        d2p = curve.acceleration(ts)
        xp, xpp = dp[..., 0], d2p[..., 0]
        out = []
        for k in (1, 2):
            y, yp, ypp = p[..., k], dp[..., k], d2p[..., k]
            out.append((ypp * x - y * xpp) / x ** 2
                       - 2.0 * xp * (yp * x - y * xp) / x ** 3)
        return np.stack(out, axis=-1)

    return PlaneCurve(pt, vel, acc, closed=curve.closed,
                      sample_count=curve.sample_count,
                      name=name or f"chart({curve.name})")
