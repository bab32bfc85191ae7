"""Angle-function presentation of angular shells.

An angular shell on D3 x [0,1] is determined by a contact frame {Y, Z} and
a single real function c(p,t) through X = cos(c) Y + sin(c) Z; the shell is
Engel at (p,t) exactly when dc/dt > 0 there.  K-radial functions advance
linearly by K on the band t in [rho, 2 rho], are SO(3)-symmetric up to a
phase, and are the normal form the filling pipeline consumes.  Domination
compares endpoint angles and is realized constructively by monotone root
finding.
"""

from dataclasses import dataclass

import numpy as np

from . import constants as C
from .bumps import FlatBump, smoothstep
from .errors import (InsufficientRotationError, InvalidInputError,
                     InvalidProfileError, InvalidPumpError,
                     NeedsPredeformationError, NotAShellError)

_SQRT = np.sqrt


def ball_grid(n=9, boundary_dirs=64, rng=None):
    """Sample points of the closed unit ball: product grid plus sphere shell."""
    xs = np.linspace(-1.0, 1.0, n)
    X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    pts = pts[np.linalg.norm(pts, axis=-1) <= 1.0]
    dirs = fibonacci_sphere(boundary_dirs)
    return np.concatenate([pts, dirs], axis=0)


def fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * k / n)
    theta = np.pi * (1.0 + _SQRT(5.0)) * k
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi),
                     np.cos(phi)], axis=-1)


def collar_points(width=C.COLLAR_WIDTH, n_t=17, n_dir=32, n_r=5):
    """Sample points of Op(boundary of D3 x [0,1])."""
    dirs = fibonacci_sphere(n_dir)
    ts_full = np.linspace(0.0, 1.0, n_t)
    rs_out = np.linspace(1.0 - width, 1.0, n_r)
    lateral_p = (rs_out[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    lateral = [(np.repeat(lateral_p, n_t, axis=0),
                np.tile(ts_full, len(lateral_p)))]
    rs_in = np.linspace(0.0, 1.0, 9)
    face_p = (rs_in[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    ts_face = np.concatenate([np.linspace(0.0, width, 7),
                              np.linspace(1.0 - width, 1.0, 7)])
    faces = [(np.repeat(face_p, len(ts_face), axis=0),
              np.tile(ts_face, len(face_p)))]
    P = np.concatenate([lateral[0][0], faces[0][0]], axis=0)
    T = np.concatenate([lateral[0][1], faces[0][1]], axis=0)
    return P, T


class AngleFunction:
    """c : D3 x [0,1] -> R (radians) with a time-derivative evaluator."""

    def __init__(self, value, dt, *, collar_width=C.COLLAR_WIDTH, name=""):
        self._value = value
        self._dt = dt
        self.collar_width = float(collar_width)
        self.name = name

    def value(self, p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.asarray(self._value(p, t), dtype=float)

    def dt(self, p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.asarray(self._dt(p, t), dtype=float)

    def rotation(self, p):
        """Total rotation c(p,1) - c(p,0)."""
        p = np.asarray(p, dtype=float)
        ones = np.ones(p.shape[:-1])
        return self.value(p, ones) - self.value(p, 0.0 * ones)

    def collar_check(self):
        """(ok, worst dc/dt, witness (p,t)) over the boundary collar."""
        P, T = collar_points(self.collar_width)
        d = self.dt(P, T)
        i = int(np.argmin(d))
        return bool(d[i] > 0.0), float(d[i]), (P[i], float(T[i]))

    def shifted(self, offset):
        return AngleFunction(lambda p, t: self._value(p, t) + offset,
                             self._dt, collar_width=self.collar_width,
                             name=f"{self.name}+{offset:.3g}")


def angle_from_callable(fn, dfn=None, h=C.H_FD, **kw):
    if dfn is None:
        def dfn(p, t):
            return (fn(p, np.asarray(t) + h) - fn(p, np.asarray(t) - h)) / (2 * h)
    return AngleFunction(fn, dfn, **kw)


@dataclass
class RadialProfile:
    """Piecewise slope profile of a K-radial function.

    dc/dt is K s0/rho rising to K/rho before the band, exactly K/rho on
    [rho, 2 rho], and on the tail K/rho (1 - S0) + floor + q(r) B + m1 S1
    with windows chosen so the minimum achievable boundary rotation stays
    within ``overhead`` of K.
    """

    K: float
    rho: float
    s0: float = 0.02
    q0: float = 0.9
    x0: float = 0.02
    b_lo: float = 0.08
    b_hi: float = 0.94
    floor_frac: float = 0.003
    m1_frac: float = 0.01
    s1_lo: float = 0.95
    s1_hi: float = 0.985

    def __post_init__(self):
        K, rho = self.K, self.rho
        self.slope_band = K / rho
        self._pre = FlatBump.step(self.q0 * rho, rho)
        self._S0 = FlatBump.step(0.0, self.x0)
        b1 = self.b_lo + 0.4 * (self.b_hi - self.b_lo)
        b2 = self.b_lo + 0.6 * (self.b_hi - self.b_lo)
        self._B = FlatBump.plateau_bump(self.b_lo, b1, b2, self.b_hi)
        self._S1 = FlatBump.step(self.s1_lo, self.s1_hi)
        self.floor = self.floor_frac * self.slope_band
        self.m1 = self.m1_frac * self.slope_band
        # rise over [0, rho] and fixed part of the tail integral
        sb = self.slope_band
        self.pre_rise = sb * (self.s0 * rho
                              + (1 - self.s0) * float(self._pre.antiderivative(rho)))
        L = 1.0 - 2.0 * rho
        i_s0 = self.x0 / 2.0
        self.i_b = float(self._B.antiderivative(1.0))
        i_s1 = 1.0 - (self.s1_lo + self.s1_hi) / 2.0
        self.tail_fixed = L * (self.floor + (sb - self.floor) * i_s0
                               + (self.m1 - self.floor) * i_s1)
        self.min_rotation = self.pre_rise + K + self.tail_fixed

    def q_for_rotation(self, R):
        L = 1.0 - 2.0 * self.rho
        return (np.asarray(R) - self.min_rotation) / (L * self.i_b)

    def slope(self, t, q):
        """dc/dt (q = q(r) already evaluated; the band is q-free)."""
        rho, sb = self.rho, self.slope_band
        t, q = np.broadcast_arrays(np.asarray(t, dtype=float),
                                   np.asarray(q, dtype=float))
        out = np.empty(t.shape)
        pre = t < rho
        band = (t >= rho) & (t <= 2 * rho)
        tail = t > 2 * rho
        out[pre] = sb * (self.s0 + (1 - self.s0) * self._pre(t[pre]))
        out[band] = sb
        x = (t[tail] - 2 * rho) / (1.0 - 2 * rho)
        out[tail] = (self.floor + (sb - self.floor) * (1.0 - self._S0(x))
                     + q[tail] * self._B(x) + (self.m1 - self.floor) * self._S1(x))
        return out

    def gvalue(self, t, q):
        """G(t) = c(p,t) - c(p,rho), vanishing at t = rho."""
        rho, sb = self.rho, self.slope_band
        t, q = np.broadcast_arrays(np.asarray(t, dtype=float),
                                   np.asarray(q, dtype=float))
        out = np.empty(t.shape)
        pre = t < rho
        band = (t >= rho) & (t <= 2 * rho)
        tail = t > 2 * rho
        # integrate the pre-band slope from rho downward
        tp = t[pre]
        out[pre] = -(sb * self.s0 * (rho - tp)
                     + sb * (1 - self.s0) * (float(self._pre.antiderivative(rho))
                                             - self._pre.antiderivative(tp)))
        out[band] = sb * (t[band] - rho)
        L = 1.0 - 2.0 * rho
        x = (t[tail] - 2 * rho) / L
        out[tail] = self.K + L * (
            self.floor * x
            + (sb - self.floor) * (x - self._S0.antiderivative(x))
            + q[tail] * self._B.antiderivative(x)
            + (self.m1 - self.floor) * self._S1.antiderivative(x))
        return out


class RadialAngleFunction(AngleFunction):
    """K-radial angle function c(p,t) = phase(p) + G(|p|, t).

    G is radial with the exact linear band on [rho, 2 rho]; the phase is
    constant near the core segment, so the three K-radial conditions hold.
    """

    def __init__(self, K, rho, profile, q_of_r, phase=None, *, name="radial"):
        self.K = float(K)
        self.rho = float(rho)
        self.profile = profile
        self.q_of_r = q_of_r
        self.phase = phase or (lambda p: np.zeros(np.asarray(p).shape[:-1]))

        def value(p, t):
            p = np.asarray(p, dtype=float)
            r = np.linalg.norm(p, axis=-1)
            return self.phase(p) + profile.gvalue(t, q_of_r(r))

        def dt(p, t):
            p = np.asarray(p, dtype=float)
            r = np.linalg.norm(p, axis=-1)
            return profile.slope(t, q_of_r(r))

        super().__init__(value, dt, name=name)

    def band_margin(self):
        return self.K / self.rho

    def rotation_of_r(self, r):
        r = np.asarray(r, dtype=float)
        q = self.q_of_r(r)
        return (self.profile.gvalue(np.ones_like(r), q)
                - self.profile.gvalue(np.zeros_like(r), q))


def make_radial(K, rho=C.RHO, rotation=None, *, phase=None, value_at_zero=None,
                core_radius=0.15, overhead_budget=None, name="radial"):
    """Assemble a K-radial angle function with prescribed boundary rotation.

    ``rotation`` is a callable r -> total rotation c(p,1) - c(p,0) at radius
    r (constant near the core is enforced by blending); default is the
    minimum achievable rotation plus half a turn.  The profile windows are
    shrunk when ``overhead_budget`` (max rotation overhead above K at q=0)
    is given.
    """
    if not (K > 0 and 0 < rho and 2 * rho < 1):
        raise InvalidProfileError(f"need K > 0 and [rho, 2 rho] in (0,1), got K={K}, rho={rho}")
    prof = RadialProfile(K, rho)
    if overhead_budget is not None:
        need = prof.min_rotation - K
        if need > overhead_budget:
            f = max(0.05, 0.9 * overhead_budget / need)
            prof = RadialProfile(K, rho, s0=0.02 * f, q0=1 - (1 - 0.9) * f,
                                 x0=0.02 * f, floor_frac=0.003 * f,
                                 m1_frac=0.01 * f,
                                 s1_lo=1 - 0.05 * f, s1_hi=1 - 0.015 * f)
            if prof.min_rotation - K > overhead_budget:
                raise InvalidProfileError(
                    f"cannot fit rotation overhead {prof.min_rotation - K:.3e} "
                    f"into budget {overhead_budget:.3e}")
    if rotation is None:
        base_rot = prof.min_rotation + np.pi / 2.0
        rotation = lambda r: base_rot * np.ones_like(np.asarray(r, dtype=float))
    if value_at_zero is not None:
        if phase is not None:
            raise InvalidInputError("pass either phase or value_at_zero, not both")
        offset = prof.pre_rise  # -G(0)
        if callable(value_at_zero):
            phase = lambda p: value_at_zero(p) + offset
        else:
            v0 = float(value_at_zero)
            phase = lambda p: v0 + offset + np.zeros(np.asarray(p).shape[:-1])

    def rot_blended(r):
        r = np.asarray(r, dtype=float)
        w = smoothstep((r - core_radius) / core_radius)
        r_core = np.full_like(r, core_radius)
        return (1.0 - w) * rotation(r_core) + w * rotation(r)

    def q_of_r(r):
        return prof.q_for_rotation(rot_blended(r))

    rad = RadialAngleFunction(K, rho, prof, q_of_r, phase=phase, name=name)
    slopes = prof.slope(np.linspace(0.0, 2 * rho, 513), 0.0)
    if np.min(slopes) <= 0:
        raise InvalidProfileError("profile not increasing on [0, 2 rho]")
    return rad


def angle_sum(c, extra, extra_dt):
    return AngleFunction(lambda p, t: c.value(p, t) + extra(p, t),
                         lambda p, t: c.dt(p, t) + extra_dt(p, t),
                         collar_width=c.collar_width, name=f"{c.name}+delta")


class ContactFrame:
    """Contact plane field with an orthonormal Legendrian frame {Y, Z}.

    The stored 1-form alpha defines xi; n = Y x Z is the unit normal.  The
    default is the Darboux model xi = ker(dz - y dx) with Y = d_y and
    Z = (d_x + y d_z)/sqrt(1+y^2).
    """

    def __init__(self, alpha, Y, Z, *, name="frame"):
        self._alpha = alpha
        self._Y = Y
        self._Z = Z
        self.name = name

    @classmethod
    def darboux(cls):
        def alpha(p):
            p = np.asarray(p, dtype=float)
            out = np.zeros_like(p)
            out[..., 0] = -p[..., 1]
            out[..., 2] = 1.0
            return out

        def Y(p):
            p = np.asarray(p, dtype=float)
            out = np.zeros_like(p)
            out[..., 1] = 1.0
            return out

        def Z(p):
            p = np.asarray(p, dtype=float)
            s = np.sqrt(1.0 + p[..., 1] ** 2)
            out = np.zeros_like(p)
            out[..., 0] = 1.0 / s
            out[..., 2] = p[..., 1] / s
            return out

        return cls(alpha, Y, Z, name="darboux")

    def alpha(self, p):
        return np.asarray(self._alpha(np.asarray(p, dtype=float)), dtype=float)

    def Y(self, p):
        return np.asarray(self._Y(np.asarray(p, dtype=float)), dtype=float)

    def Z(self, p):
        return np.asarray(self._Z(np.asarray(p, dtype=float)), dtype=float)

    def normal(self, p):
        return np.cross(self.Y(p), self.Z(p))

    def basis(self, p):
        """Rows stacked as a (..., 3, 3) matrix with columns (Y, Z, n)."""
        return np.stack([self.Y(p), self.Z(p), self.normal(p)], axis=-1)

    def validate(self, n=7):
        pts = ball_grid(n)
        Y, Z = self.Y(pts), self.Z(pts)
        a = self.alpha(pts)
        checks = {
            "unit_Y": np.max(np.abs(np.linalg.norm(Y, axis=-1) - 1)),
            "unit_Z": np.max(np.abs(np.linalg.norm(Z, axis=-1) - 1)),
            "orth": np.max(np.abs(np.sum(Y * Z, axis=-1))),
            "legendrian_Y": np.max(np.abs(np.sum(a * Y, axis=-1))),
            "legendrian_Z": np.max(np.abs(np.sum(a * Z, axis=-1))),
        }
        worst = max(checks.values())
        if worst > 1e3 * C.TAU_UNIT:
            raise InvalidInputError(f"contact frame invalid: {checks}")
        return checks


class AngularShell:
    """Angle function plus contact frame; X = cos(c) Y + sin(c) Z."""

    def __init__(self, c, frame=None, *, check_collar=True, name=None):
        self.c = c
        self.frame = frame or ContactFrame.darboux()
        self.name = name or f"angular({c.name})"
        if check_collar:
            ok, worst, witness = c.collar_check()
            if not ok:
                raise NotAShellError(
                    f"boundary collar is not Engel: dc/dt = {worst:.3e}",
                    witness=witness)

    def x_field(self, p, t):
        cv = self.c.value(p, t)[..., None]
        return np.cos(cv) * self.frame.Y(p) + np.sin(cv) * self.frame.Z(p)

    def x_field_dt(self, p, t):
        cv = self.c.value(p, t)[..., None]
        dc = self.c.dt(p, t)[..., None]
        return dc * (-np.sin(cv) * self.frame.Y(p) + np.cos(cv) * self.frame.Z(p))

    def x_field_dtt(self, p, t, h=C.H_FD):
        return (self.x_field_dt(p, np.asarray(t) + h)
                - self.x_field_dt(p, np.asarray(t) - h)) / (2 * h)


def angle_to_shell(c, frame=None):
    """Build the angular shell of an angle function (collar must be Engel)."""
    return AngularShell(c, frame)


def engel_margin_angular(shell, p, t):
    """dc/dt: positive exactly where the angular shell is Engel."""
    return shell.c.dt(p, t)


def dominates(c1, c2, points=None):
    """c1 dominates c2: c1(p,0) <= c2(p,0) and c2(p,1) <= c1(p,1) on D3."""
    pts = ball_grid(9) if points is None else np.asarray(points, dtype=float)
    zeros = np.zeros(len(pts))
    ones = np.ones(len(pts))
    lo = c1.value(pts, zeros) <= c2.value(pts, zeros) + 1e-12
    hi = c2.value(pts, ones) <= c1.value(pts, ones) + 1e-12
    return bool(np.all(lo) and np.all(hi))


def dominated_radial(c, K, *, rho=C.RHO, tau=C.TAU_DOM, core_radius=0.15,
                     n_dirs=128, n_r=65):
    """A K-radial function dominated by c (Engel-shell domination order).

    Requires K < min over the boundary sphere of the rotation of c, with
    margin tau.  The construction pins c'(p,0) slightly above c(p,0) (phase
    equal to c(.,0) + pad away from the core, constant inside) and caps the
    radial rotation so c'(p,1) stays below c(p,1).
    """
    dirs = fibonacci_sphere(n_dirs)
    rot_bdry = c.rotation(dirs)
    bmin = float(np.min(rot_bdry))
    if K >= bmin - tau:
        raise InsufficientRotationError(
            f"need K < boundary rotation min {bmin:.6f} - tau", boundary_min=bmin)
    slack = bmin - K
    pad = min(0.2, slack / 4.0)

    core2 = 2.0 * core_radius
    core_pts = ball_grid(9)
    core_pts = core_pts[np.linalg.norm(core_pts, axis=-1) <= core2 + 1e-9]
    M0 = float(np.max(c.value(core_pts, np.zeros(len(core_pts))))) + pad

    def value0(p):
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p, axis=-1)
        w = smoothstep((r - core_radius) / core_radius)
        return (1.0 - w) * M0 + w * (c.value(p, np.zeros(r.shape)) + pad)

    rs = np.linspace(0.0, 1.0, n_r)
    pts = rs[:, None, None] * dirs[None, :, :]
    flat = pts.reshape(-1, 3)
    cap = (c.value(flat, np.ones(len(flat))) - value0(flat)).reshape(n_r, n_dirs)
    cap_r = cap.min(axis=1) - pad

    def rotation(r):
        return np.interp(np.asarray(r, dtype=float), rs, cap_r)

    rad = make_radial(K, rho, rotation, value_at_zero=value0,
                      core_radius=core_radius, overhead_budget=slack / 2.0,
                      name=f"dominated(K={K:.3g})")
    if not dominates(c, rad):
        raise InsufficientRotationError(
            "constructed radial function is not dominated", boundary_min=bmin)
    return rad


def embed_dominated(c1, c2, p, *, n_scan=257):
    """Reparametrization endpoints h0 <= h1 with c1(p, h_i(p)) = c2(p, i).

    Monotone root finding (bisection bracket from a scan plus Newton
    polish); raises when c1(p, .) is not increasing through the needed
    level on the end segments.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    ts = np.linspace(0.0, 1.0, n_scan)
    out = np.zeros((2, len(p)))
    for i, side in enumerate((0.0, 1.0)):
        target = c2.value(p, np.full(len(p), side))
        for j, pj in enumerate(p):
            vals = c1.value(np.broadcast_to(pj, (n_scan, 3)), ts) - target[j]
            if abs(vals[0]) < 1e-14:
                out[i, j] = 0.0
                continue
            if abs(vals[-1]) < 1e-14:
                out[i, j] = 1.0
                continue
            sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
            if len(sign_change) == 0:
                raise NeedsPredeformationError(
                    f"no root for c1(p,t) = c2(p,{int(side)}) at p={pj}")
            k = sign_change[0] if side == 0.0 else sign_change[-1]
            a, b = ts[k], ts[k + 1]
            t = 0.5 * (a + b)
            for _ in range(80):
                r = float(c1.value(pj, t)) - target[j]
                if abs(r) < C.TAU_ROOT * 1e-3:
                    break
                d = float(c1.dt(pj, t))
                if (r > 0) == (vals[k + 1] > vals[k]):
                    b = t
                else:
                    a = t
                tn = t - r / d if d != 0 else 0.5 * (a + b)
                t = tn if a < tn < b else 0.5 * (a + b)
            if float(c1.dt(pj, t)) <= 0:
                raise NeedsPredeformationError(
                    f"c1 not increasing at the matching time t={t:.4f}, p={pj}")
            out[i, j] = t
    h0, h1 = out[0], out[1]
    if np.any(h0 > h1 + 1e-12):
        raise NeedsPredeformationError("h0 > h1; domination endpoints crossed")
    return h0, h1


def pump_energy(c, h, beta, *, n_quad=129):
    """Interpolate c toward the primitive of a target derivative h.

    d = (1 - beta) c + beta (c(p,0) + int_0^t h); beta is a cutoff object
    with value/dt; h(p,t) must be positive wherever beta > 0.
    """
    xs = np.linspace(0.0, 1.0, n_quad)
    w = np.ones(n_quad)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w /= 3.0 * (n_quad - 1)

    def H(p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        pb, tb = np.broadcast_arrays(p, t[..., None] * np.ones(3))
        tt = tb[..., 0]
        nodes = tt[..., None] * xs
        pp = np.repeat(pb[..., None, :], n_quad, axis=-2)
        hv = h(pp, nodes)
        return tt * np.sum(hv * w, axis=-1)

    def check_positive(p, t):
        b = beta.value(p, t)
        hv = h(p, t)
        bad = (b > 1e-12) & (hv <= 0)
        if np.any(bad):
            raise InvalidPumpError("target derivative nonpositive where the cutoff is active")

    def value(p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        check_positive(p, t)
        b = beta.value(p, t)
        c0 = c.value(p, np.zeros_like(t))
        return (1.0 - b) * c.value(p, t) + b * (c0 + H(p, t))

    def dt(p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        b = beta.value(p, t)
        bd = beta.dt(p, t)
        c0 = c.value(p, np.zeros_like(t))
        return ((1.0 - b) * c.dt(p, t) + b * h(p, t)
                + bd * (c0 + H(p, t) - c.value(p, t)))

    return AngleFunction(value, dt, collar_width=c.collar_width,
                         name=f"pumped({c.name})")


class SpaceTimeCutoff:
    """Separable cutoff beta(p,t) = bump_r(|p|) * bump_t(t) with flat ends."""

    def __init__(self, bump_t, bump_r=None):
        self.bump_t = bump_t
        self.bump_r = bump_r

    def value(self, p, t):
        out = self.bump_t(np.asarray(t, dtype=float))
        if self.bump_r is not None:
            out = out * self.bump_r(np.linalg.norm(np.asarray(p, dtype=float), axis=-1))
        return out

    def dt(self, p, t):
        out = self.bump_t.d1(np.asarray(t, dtype=float))
        if self.bump_r is not None:
            out = out * self.bump_r(np.linalg.norm(np.asarray(p, dtype=float), axis=-1))
        return out
