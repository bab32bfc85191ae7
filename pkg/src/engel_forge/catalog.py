"""Explicit spherical curves and constructive convex homotopies.

The kink beta_theta is the section of S2 by the plane
sin(theta)(x-1) + cos(theta) z = 0; the four-leaf clover is the lift of the
locally convex plane curve (cos t sin 2t, sin t sin 2t) through the inverse
affine chart.  Closed locally convex plane curves are (re)built from their
tangent-angle parametrization: phi runs over [0, 2 pi n] for turning number
n, rho(phi) > 0 is the radius of curvature, and the curve is
base + int rho(phi) e^{i phi} dphi.  Closure is the linear condition
int rho e^{i phi} = 0, so linear interpolation of rho gives paths of closed
locally convex curves; this is the constructive route between convex curves
in the same component.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import constants as C
from .errors import (InvalidInputError, NoPathError, NotLocallyConvexError,
                     OutOfDomainError)
from .sphere import (PlaneCurve, SphereCurve, chart_curve, frenet,
                     lift_plane_curve, little_component, signed_curvature)


def kink(theta, laps=1):
    """The kink curve beta_theta, native domain [0, 2 pi laps] scaled to [0,1].

    theta = 0 is the constant-speed equator; theta in (0, pi/2) gives convex
    circles through (1,0,0) with identity Frenet frame at t = 0.
    """
    if not (np.isfinite(theta) and 0.0 <= theta < np.pi / 2):
        raise InvalidInputError(f"kink angle must lie in [0, pi/2), got {theta}")
    st, ct = np.sin(theta), np.cos(theta)
    w = 2.0 * np.pi * laps

    def pt(ts):
        T = w * np.asarray(ts)
        return np.stack([st ** 2 + ct ** 2 * np.cos(T), ct * np.sin(T),
                         st * ct * (1.0 - np.cos(T))], axis=-1)

    def vel(ts):
        T = w * np.asarray(ts)
        return w * np.stack([-ct ** 2 * np.sin(T), ct * np.cos(T),
                             st * ct * np.sin(T)], axis=-1)

    def acc(ts):
        T = w * np.asarray(ts)
        return w ** 2 * np.stack([-ct ** 2 * np.cos(T), -ct * np.sin(T),
                                  st * ct * np.cos(T)], axis=-1)

    return SphereCurve(pt, vel, acc, closed=True, name=f"kink({theta:.4g})x{laps}")


def plane_clover():
    """The four-leaf clover f(t) = (cos t sin 2t, sin t sin 2t) on [0,1]."""
    w = 2.0 * np.pi

    def pt(ts):
        T = w * np.asarray(ts)
        return np.stack([np.cos(T) * np.sin(2 * T),
                         np.sin(T) * np.sin(2 * T)], axis=-1)

    def vel(ts):
        T = w * np.asarray(ts)
        return w * np.stack(
            [-np.sin(T) * np.sin(2 * T) + 2 * np.cos(T) * np.cos(2 * T),
             np.cos(T) * np.sin(2 * T) + 2 * np.sin(T) * np.cos(2 * T)], axis=-1)

    def acc(ts):
        T = w * np.asarray(ts)
        return w ** 2 * np.stack(
            [-5 * np.cos(T) * np.sin(2 * T) - 4 * np.sin(T) * np.cos(2 * T),
             -5 * np.sin(T) * np.sin(2 * T) + 4 * np.cos(T) * np.cos(2 * T)], axis=-1)

    return PlaneCurve(pt, vel, acc, closed=True, name="plane-clover")


def clover():
    """The spherical four-leaf clover, convex with plane Gauss winding 3."""
    return lift_plane_curve(plane_clover(), closed=True, name="clover")


def equator_lap(K):
    """t -> Rot(K t) e1: the horizontal equator swept by total angle K."""
    if K == 0 or not np.isfinite(K):
        raise InvalidInputError("equator lap needs a nonzero finite total angle")

    def pt(ts):
        T = K * np.asarray(ts)
        return np.stack([np.cos(T), np.sin(T), 0.0 * T], axis=-1)

    def vel(ts):
        T = K * np.asarray(ts)
        return K * np.stack([-np.sin(T), np.cos(T), 0.0 * T], axis=-1)

    def acc(ts):
        T = K * np.asarray(ts)
        return K ** 2 * np.stack([-np.cos(T), -np.sin(T), 0.0 * T], axis=-1)

    closed = abs(K / (2 * np.pi) - round(K / (2 * np.pi))) < 1e-12
    return SphereCurve(pt, vel, acc, closed=closed, name=f"equator({K:.4g})")


@dataclass
class SupportParametrization:
    """Tangent-angle data of a closed locally convex plane curve.

    rho is the radius of curvature on the uniform grid phis in [0, 2 pi n];
    absolute tangent angle is phi0 + phi.  closure_residual records
    |int rho e^{i phi}| before the projection that closes the curve exactly.
    """

    turning: int
    phis: np.ndarray
    rho: np.ndarray
    base_point: np.ndarray
    phi0: float
    closure_residual: float

    def rho_spline(self):
        r = self.rho.copy()
        r[-1] = r[0]
        return CubicSpline(self.phis, r, bc_type="periodic")


def to_support_param(pcurve, n_grid=4097, dense=16385):
    """Tangent-angle reparametrization of a closed locally convex plane curve."""
    ts = np.linspace(0.0, 1.0, dense)
    v = pcurve.velocity(ts)
    sp = np.linalg.norm(v, axis=-1)
    if np.min(sp) <= C.TAU_REG:
        raise NotLocallyConvexError("curve has vanishing velocity")
    kappa = signed_curvature(pcurve, ts)
    if np.min(kappa) <= C.TAU_RHO:
        if np.max(kappa) < -C.TAU_RHO:
            raise NotLocallyConvexError(
                "curvature is negative; traverse the curve with positive orientation")
        raise NotLocallyConvexError(
            f"curvature changes sign or vanishes (min {np.min(kappa):.3e})")
    theta = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    total = theta[-1] - theta[0]
    n = int(round(total / (2 * np.pi)))
    if n < 1 or abs(total - 2 * np.pi * n) > 1e-6 * max(1.0, n):
        raise NotLocallyConvexError(
            f"total turning {total:.6f} is not a positive multiple of 2 pi")
    phi0 = float(theta[0])

    # monotone inversion t(psi) on the uniform tangent-angle grid
    psis = np.linspace(0.0, 2 * np.pi * n, n_grid)
    t_of_psi = np.interp(psis + phi0, theta, ts)
    theta_spline = PchipInterpolator(ts, theta)
    for _ in range(3):  # Newton polish, theta'(t) = kappa * speed > 0
        res = theta_spline(t_of_psi) - (psis + phi0)
        dth = signed_curvature(pcurve, t_of_psi) * np.linalg.norm(
            pcurve.velocity(t_of_psi), axis=-1)
        t_of_psi = np.clip(t_of_psi - res / dth, 0.0, 1.0)

    rho = 1.0 / signed_curvature(pcurve, t_of_psi)

    # project onto the closure condition int rho e^{i phi} = 0
    ang = phi0 + psis
    e = np.exp(1j * ang)
    spl_re = CubicSpline(psis, rho * e.real)
    spl_im = CubicSpline(psis, rho * e.imag)
    span = 2 * np.pi * n
    res = complex(spl_re.integrate(0.0, span), spl_im.integrate(0.0, span))
    a = res.real / (np.pi * n)
    b = res.imag / (np.pi * n)
    rho_closed = rho - a * np.cos(ang) - b * np.sin(ang)
    if np.min(rho_closed) <= C.TAU_RHO:
        raise NotLocallyConvexError("closure projection made rho nonpositive")
    return SupportParametrization(n, psis, rho_closed, pcurve.point(0.0),
                                  phi0, abs(res))


def from_support_param(sp, sample_count=C.CONVEXITY_SAMPLES):
    """Rebuild the plane curve of a support parametrization.

    The result is tangent-angle parametrized: t = phi / (2 pi n), so the
    speed is 2 pi n rho(phi) and the signed curvature never vanishes.
    """
    n = sp.turning
    span = 2 * np.pi * n
    rho_s = sp.rho_spline()
    ang = sp.phi0 + sp.phis
    cx = CubicSpline(sp.phis, sp.rho * np.cos(ang))
    cy = CubicSpline(sp.phis, sp.rho * np.sin(ang))
    ix, iy = cx.antiderivative(), cy.antiderivative()
    base = np.asarray(sp.base_point, dtype=float)

    def pt(ts):
        psi = span * np.asarray(ts)
        return base + np.stack([ix(psi), iy(psi)], axis=-1)

    def vel(ts):
        psi = span * np.asarray(ts)
        a = sp.phi0 + psi
        r = rho_s(psi)
        return span * np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)

    def acc(ts):
        psi = span * np.asarray(ts)
        a = sp.phi0 + psi
        r, rp = rho_s(psi), rho_s(psi, 1)
        ca, sa = np.cos(a), np.sin(a)
        return span ** 2 * np.stack([rp * ca - r * sa, rp * sa + r * ca], axis=-1)

    return PlaneCurve(pt, vel, acc, closed=True, sample_count=sample_count,
                      name=f"support(n={n})")


class CurveFamily:
    """One-parameter family of sphere curves s -> gamma_s on [s_lo, s_hi].

    Slices are built lazily by ``slice_fn`` and cached; ``meta`` carries
    construction data (run-in angles, windows) for downstream consumers.
    """

    def __init__(self, slice_fn, s_lo=0.0, s_hi=1.0, *, name="", meta=None):
        self._slice_fn = slice_fn
        self.s_lo = float(s_lo)
        self.s_hi = float(s_hi)
        self.name = name
        self.meta = dict(meta or {})
        self._cache = {}

    def slice(self, s):
        s = float(s)
        if not (self.s_lo - 1e-12 <= s <= self.s_hi + 1e-12):
            raise InvalidInputError(
                f"family parameter {s} outside [{self.s_lo}, {self.s_hi}]")
        key = round(s, 14)
        cur = self._cache.get(key)
        if cur is None:
            cur = self._slice_fn(min(max(s, self.s_lo), self.s_hi))
            if len(self._cache) > 2048:
                self._cache.clear()
            self._cache[key] = cur
        return cur

    def point(self, s, ts):
        return self.slice(s).point(ts)

    def map_slices(self, fn, ss):
        return [fn(self.slice(s)) for s in np.asarray(ss, dtype=float)]

    def lipschitz_in_s(self, n_s=33, n_t=129):
        """Max slice-to-slice sup-distance per unit parameter step."""
        ss = np.linspace(self.s_lo, self.s_hi, n_s)
        ts = np.linspace(0.0, 1.0, n_t)
        prev = self.slice(ss[0]).point(ts)
        worst = 0.0
        for s0, s1 in zip(ss[:-1], ss[1:]):
            cur = self.slice(s1).point(ts)
            worst = max(worst, float(np.max(np.linalg.norm(cur - prev, axis=-1))
                                     / (s1 - s0)))
            prev = cur
        return worst


def constant_family(curve, s_lo=0.0, s_hi=1.0):
    return CurveFamily(lambda s: curve, s_lo, s_hi, name=f"const({curve.name})")


def _normalize_start_frame(curve):
    """Rotate so that the Frenet frame at t = 0 is the identity."""
    R = frenet(curve, 0.0)
    return curve.rotate(R.T)


def convex_homotopy(c0, c1, *, sample_count=C.CONVEXITY_SAMPLES,
                    check_components=True, n_grid=4097):
    """Path of convex curves from c0 to c1 through closed convex slices.

    Inputs are closed convex sphere curves inside the chart domain {x > 0}
    (or plane curves given directly).  Radii of curvature are interpolated
    linearly in the tangent-angle parametrization, which preserves both
    closure and positivity; every slice is renormalized to have identity
    Frenet frame at t = 0.
    """
    plane0 = c0 if isinstance(c0, PlaneCurve) else chart_curve(c0)
    plane1 = c1 if isinstance(c1, PlaneCurve) else chart_curve(c1)
    if check_components and isinstance(c0, SphereCurve) and isinstance(c1, SphereCurve):
        l0, l1 = little_component(c0), little_component(c1)
        if l0 != l1:
            raise NoPathError(f"inputs lie in different components: {l0} vs {l1}")
    sp0 = to_support_param(plane0, n_grid=n_grid)
    sp1 = to_support_param(plane1, n_grid=n_grid)
    if sp0.turning != sp1.turning:
        raise NoPathError(
            f"turning numbers differ: {sp0.turning} vs {sp1.turning}")

    def make(s):
        rho = (1.0 - s) * sp0.rho + s * sp1.rho
        if np.min(rho) <= C.TAU_RHO:
            raise NotLocallyConvexError(f"interpolated rho nonpositive at s={s}")
        sp = SupportParametrization(
            sp0.turning, sp0.phis, rho,
            (1.0 - s) * sp0.base_point + s * sp1.base_point,
            (1.0 - s) * sp0.phi0 + s * sp1.phi0,
            max(sp0.closure_residual, sp1.closure_residual))
        pc = from_support_param(sp, sample_count=sample_count)
        lifted = lift_plane_curve(pc, closed=True, name=f"homotopy(s={s:.3f})")
        return _normalize_start_frame(lifted)

    fam = CurveFamily(make, 0.0, 1.0, name=f"homotopy({c0.name}->{c1.name})",
                      meta={"turning": sp0.turning, "sp0": sp0, "sp1": sp1})
    return fam
