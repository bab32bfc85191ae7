"""Engel combs: r-indexed families of spherical curves encoding shells.

A radial angle function c yields the comb gamma_r(t) = Rot(c(p,t) -
c(p,rho)) e1 (equatorial curves).  A comb plus a phase d : D3 -> R yields
a shell through the frame isometry: X(p,t) = A(p) Rot(d(p)) gamma_{|p|}(t)
with A = (Y | Z | Y x Z) the contact-frame trivialization.  Tameness
(nonvanishing speeds, inflections confined to horizontal flat-tangency
bands) is what makes the induced shell solid, and is checked on a grid
with flood-fill clustering of near-zero inflection margins.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import constants as C
from .catalog import CurveFamily
from .errors import NotAShellError
from .shells import ContactFrame, RadialAngleFunction
from .sphere import inflection_margin
from .verify import FormalEngelShell


class EngelComb:
    """Family of spherical curves gamma_r, r in [0,1], with collar data.

    ``slice_fn`` builds the curve at any real radius; slices are cached.
    ``reference`` is the radial angle function whose comb this deforms
    (used by the collar invariants), ``angle_data`` optionally returns
    (theta, dtheta/dt) closed forms where the slice is equatorial.
    """

    def __init__(self, slice_fn, K, rho, reference=None, *, name="comb",
                 meta=None):
        self.family = CurveFamily(slice_fn, 0.0, 1.0, name=name, meta=meta)
        self.K = float(K)
        self.rho = float(rho)
        self.reference = reference
        self.name = name

    def slice(self, r):
        return self.family.slice(r)

    @property
    def meta(self):
        return self.family.meta

    def reference_angle(self, r, t):
        """G(r,t) = c(p,t) - c(p,rho) of the reference radial function."""
        c = self.reference
        r = np.asarray(r, dtype=float)
        return c.profile.gvalue(np.asarray(t, dtype=float), c.q_of_r(r))

    def reference_curve_points(self, r, ts):
        th = self.reference_angle(r, ts)
        return np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)

    def validate(self, tol=1e-8):
        """Collar invariants: (a) matches the reference comb near r = 1 on
        the quantified windows, (b) r-invariance near the core."""
        rho = self.rho
        ts = np.concatenate([np.linspace(0.0, 2 * rho + 0.02, 65),
                             np.linspace(0.98, 1.0, 9)])
        worst_a = 0.0
        for r in (0.98, 0.99, 1.0):
            pts = self.slice(r).point(ts)
            ref = self.reference_curve_points(r, ts)
            worst_a = max(worst_a, float(np.max(np.linalg.norm(pts - ref, axis=-1))))
        ts_all = np.linspace(0.0, 1.0, 129)
        base = self.slice(0.0).point(ts_all)
        worst_b = 0.0
        for r in (0.01, 0.02):
            worst_b = max(worst_b, float(np.max(np.linalg.norm(
                self.slice(r).point(ts_all) - base, axis=-1))))
        return {"collar_match": worst_a, "core_invariance": worst_b,
                "ok": worst_a <= tol and worst_b <= tol}


def radial_comb(c):
    """The comb of a radial angle function: equatorial curves, exact band."""
    if not isinstance(c, RadialAngleFunction):
        raise NotAShellError("radial_comb needs a RadialAngleFunction")

    def make(r):
        q = c.q_of_r(np.asarray(r, dtype=float))

        def theta(ts):
            return c.profile.gvalue(np.asarray(ts, dtype=float), q)

        def theta_d1(ts):
            return c.profile.slope(np.asarray(ts, dtype=float), q)

        return _equator_slice(theta, theta_d1, name=f"gamma_r({float(r):.4f})")

    return EngelComb(make, c.K, c.rho, reference=c, name=f"comb({c.name})")


def _equator_slice(theta, theta_d1, theta_d2=None, *, name=""):
    from .sphere import SphereCurve

    def pt(ts):
        th = theta(np.asarray(ts, dtype=float))
        return np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)

    def vel(ts):
        ts = np.asarray(ts, dtype=float)
        th, d1 = theta(ts), theta_d1(ts)
        return d1[..., None] * np.stack([-np.sin(th), np.cos(th),
                                         np.zeros_like(th)], axis=-1)

    def acc(ts):
        ts = np.asarray(ts, dtype=float)
        th, d1 = theta(ts), theta_d1(ts)
        if theta_d2 is not None:
            d2 = theta_d2(ts)
        else:
            h = C.H_FD
            d2 = (theta_d1(ts + h) - theta_d1(ts - h)) / (2 * h)
        tang = np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)
        rad = np.stack([-np.cos(th), -np.sin(th), np.zeros_like(th)], axis=-1)
        return d2[..., None] * tang + (d1 ** 2)[..., None] * rad

    return SphereCurve(pt, vel, acc, name=name, check_unit=False)


def comb_to_shell(comb, d=None, frame=None, *, r_step=1e-4):
    """Shell of a comb: X(p,t) = A(p) Rot(d(p)) gamma_{|p|}(t).

    The returned FormalEngelShell carries a semi-analytic contact-margin
    hook: the normal of <X, Xdot> is B(p) G(|p|, t) with B = A Rot(d) and
    G the unit normal data of the comb slices, so the p-derivatives split
    into cheap frame derivatives and a single radial derivative of G.
    """
    fr = frame or ContactFrame.darboux()
    if d is None:
        d_fn = lambda p: np.zeros(np.asarray(p).shape[:-1])
    elif callable(d):
        d_fn = d
    else:
        d_val = float(d)
        d_fn = lambda p: np.full(np.asarray(p).shape[:-1], d_val)

    def _group_eval(p, t, attr):
        """Evaluate slice data gamma_{|p_i|}(t_i) grouping by radius."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
        r = np.linalg.norm(p, axis=-1)
        out = np.empty(p.shape)
        rr = np.round(r, 12)
        for rv in np.unique(rr):
            m = rr == rv
            cur = comb.slice(min(max(float(rv), 0.0), 1.0))
            out[m] = getattr(cur, attr)(t[m])
        return out

    def bmat(p):
        """B(p) = A(p) Rot(d(p)) as (...,3,3)."""
        p = np.asarray(p, dtype=float)
        A = fr.basis(p)
        dv = d_fn(p)
        cd, sd = np.cos(dv), np.sin(dv)
        R = np.zeros(p.shape[:-1] + (3, 3))
        R[..., 0, 0] = cd
        R[..., 0, 1] = -sd
        R[..., 1, 0] = sd
        R[..., 1, 1] = cd
        R[..., 2, 2] = 1.0
        return A @ R

    def x(p, t):
        g = _group_eval(p, t, "point")
        return np.einsum("...ij,...j->...i", bmat(p), g)

    def x_dt(p, t):
        g = _group_eval(p, t, "velocity")
        return np.einsum("...ij,...j->...i", bmat(p), g)

    def x_dtt(p, t):
        g = _group_eval(p, t, "acceleration")
        return np.einsum("...ij,...j->...i", bmat(p), g)

    def contact_margin_fn(p, t, hp=1e-5):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
        r = np.linalg.norm(p, axis=-1)

        def ghat(rr, tt):
            pts = _slice_normal(comb, rr, tt)
            return pts

        G = ghat(r, t)
        Gp = ghat(np.minimum(r + r_step, 1.0), t)
        Gm = ghat(np.maximum(r - r_step, 0.0), t)
        dG = (Gp - Gm) / (np.minimum(r + r_step, 1.0)
                          - np.maximum(r - r_step, 0.0))[..., None]
        rhat = np.where(r[..., None] > 1e-9, p / np.maximum(r[..., None], 1e-9), 0.0)
        B0 = bmat(p)
        N0 = np.einsum("...ij,...j->...i", B0, G)
        J = np.empty(p.shape + (3,))
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = hp
            Bp = bmat(p + dp)
            Bm = bmat(p - dp)
            dB = (Bp - Bm) / (2 * hp)
            J[..., k] = (np.einsum("...ij,...j->...i", dB, G)
                         + np.einsum("...ij,...j->...i", B0, dG) * rhat[..., k:k + 1])
        curl = np.stack([J[..., 2, 1] - J[..., 1, 2],
                         J[..., 0, 2] - J[..., 2, 0],
                         J[..., 1, 0] - J[..., 0, 1]], axis=-1)
        return np.sum(N0 * curl, axis=-1)

    shell = FormalEngelShell(x, x_dt, x_dtt, frame=fr, e_pinned="collar",
                             symmetry="radial", name=f"shell({comb.name})")
    shell.contact_margin_fn = contact_margin_fn
    shell.comb = comb
    return shell


def _slice_normal(comb, r, t):
    """Unit normal of <gamma, gamma'> per sample, grouped by radius."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.empty(r.shape + (3,))
    rr = np.round(r, 12)
    for rv in np.unique(rr):
        m = rr == rv
        cur = comb.slice(min(max(float(rv), 0.0), 1.0))
        g = cur.point(t[m])
        gd = cur.velocity(t[m])
        nv = np.cross(g, gd)
        out[m] = nv / np.linalg.norm(nv, axis=-1, keepdims=True)
    return out


@dataclass
class TamenessBox:
    r_range: tuple
    t_range: tuple
    certified: bool
    max_z: float
    max_z_jet: float
    cells: int


@dataclass
class TamenessReport:
    passed: bool
    min_speed: float
    speed_witness: tuple
    boxes: list
    grid: tuple
    cluster_tol: float
    band_tol: float

    def to_dict(self):
        return {
            "pass": bool(self.passed),
            "min_speed": float(self.min_speed),
            "speed_witness": list(self.speed_witness),
            "grid": list(self.grid),
            "cluster_tol": self.cluster_tol,
            "band_tol": self.band_tol,
            "boxes": [{
                "r_range": list(b.r_range), "t_range": list(b.t_range),
                "certified": bool(b.certified), "max_z": float(b.max_z),
                "max_z_jet": float(b.max_z_jet), "cells": int(b.cells),
            } for b in self.boxes],
        }


def tameness_report(comb, n_r=129, n_t=257, *, cluster_tol=C.INFLECTION_CLUSTER_TOL,
                    band_tol=C.TAU_BAND, jet_h=None):
    """Speeds and inflection structure of a comb over an (r,t) grid.

    Near-zero inflection margins are flood-filled into boxes; a box is
    certified when every candidate cell lies in a horizontal run of at
    least two cells whose z-values and z-jets (orders 1..4) stay below the
    band tolerance.  The report passes iff the minimum speed clears the
    regularity threshold and every box is certified.
    """
    rs = np.linspace(0.0, 1.0, n_r)
    ts = np.linspace(0.0, 1.0, n_t)
    h = jet_h or (0.25 / n_t)
    speeds = np.empty((n_r, n_t))
    margins = np.empty((n_r, n_t))
    zmax = np.empty((n_r, n_t))
    zjet = np.empty((n_r, n_t))
    stencils = np.array([-2, -1, 0, 1, 2]) * h
    jet_coeff = [np.array([1, -8, 0, 8, -1]) / 12.0,
                 np.array([-1, 16, -30, 16, -1]) / 12.0,
                 np.array([-1, 2, 0, -2, 1]) / 2.0,
                 np.array([1, -4, 6, -4, 1])]
    for i, r in enumerate(rs):
        cur = comb.slice(float(r))
        v = cur.velocity(ts)
        speeds[i] = np.linalg.norm(v, axis=-1)
        margins[i] = inflection_margin_safe(cur, ts)
        tt = np.clip(ts[:, None] + stencils[None, :], 0.0, 1.0)
        z = cur.point(tt.ravel())[:, 2].reshape(n_t, 5)
        zmax[i] = np.abs(z[:, 2])
        jets = [np.abs(z @ ck) / h ** (k + 1) for k, ck in enumerate(jet_coeff)]
        zjet[i] = np.max(jets, axis=0)

    i_min = np.unravel_index(np.argmin(speeds), speeds.shape)
    min_speed = float(speeds[i_min])
    candidates = np.abs(margins) < cluster_tol
    labels, n_lab = ndimage.label(candidates)
    boxes = []
    all_ok = True
    for lab in range(1, n_lab + 1):
        mask = labels == lab
        ri, ti = np.nonzero(mask)
        cert = True
        for row_t in np.unique(ti):
            cols = np.nonzero(mask[:, row_t])[0]
            # horizontal run length >= 2 cells per candidate row
            if len(cols) < 2:
                cert = False
                break
            if np.max(zmax[cols, row_t]) > band_tol or \
               np.max(zjet[cols, row_t]) > band_tol:
                cert = False
                break
        boxes.append(TamenessBox(
            (float(rs[ri.min()]), float(rs[ri.max()])),
            (float(ts[ti.min()]), float(ts[ti.max()])),
            cert, float(np.max(zmax[mask])), float(np.max(zjet[mask])),
            int(mask.sum())))
        all_ok &= cert
    passed = min_speed > C.TAU_REG and all_ok
    return TamenessReport(passed, min_speed,
                          (float(rs[i_min[0]]), float(ts[i_min[1]])),
                          boxes, (n_r, n_t), cluster_tol, band_tol)


def inflection_margin_safe(curve, ts):
    """Inflection margin with stalled samples reported as zero margin."""
    ts = np.asarray(ts, dtype=float)
    g = curve.point(ts)
    v = curve.velocity(ts)
    a = curve.acceleration(ts)
    sp2 = np.sum(v * v, axis=-1)
    m = np.sum(g * np.cross(v, a), axis=-1) / np.maximum(sp2, C.TAU_REG ** 2)
    return np.where(sp2 <= C.TAU_REG ** 2, 0.0, m)
