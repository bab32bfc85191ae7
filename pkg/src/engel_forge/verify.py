"""Independent numerical verification of the Engel condition.

A formal shell is presented by evaluators for the Legendrian direction
X(p,t) (tangent to the level 3-disks), the line field W, and an oriented
3-plane field E.  The pointwise criterion is: the flag is Engel at (p,t)
when X has nonzero velocity there and either the curve X_p has no
inflection at time t, or the level plane field <X_t, Xdot_t> is contact
near p.  Both branches are decided numerically: inflection margins come
from det(X, X', X'')/|X'|^2 and contact margins from the helicity density
of the unit normal of <X, Xdot>.  Where the 3-plane data of the shell is
pinned (always on the boundary collar, everywhere for rigid angular
models), the frame {W, X, [W,X]} must also be positively oriented in E.

Everything here deliberately avoids the angle-function shortcut: Lie
brackets are finite-difference, so angular shells are checked by a route
independent of their defining data.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .errors import InvalidConeError, InvalidFormError, InvalidInputError
from .shells import ContactFrame, fibonacci_sphere
from .sphere import is_convex

OUTCOME_CONVEX = 0
OUTCOME_CONTACT = 1
OUTCOME_NON_IMMERSED = 2
OUTCOME_FAIL = 3
OUTCOME_NAMES = ("ConvexPoint", "ContactPoint", "NonImmersed", "Fail")


def _unit(v, axis=-1):
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


class FormalEngelShell:
    """Evaluator bundle (W, X, E) on D3 x [0,1].

    ``x`` maps (p (N,3), t (N,)) to unit level-tangent vectors (N,3);
    ``x_dt``/``x_dtt`` are optional analytic time derivatives (finite
    differences otherwise).  ``e_basis`` returns three spanning 4-vectors
    of E (orientation = their order); default is <d_t> + the contact
    frame planes.  ``e_pinned`` says where the stored E and its
    orientation constrain the verdict: "global" for rigid angular models,
    "collar" for shells whose interior flag is free, "none" to skip.
    """

    def __init__(self, x, x_dt=None, x_dtt=None, *, w=None, e_basis=None,
                 frame=None, e_pinned="collar", w_is_dt=True,
                 symmetry=None, name="shell", collar_width=C.COLLAR_WIDTH):
        self._x = x
        self._x_dt = x_dt
        self._x_dtt = x_dtt
        self.frame = frame
        self._w = w
        self._e_basis = e_basis
        self.e_pinned = e_pinned
        self.w_is_dt = bool(w_is_dt)
        self.symmetry = symmetry
        self.name = name
        self.collar_width = float(collar_width)

    def x(self, p, t):
        return np.asarray(self._x(np.asarray(p, dtype=float),
                                  np.asarray(t, dtype=float)), dtype=float)

    def x_dt(self, p, t, h=C.H_FD):
        if self._x_dt is not None:
            return np.asarray(self._x_dt(p, np.asarray(t, dtype=float)), dtype=float)
        t = np.asarray(t, dtype=float)
        return (self.x(p, t + h) - self.x(p, t - h)) / (2 * h)

    def x_dtt(self, p, t, h=C.H_FD):
        if self._x_dtt is not None:
            return np.asarray(self._x_dtt(p, np.asarray(t, dtype=float)), dtype=float)
        if self._x_dt is not None:
            t = np.asarray(t, dtype=float)
            return (self.x_dt(p, t + h) - self.x_dt(p, t - h)) / (2 * h)
        t = np.asarray(t, dtype=float)
        return (-self.x(p, t + 2 * h) + 16 * self.x(p, t + h) - 30 * self.x(p, t)
                + 16 * self.x(p, t - h) - self.x(p, t - 2 * h)) / (12 * h * h)

    def w4(self, p, t):
        if self._w is None:
            out = np.zeros(np.asarray(p).shape[:-1] + (4,))
            out[..., 3] = 1.0
            return out
        return np.asarray(self._w(p, t), dtype=float)

    def e_basis4(self, p, t):
        if self._e_basis is not None:
            return np.asarray(self._e_basis(p, t), dtype=float)
        fr = self.frame or ContactFrame.darboux()
        p = np.asarray(p, dtype=float)
        n = p.shape[:-1]
        b = np.zeros(n + (3, 4))
        b[..., 0, 3] = 1.0
        b[..., 1, :3] = fr.Y(p)
        b[..., 2, :3] = fr.Z(p)
        return b

    def on_collar(self, p, t):
        p = np.asarray(p, dtype=float)
        t = np.asarray(t, dtype=float)
        w = self.collar_width
        r = np.linalg.norm(p, axis=-1)
        return (r >= 1.0 - w) | (t <= w) | (t >= 1.0 - w)


def lie_bracket_fd(v1, v2, q, h=1e-4):
    """[v1, v2] at 4-points q by central-difference Jacobians (O(h^2)).

    Fields map (N,4) -> (N,4); q is (N,4) with coordinates (x,y,z,t).
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    J1 = np.empty(q.shape + (4,))
    J2 = np.empty(q.shape + (4,))
    for k in range(4):
        dq = np.zeros(4)
        dq[k] = h
        J1[..., k] = (v1(q + dq) - v1(q - dq)) / (2 * h)
        J2[..., k] = (v2(q + dq) - v2(q - dq)) / (2 * h)
    a, b = v1(q), v2(q)
    return (np.einsum("...ij,...j->...i", J2, a)
            - np.einsum("...ij,...j->...i", J1, b))


def contact_margin(alpha, p, h=1e-5, orientation=1.0):
    """Helicity density (alpha wedge d alpha)(d_x, d_y, d_z) at p.

    ``alpha`` maps (N,3) points to covectors; the value is alpha . curl
    alpha, scaled by the orientation flag.  Zero form -> InvalidFormError.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    a = np.asarray(alpha(p), dtype=float)
    if np.any(np.linalg.norm(a, axis=-1) < 1e-12):
        raise InvalidFormError("defining 1-form vanishes at an evaluation point")
    J = np.empty(p.shape + (3,))
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        J[..., k] = (alpha(p + dp) - alpha(p - dp)) / (2 * h)
    curl = np.stack([J[..., 2, 1] - J[..., 1, 2],
                     J[..., 0, 2] - J[..., 2, 0],
                     J[..., 1, 0] - J[..., 0, 1]], axis=-1)
    return orientation * np.sum(a * curl, axis=-1)


def plane_field_contact_margin(shell, p, t, h=1e-5):
    """Contact margin of the level plane field <X_t, Xdot_t> near p.

    Uses the unit normal N = X x Xdot as defining form, so the value is
    scale-free; the sign is orientation bookkeeping and only |margin|
    enters the Engel criterion.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])

    def nhat(pp):
        x = shell.x(pp, t)
        xd = shell.x_dt(pp, t)
        nv = np.cross(x, xd)
        nn = np.linalg.norm(nv, axis=-1, keepdims=True)
        return nv / np.maximum(nn, 1e-300)

    a = nhat(p)
    J = np.empty(p.shape + (3,))
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        J[..., k] = (nhat(p + dp) - nhat(p - dp)) / (2 * h)
    curl = np.stack([J[..., 2, 1] - J[..., 1, 2],
                     J[..., 0, 2] - J[..., 2, 0],
                     J[..., 1, 0] - J[..., 0, 1]], axis=-1)
    return np.sum(a * curl, axis=-1)


def _orthonormalize_rows(B):
    """Gram-Schmidt the (..., 3, 4) basis rows, keeping orientation."""
    q1 = _unit(B[..., 0, :])
    v2 = B[..., 1, :] - np.sum(B[..., 1, :] * q1, axis=-1, keepdims=True) * q1
    q2 = _unit(v2)
    v3 = (B[..., 2, :]
          - np.sum(B[..., 2, :] * q1, axis=-1, keepdims=True) * q1
          - np.sum(B[..., 2, :] * q2, axis=-1, keepdims=True) * q2)
    q3 = _unit(v3)
    return np.stack([q1, q2, q3], axis=-2)


def _coords_in(Q, v4):
    return np.einsum("...kj,...j->...k", Q, v4)


def engel_energy(shell, p, t, h=1e-4):
    """<L_W X, Y> with Y the oriented completion of {W, X} in E.

    The Lie derivative is a finite-difference bracket of the actual 4-D
    fields, so this is an oracle independent of any angle function.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
    q4 = np.concatenate([p, t[..., None]], axis=-1)

    def wfield(qq):
        return shell.w4(qq[..., :3], qq[..., 3])

    def xfield(qq):
        x = shell.x(qq[..., :3], qq[..., 3])
        return np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)

    L = lie_bracket_fd(wfield, xfield, q4, h=h)
    W = shell.w4(p, t)
    X4 = xfield(q4)
    Q = _orthonormalize_rows(shell.e_basis4(p, t))
    w3 = _coords_in(Q, _unit(W))
    xo = X4 - np.sum(X4 * W, axis=-1, keepdims=True) * W
    x3 = _coords_in(Q, _unit(xo))
    y3 = np.cross(w3, x3)
    ny = np.linalg.norm(y3, axis=-1, keepdims=True)
    y3 = y3 / np.maximum(ny, 1e-300)
    Y4 = np.einsum("...k,...kj->...j", y3, Q)
    return np.sum(L * Y4, axis=-1)


def energy_angle_ratio(angular_shell, n_p=64, n_t=17, mask=0.05, rng_seed=7):
    """Sampled C_phi = (dc/dt) / H over a shell, masking indeterminate points.

    Asserts strict positivity where defined (Engel energy and the angle
    derivative have the same sign with a positive ratio).
    """
    rng = np.random.default_rng(rng_seed)
    p = rng.uniform(-0.6, 0.6, size=(n_p, 3))
    t = np.tile(np.linspace(0.05, 0.95, n_t), (n_p, 1)).ravel()
    p = np.repeat(p, n_t, axis=0)
    sh = angular_to_formal(angular_shell)
    H = engel_energy(sh, p, t)
    dc = angular_shell.c.dt(p, t)
    ok = (np.abs(dc) > mask) & (np.abs(H) > mask / 10.0)
    ratio = np.where(ok, dc / np.where(H == 0, 1.0, H), np.nan)
    return ratio, ok


@dataclass
class EnergyField:
    points: np.ndarray
    times: np.ndarray
    values: np.ndarray

    @property
    def min(self):
        return float(np.min(self.values))

    @property
    def argmin(self):
        i = int(np.argmin(self.values))
        return self.points[i], float(self.times[i])


def energy_field(shell, points, times, h=1e-4):
    vals = engel_energy(shell, points, times, h=h)
    return EnergyField(np.asarray(points), np.asarray(times), vals)


@dataclass
class VerificationReport:
    passed: bool
    min_margin: float
    counts: dict
    witnesses: list
    grid: dict
    tolerances: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "pass": bool(self.passed),
            "min_margin": float(self.min_margin),
            "counts": {k: int(v) for k, v in self.counts.items()},
            "witnesses": self.witnesses,
            "grid": self.grid,
            "tolerances": self.tolerances,
            "meta": self.meta,
        }


def _criterion_rows(shell, p, t, tol1, tol2):
    """Vectorized criterion over matched (N,3)+(N,) samples."""
    x = shell.x(p, t)
    xd = shell.x_dt(p, t)
    speed2 = np.sum(xd * xd, axis=-1)
    outcome = np.full(len(p), OUTCOME_FAIL, dtype=np.int8)
    margin = np.zeros(len(p))
    non_imm = speed2 <= C.TAU_REG ** 2
    outcome[non_imm] = OUTCOME_NON_IMMERSED
    live = ~non_imm
    if np.any(live):
        xdd = shell.x_dtt(p[live], t[live])
        m1 = np.abs(np.sum(x[live] * np.cross(xd[live], xdd), axis=-1)) / speed2[live]
        conv = m1 > tol1
        idx_live = np.nonzero(live)[0]
        outcome[idx_live[conv]] = OUTCOME_CONVEX
        margin[idx_live[conv]] = m1[conv]
        rest = idx_live[~conv]
        if len(rest):
            margin_fn = getattr(shell, "contact_margin_fn", None) \
                or (lambda pp, tt: plane_field_contact_margin(shell, pp, tt))
            m2 = np.abs(margin_fn(p[rest], t[rest]))
            good = m2 > tol2
            outcome[rest[good]] = OUTCOME_CONTACT
            margin[rest[good]] = m2[good]
            margin[rest[~good]] = np.maximum(m1[~conv][~good], m2[~good])
    if shell.e_pinned != "none":
        check = np.ones(len(p), dtype=bool) if shell.e_pinned == "global" \
            else shell.on_collar(p, t)
        check &= outcome != OUTCOME_NON_IMMERSED
        if np.any(check):
            Q = _orthonormalize_rows(shell.e_basis4(p[check], t[check]))
            W = shell.w4(p[check], t[check])
            X4 = np.concatenate([x[check], np.zeros((check.sum(), 1))], axis=-1)
            XD4 = np.concatenate([xd[check], np.zeros((check.sum(), 1))], axis=-1)
            tri = np.stack([_coords_in(Q, W), _coords_in(Q, X4),
                            _coords_in(Q, XD4)], axis=-2)
            det = np.linalg.det(tri)
            bad = det <= 0
            idx = np.nonzero(check)[0][bad]
            outcome[idx] = OUTCOME_FAIL
            margin[idx] = det[bad]
    return outcome, margin


def verify_solid(shell, *, grid=None, tol1=C.TOL_CONVEX, tol2=C.TOL_CONTACT,
                 n_dirs=3, max_witnesses=16, threads=1):
    """Evaluate the Engel criterion over a grid; pass iff nothing fails.

    ``grid``: (n_r, n_t) for radially symmetric shells (each radius is
    checked along ``n_dirs`` fixed directions), or (nx, ny, nz, nt) for a
    product grid masked to the ball.  Reports are deterministic: fixed
    grid order, fixed reduction order.
    """
    t_start = time.perf_counter()
    if grid is None:
        grid = C.GRID_RADIAL if shell.symmetry == "radial" else (9, 9, 9, 17)
    if len(grid) == 2:
        # radial symmetry: iterate radius-rows so each row reuses one slice
        n_r, n_t = grid
        rs = np.linspace(0.0, 1.0, n_r)
        ts = np.linspace(0.0, 1.0, n_t)
        dirs = fibonacci_sphere(max(n_dirs, 3))[:n_dirs]
        grid_desc = {"kind": "radial", "n_r": n_r, "n_t": n_t, "n_dirs": n_dirs}

        def do_radius(rv):
            p_row = np.repeat(rv * dirs, n_t, axis=0)
            t_row = np.tile(ts, n_dirs)
            return p_row, t_row, _criterion_rows(shell, p_row, t_row, tol1, tol2)

        return _assemble_report(shell, do_radius, rs, grid_desc, tol1, tol2,
                                max_witnesses, threads, t_start)
    else:
        nx, ny, nz, n_t = grid
        axes = [np.linspace(-1.0, 1.0, k) for k in (nx, ny, nz)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
        pts = pts[np.linalg.norm(pts, axis=-1) <= 1.0 + 1e-12]
        ts = np.linspace(0.0, 1.0, n_t)
        grid_desc = {"kind": "product", "shape": list(grid),
                     "ball_points": int(len(pts))}

    def do_time(tv):
        t_row = np.full(len(pts), tv)
        return pts, t_row, _criterion_rows(shell, pts, t_row, tol1, tol2)

    return _assemble_report(shell, do_time, ts, grid_desc, tol1, tol2,
                            max_witnesses, threads, t_start)


def _assemble_report(shell, do_row, keys, grid_desc, tol1, tol2,
                     max_witnesses, threads, t_start):
    counts = {name: 0 for name in OUTCOME_NAMES}
    min_margin = np.inf
    witnesses = []
    if threads <= 1:
        rows = ((float(k), do_row(float(k))) for k in keys)
    else:
        rows = _threaded_rows(do_row, keys, threads)
    for _, (p_row, t_row, (outcome, margin)) in rows:
        for k, name in enumerate(OUTCOME_NAMES):
            counts[name] += int(np.sum(outcome == k))
        ok = (outcome == OUTCOME_CONVEX) | (outcome == OUTCOME_CONTACT)
        if np.any(ok):
            min_margin = min(min_margin, float(np.min(margin[ok])))
        for i in np.nonzero(~ok)[0]:
            if len(witnesses) < max_witnesses:
                witnesses.append({
                    "p": [float(v) for v in p_row[i]],
                    "t": float(t_row[i]),
                    "outcome": OUTCOME_NAMES[outcome[i]],
                    "margin": float(margin[i]),
                })
    passed = counts["Fail"] == 0 and counts["NonImmersed"] == 0
    return VerificationReport(
        passed, float(min_margin), counts, witnesses, grid_desc,
        {"tol1": tol1, "tol2": tol2, "tau_reg": C.TAU_REG},
        meta={"shell": shell.name, "threads": int(threads),
              "elapsed_s": round(time.perf_counter() - t_start, 3)})


def _threaded_rows(do_row, keys, threads):
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        results = list(ex.map(do_row, [float(k) for k in keys]))
    return [(float(k), res) for k, res in zip(keys, results)]


def angular_to_formal(angular_shell, symmetry=None):
    """Wrap an angular shell as evaluators for the generic verifier."""
    sh = angular_shell

    def x(p, t):
        return sh.x_field(p, t)

    def x_dt(p, t):
        return sh.x_field_dt(p, t)

    from .shells import RadialAngleFunction
    if symmetry is None and isinstance(sh.c, RadialAngleFunction):
        symmetry = "radial"
    return FormalEngelShell(x, x_dt, frame=sh.frame, e_pinned="global",
                            symmetry=symmetry, name=sh.name)


def contact_prolongation(frame=None):
    """D(p,t) = <d_t, cos(t) Y + sin(t) Z> over a contact frame."""
    fr = frame or ContactFrame.darboux()
    fr.validate()

    def x(p, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.cos(t) * fr.Y(p) + np.sin(t) * fr.Z(p)

    def x_dt(p, t):
        t = np.asarray(t, dtype=float)[..., None]
        return -np.sin(t) * fr.Y(p) + np.cos(t) * fr.Z(p)

    def x_dtt(p, t):
        t = np.asarray(t, dtype=float)[..., None]
        return -np.cos(t) * fr.Y(p) - np.sin(t) * fr.Z(p)

    return FormalEngelShell(x, x_dt, x_dtt, frame=fr, e_pinned="global",
                            name="contact-prolongation")


def lorentzian_prolongation(cone):
    """D(p,t) = <d_t, X_p(t)> with X_p parametrizing a convex cone curve.

    ``cone`` is a SphereCurve (constant cone field) or a callable
    p -> SphereCurve; each curve must be convex.  E is the span
    <d_t, X, Xdot>, which is tautologically positively oriented.
    """
    const_curve = cone if hasattr(cone, "point") else None
    if const_curve is not None:
        chk = is_convex(const_curve)
        if not chk.ok:
            raise InvalidConeError(f"cone curve is not convex (witness t={chk.witness})")

        def x(p, t):
            out = const_curve.point(np.asarray(t, dtype=float))
            return np.broadcast_to(out, np.asarray(p).shape[:-1] + (3,)).copy()

        def x_dt(p, t):
            out = const_curve.velocity(np.asarray(t, dtype=float))
            return np.broadcast_to(out, np.asarray(p).shape[:-1] + (3,)).copy()

        def x_dtt(p, t):
            out = const_curve.acceleration(np.asarray(t, dtype=float))
            return np.broadcast_to(out, np.asarray(p).shape[:-1] + (3,)).copy()
    else:
        raise InvalidInputError("per-point cone fields: supply a SphereCurve")

    def e_basis(p, t):
        n = np.asarray(p).shape[:-1]
        b = np.zeros(n + (3, 4))
        b[..., 0, 3] = 1.0
        b[..., 1, :3] = x(p, t)
        b[..., 2, :3] = x_dt(p, t)
        return b

    return FormalEngelShell(x, x_dt, x_dtt, e_basis=e_basis, e_pinned="global",
                            w_is_dt=False, name="lorentzian-prolongation")


def kernel_line_field(shell, p, t, h=1e-4):
    """Kernel direction of the bracket form on E, and its d_t component.

    For each sample, brackets [B_i, B_j] of an orthonormalized basis of E
    are reduced modulo E; the kernel of the resulting antisymmetric matrix
    is the line field W.  Returns (unit 4-vectors, |<W, d_t>|).
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
    q4 = np.concatenate([p, t[..., None]], axis=-1)
    Q = _orthonormalize_rows(shell.e_basis4(p, t))

    def bfield(k):
        def f(qq):
            Qk = _orthonormalize_rows(shell.e_basis4(qq[..., :3], qq[..., 3]))
            return Qk[..., k, :]
        return f

    nrm = _complement4(Q)
    M = np.zeros(p.shape[:-1] + (3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            br = lie_bracket_fd(bfield(i), bfield(j), q4, h=h)
            mij = np.sum(br * nrm, axis=-1)
            M[..., i, j] = mij
            M[..., j, i] = -mij
    axial = np.stack([M[..., 1, 2], -M[..., 0, 2], M[..., 0, 1]], axis=-1)
    W4 = np.einsum("...k,...kj->...j", axial, Q)
    W4 = _unit(W4)
    return W4, np.abs(W4[..., 3])


def _complement4(Q):
    """Unit 4-vector orthogonal to the three rows of Q (generalized cross)."""
    a, b, c = Q[..., 0, :], Q[..., 1, :], Q[..., 2, :]
    out = np.empty(a.shape)
    idx = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
    sign = [-1.0, 1.0, -1.0, 1.0]
    for k in range(4):
        i, j, l = idx[k]
        det = (a[..., i] * (b[..., j] * c[..., l] - b[..., l] * c[..., j])
               - a[..., j] * (b[..., i] * c[..., l] - b[..., l] * c[..., i])
               + a[..., l] * (b[..., i] * c[..., j] - b[..., j] * c[..., i]))
        out[..., k] = sign[k] * det
    return _unit(out)
