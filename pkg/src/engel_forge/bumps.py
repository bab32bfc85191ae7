"""C-infinity cutoffs with all-order-flat ends.

Everything is built from the classical exp(-1/x) step

    sigma(x) = phi(x) / (phi(x) + phi(1-x)),   phi(x) = exp(-1/x) for x > 0,

which rises 0 -> 1 on [0,1] and is flat to every order at both ends.  First
and second derivatives are closed-form; the antiderivative is tabulated once
on [0, 1/2] and extended by the symmetry sigma(1-x) = 1 - sigma(x), which
makes int_0^1 sigma = 1/2 exact.
"""

import numpy as np
from scipy.interpolate import CubicSpline


def _phi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def _phi_d1(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / x[pos]) / x[pos] ** 2
    return out


def _phi_d2(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        xp = x[pos]
        out[pos] = np.exp(-1.0 / xp) * (1.0 - 2.0 * xp) / xp ** 4
    return out


def smoothstep(x):
    """sigma(x): 0 for x <= 0, 1 for x >= 1, monotone C-infinity between."""
    x = np.asarray(x, dtype=float)
    a = _phi(x)
    b = _phi(1.0 - x)
    den = a + b
    out = np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, np.divide(
        a, den, out=np.zeros_like(den), where=den > 0)))
    return out


def smoothstep_d1(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    out = np.zeros_like(x)
    xi = x[inside]
    a, b = _phi(xi), _phi(1.0 - xi)
    da, db = _phi_d1(xi), -_phi_d1(1.0 - xi)
    den = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (da * b - a * db) / den ** 2
    out[inside] = np.where(den > 0, val, 0.0)
    return out


def smoothstep_d2(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    out = np.zeros_like(x)
    xi = x[inside]
    a, b = _phi(xi), _phi(1.0 - xi)
    da, db = _phi_d1(xi), -_phi_d1(1.0 - xi)
    d2a, d2b = _phi_d2(xi), _phi_d2(1.0 - xi)
    den = a + b
    num1 = (d2a * b - a * d2b) * den
    num2 = 2.0 * (da * b - a * db) * (da + db)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (num1 - num2) / den ** 3
    out[inside] = np.where(den > 0, val, 0.0)
    return out


_ANTIDERIV_SPLINE = None


def _antideriv_spline():
    global _ANTIDERIV_SPLINE
    if _ANTIDERIV_SPLINE is None:
        xs = np.linspace(0.0, 0.5, 4097)
        _ANTIDERIV_SPLINE = CubicSpline(xs, smoothstep(xs)).antiderivative()
    return _ANTIDERIV_SPLINE


def smoothstep_antideriv(x):
    """Sigma(x) = int_0^x sigma; Sigma(1) = 1/2 exactly by symmetry."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    spl = _antideriv_spline()
    lo = x <= 0.0
    hi = x >= 1.0
    left = (~lo) & (x <= 0.5)
    right = (~hi) & (x > 0.5)
    out[lo] = 0.0
    out[hi] = x[hi] - 0.5
    out[left] = spl(x[left])
    out[right] = x[right] - 0.5 + spl(1.0 - x[right])
    return out[0] if scalar else out


class FlatBump:
    """Cutoff assembled from scaled smoothsteps.

    value(t) = base + sum_i amp_i * sigma((t - lo_i)/(hi_i - lo_i)).

    The base profile stays inside [min, max] of its plateau values; the
    stored ``norm`` factor rescales it so callers can carry plateaus above 1
    while the underlying steps remain normalized.
    """

    def __init__(self, base, terms, support, plateau=1.0, norm=1.0):
        self.base = float(base)
        self.terms = [(float(a), float(lo), float(hi)) for a, lo, hi in terms]
        self.support = (float(support[0]), float(support[1]))
        self.plateau = float(plateau)
        self.norm = float(norm)

    @classmethod
    def step(cls, lo, hi, y0=0.0, y1=1.0):
        """Monotone step: y0 before lo, y1 after hi, flat ends."""
        return cls(y0, [(y1 - y0, lo, hi)], (lo, hi),
                   plateau=max(abs(y0), abs(y1)))

    @classmethod
    def plateau_bump(cls, a, b, c, d, height=1.0):
        """0 outside (a, d), equal to height on [b, c], flat transitions."""
        if not (a < b <= c < d):
            raise ValueError(f"plateau breakpoints must be ordered: {a}, {b}, {c}, {d}")
        return cls(0.0, [(height, a, b), (-height, c, d)], (a, d),
                   plateau=height)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.base, dtype=float)
        for amp, lo, hi in self.terms:
            out = out + amp * smoothstep((t - lo) / (hi - lo))
        return self.norm * out

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t, dtype=float)
        for amp, lo, hi in self.terms:
            w = hi - lo
            out = out + (amp / w) * smoothstep_d1((t - lo) / w)
        return self.norm * out

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t, dtype=float)
        for amp, lo, hi in self.terms:
            w = hi - lo
            out = out + (amp / w ** 2) * smoothstep_d2((t - lo) / w)
        return self.norm * out

    def antiderivative(self, t, t0=0.0):
        """int_{t0}^{t} value, exact modulo the tabulated Sigma."""
        t = np.asarray(t, dtype=float)
        out = self.base * (t - t0)
        for amp, lo, hi in self.terms:
            w = hi - lo
            out = out + amp * w * (smoothstep_antideriv((t - lo) / w)
                                   - smoothstep_antideriv((t0 - lo) / w))
        return self.norm * out

    def jet(self, t, order, h=1e-3):
        """Central finite-difference jet of the given order (1..4)."""
        t = float(t)
        if order == 1:
            stencil, coeff = [-2, -1, 1, 2], np.array([1, -8, 8, -1]) / 12.0
        elif order == 2:
            stencil, coeff = [-2, -1, 0, 1, 2], np.array([-1, 16, -30, 16, -1]) / 12.0
        elif order == 3:
            stencil, coeff = [-2, -1, 1, 2], np.array([-1, 2, -2, 1]) / 2.0
        elif order == 4:
            stencil, coeff = [-2, -1, 0, 1, 2], np.array([1, -4, 6, -4, 1])
        else:
            raise ValueError(f"jet order must be 1..4, got {order}")
        vals = self(np.array([t + k * h for k in stencil]))
        return float(np.dot(coeff, vals)) / h ** order
