"""Stability regions of the randomized scheme on the linear test equation.

For ``z = a + bi`` one step multiplies the solution by ``p(z) = tau z^2 + z + 1``
with ``tau ~ U[0, 1]``. Membership tests:

* MS  (mean square):      ``E|p(z)|^2 < 1``            -> ``phi_ms(z) < 0``
* AS  (almost sure):      ``E ln|p(z)| < 0``           -> ``F(a, b) < 0``
* SP  (in probability):   identical to AS
* Mid (deterministic midpoint, tau = 1/2) -> ``phi_mid(z) < 0``

``F(a, b) = 1/2 * E ln f_ab(tau)`` with ``f_ab(t) = |t z^2 + z + 1|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate

from ._fmt import fmt
from .core import RngStream

__all__ = [
    "RegionKind",
    "QuadratureError",
    "InvariantViolation",
    "p_eval",
    "ms_moment",
    "phi_ms",
    "phi_mid",
    "f_ab",
    "discriminant",
    "singular_case",
    "F_value",
    "F_quadrature",
    "ln_moment2",
    "in_region",
    "interval_endpoints",
    "RegionGrid",
    "region_grid",
    "AreaEstimate",
    "region_area",
    "Verdict",
    "mc_verify",
    "R0",
    "SQRT_2E",
    "X0_MS",
]

# below this distance to the b = 0 axis or the unit circle around -1 the
# closed form trades accuracy for cancellation, so quadrature takes over
EPS_LOCUS = 1e-6
# squared radius of the disc around the origin handled by quadrature
EPS_ORIGIN = 1e-6
QUAD_TOL = 1e-10
CIRCLE_TOL = 1e-12

R0 = 1.0 + math.sqrt(5.0)
SQRT_2E = math.sqrt(2.0 * math.e)
_C = (math.sqrt(2.0) - 1.0) ** (1.0 / 3.0)
X0_MS = -1.0 - 1.0 / _C + _C


class RegionKind(str, Enum):
    MS = "MS"
    AS = "AS"
    SP = "SP"
    Mid = "Mid"

    @classmethod
    def parse(cls, value) -> "RegionKind":
        if isinstance(value, cls):
            return value
        for k in cls:
            if k.value.lower() == str(value).lower():
                return k
        raise ValueError(f"unknown region kind {value!r}")


class QuadratureError(ArithmeticError):
    def __init__(self, estimate: float, abserr: float):
        super().__init__(f"quadrature did not reach {QUAD_TOL}: estimate {estimate}, error {abserr}")
        self.estimate = estimate
        self.abserr = abserr


class InvariantViolation(RuntimeError):
    pass


def _ab(z):
    z = np.asarray(z)
    return np.real(z).astype(float), np.imag(z).astype(float)


def p_eval(z, tau):
    """Amplification factor ``tau z^2 + z + 1``."""
    z = np.asarray(z, dtype=complex)
    return tau * z * z + z + 1.0


def phi_ms(z):
    x, y = _ab(z)
    r2 = x * x + y * y
    return 2.0 * x * (1.0 + 0.5 * r2) + 2.0 * x * x + r2 * r2 / 3.0


def phi_mid(z):
    x, y = _ab(z)
    r2 = x * x + y * y
    return 2.0 * x * (1.0 + 0.5 * r2) + 2.0 * x * x + 0.25 * r2 * r2


def ms_moment(z):
    """``E|p(z)|^2`` for ``tau ~ U[0, 1]``."""
    return 1.0 + phi_ms(z)


def f_ab(a, b, t):
    """``|t (a+bi)^2 + a + bi + 1|^2``, evaluated as real part squared plus imaginary part squared."""
    a, b, t = np.asarray(a, float), np.asarray(b, float), np.asarray(t, float)
    re = t * (a * a - b * b) + a + 1.0
    im = (2.0 * a * t + 1.0) * b
    return re * re + im * im


def _coeffs(a, b):
    r2 = a * a + b * b
    A = r2 * r2
    B = 2.0 * (a * a + a**3 + a * b * b - b * b)
    C = (a + 1.0) ** 2 + b * b
    return A, B, C


def discriminant(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return -4.0 * b * b * (2.0 * a + a * a + b * b) ** 2


def _on_circle(a, b):
    return abs(b * b + a * a + 2.0 * a) <= CIRCLE_TOL * max(1.0, a * a + b * b)


def singular_case(a: float, b: float) -> str:
    """Where ``f_ab`` vanishes: ``case1``/``case2`` for a root in ``[0, 1]``,
    ``off_unit_special`` for a real root outside it, ``regular`` otherwise."""
    a, b = float(a), float(b)
    if b == 0.0:
        if a <= -1.0:
            return "case1"
        return "regular" if a == 0.0 else "off_unit_special"
    if _on_circle(a, b):
        if -2.0 < a <= -0.5:
            return "case2"
        if -0.5 < a < 0.0:
            return "off_unit_special"
    return "regular"


# F ------------------------------------------------------------------------

def _log_pieces(a, b):
    """``f_ab(t) = A (t - P)^2 + Q`` with ``Q`` in factored (cancellation-free) form."""
    A, B, C = _coeffs(a, b)
    P = -B / (2.0 * A)
    r2 = a * a + b * b
    Q = b * b * (2.0 * a + r2) ** 2 / (r2 * r2)
    return A, P, Q


_TINY_R2 = 1e-60


def _direct_quad(a: float, b: float, power: int) -> float:
    def g(t):
        return math.log(float(f_ab(a, b, t))) ** power

    val, err, *_ = integrate.quad(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=400,
                                  full_output=1)
    if not err <= QUAD_TOL:
        raise QuadratureError(val, err)
    return val


def _moment_quad(a: float, b: float, power: int) -> float:
    """``integral_0^1 (ln f_ab(t))^power dt``.

    Each side of the vertex ``P`` is mapped by ``|t - P| = s^2``; the
    integrand becomes ``(ln(A s^4 + Q))^power * 2 s``, which stays bounded
    even when ``Q = 0`` puts a root of ``f_ab`` in the interval.
    """
    r2 = a * a + b * b
    if r2 < _TINY_R2:
        return _direct_quad(a, b, power)
    A, P, Q = _log_pieces(a, b)
    if not -1.0 < P < 2.0:
        # vertex far from [0, 1]: no root nearby, and the substitution
        # would lose the interval to rounding when |P| is huge
        return _direct_quad(a, b, power)
    if P <= 0.0:
        pieces = [(-P, 1.0 - P)]
    elif P >= 1.0:
        pieces = [(P - 1.0, P)]
    else:
        pieces = [(0.0, P), (0.0, 1.0 - P)]
    log_a = math.log(A)

    def g(s):
        if s == 0.0:
            return 0.0
        if Q > 0.0:
            v = math.log(A * s**4 + Q)
        else:
            v = log_a + 4.0 * math.log(s)
        return v**power * 2.0 * s

    total = 0.0
    for d0, d1 in pieces:
        lo, hi = math.sqrt(d0), math.sqrt(d1)
        if hi <= lo:
            continue
        val, err, *_ = integrate.quad(g, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=400,
                                      full_output=1)
        if not err <= QUAD_TOL:
            raise QuadratureError(total + val, err)
        total += val
    return total


def F_quadrature(a: float, b: float) -> float:
    """``1/2 * integral_0^1 ln f_ab(t) dt`` by adaptive quadrature."""
    a, b = float(a), abs(float(b))
    if a == 0.0 and b == 0.0:
        return 0.0
    return 0.5 * _moment_quad(a, b, 1)


def _fab1(a):
    # F on the real axis, a not in {-1, 0}
    a2 = a * a
    return ((a2 + a + 1.0) / a2 * np.log1p(a + a2)
            - (a + 1.0) / a2 * np.log(np.abs(a + 1.0)) - 1.0)


def _fab2(a):
    # F on the circle |z + 1| = 1, a not in {-2, -1/2, 0}
    return (2.0 * a + 1.0) / (2.0 * a) * np.log(np.abs(2.0 * a + 1.0)) - 1.0


def _fab3(a, b):
    A, B, C = _coeffs(a, b)
    P = -B / (2.0 * A)
    f1 = (a * a - b * b + a + 1.0) ** 2 + ((2.0 * a + 1.0) * b) ** 2
    s = b * np.abs(2.0 * a + a * a + b * b) / A  # sqrt(Q / A)
    return (0.5 * (1.0 - P) * np.log(f1) + 0.5 * P * np.log(C) - 1.0
            + s * (np.arctan((1.0 - P) / s) - np.arctan(-P / s)))


def F_value(a, b):
    """``F(a, b) = 1/2 * E ln|tau (a+bi)^2 + a+bi + 1|^2``; scalars or arrays.

    Closed forms on the real axis, on the circle ``|z + 1| = 1`` and
    elsewhere; points within ``EPS_LOCUS`` of those loci (or close to the
    origin) fall back to :func:`F_quadrature`.
    """
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a, b = np.broadcast_arrays(np.asarray(a, float), np.abs(np.asarray(b, float)))
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    out = np.full(a.shape, np.nan)
    r2 = a * a + b * b
    circ = b * b + a * a + 2.0 * a
    on_circle = (np.abs(circ) <= CIRCLE_TOL * np.maximum(1.0, r2)) & (b > 0)
    # F = a + O(|z|^3) near the origin; below this the error is invisible
    zero = r2 < _TINY_R2
    x1 = (a == -1.0) & (b == 0.0)
    x2 = on_circle & (a == -0.5)
    near_origin = (r2 < EPS_ORIGIN) & ~zero
    axis = (b == 0.0) & ~zero & ~x1 & ~near_origin
    circle = on_circle & ~zero & ~x2 & ~near_origin
    done = zero | x1 | x2 | near_origin | axis | circle
    near = ~done & ((b < EPS_LOCUS) | (np.abs(circ) < EPS_LOCUS))
    rest = ~done & ~near

    out[zero] = a[zero]
    out[x1 | x2] = -1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[axis] = _fab1(a[axis])
        out[circle] = _fab2(a[circle])
        out[rest] = _fab3(a[rest], b[rest])
    for i in np.flatnonzero(near | near_origin):
        out[i] = F_quadrature(a[i], b[i])
    return float(out[0]) if scalar else out.reshape(shape)


def _G(x):
    return 0.0 if x == 0.0 else x * math.log(x) ** 2 - 2.0 * x * math.log(x) + 2.0 * x


def ln_moment2(a: float, b: float) -> float:
    """``E (ln f_ab(tau))^2``; closed forms when ``f_ab`` has a root in ``[0, 1]``."""
    a, b = float(a), abs(float(b))
    if a == 0.0 and b == 0.0:
        return 0.0
    case = singular_case(a, b)
    if case == "case1":
        return 4.0 / (a * a) * (_G(-a - 1.0) + _G(a * a + a + 1.0))
    if case == "case2":
        # f_ab(t) = 4a^2 (t - P)^2 here; u = 2|a|(t - P) gives 4/(2|a|) * [G(..) + G(..)]
        return -2.0 / a * (_G(1.0) + _G(-2.0 * a - 1.0))
    return _moment_quad(a, b, 2)


# regions ------------------------------------------------------------------

def indicator(kind, a, b):
    """Indicator functional whose negative set is the region."""
    kind = RegionKind.parse(kind)
    if kind is RegionKind.MS:
        return phi_ms(np.asarray(a) + 1j * np.asarray(b))
    if kind is RegionKind.Mid:
        return phi_mid(np.asarray(a) + 1j * np.asarray(b))
    return F_value(a, b)


def in_region(z, kind) -> bool:
    z = complex(z)
    return bool(indicator(kind, z.real, z.imag) < 0.0)


def _bisect(g, lo, hi):
    """Root of ``g`` with ``g(lo) > 0 > g(hi)``, refined until no float lies between."""
    glo, ghi = g(lo), g(hi)
    if not (glo > 0.0 and ghi < 0.0):
        raise InvariantViolation(f"no sign change on [{lo}, {hi}]: {glo}, {ghi}")
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        gm = g(mid)
        if gm > 0.0:
            lo, glo = mid, gm
        elif gm < 0.0:
            hi, ghi = mid, gm
        else:
            return mid
    return lo if abs(glo) <= abs(ghi) else hi


def interval_endpoints(kind) -> tuple:
    """``(left, right)`` of the region's intersection with the real axis."""
    kind = RegionKind.parse(kind)
    if kind is RegionKind.MS:
        return X0_MS, 0.0
    if kind is RegionKind.Mid:
        return -2.0, 0.0
    x = _bisect(lambda s: F_value(s, 0.0), -SQRT_2E, -2.0)
    if not -SQRT_2E <= x <= -2.0:
        raise InvariantViolation(f"AS endpoint {x} outside [-sqrt(2e), -2]")
    return x, 0.0


def _centers(lo, hi, n):
    return lo + (np.arange(n) + 0.5) * ((hi - lo) / n)


def _y_centers(ymin, ymax, ny):
    y = _centers(ymin, ymax, ny)
    symmetric = ymin == -ymax
    if symmetric:
        k = ny // 2
        y[:k] = -y[ny - 1:ny - 1 - k:-1]
        if ny % 2:
            y[k] = 0.0
    return y, symmetric


def _eval_rows(kind, x, y, chunk=1 << 18):
    out = np.empty((y.size, x.size))
    rows = max(1, chunk // max(1, x.size))
    for i in range(0, y.size, rows):
        yy = y[i:i + rows]
        out[i:i + rows] = indicator(kind, x[None, :], yy[:, None])
    return out


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """Indicator values at pixel centers; ``values[iy, ix]`` with ``y`` ascending."""

    kind: RegionKind
    box: tuple
    nx: int
    ny: int
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    @property
    def membership(self) -> np.ndarray:
        return self.values < 0.0

    @property
    def singular(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    @property
    def n_singular(self) -> int:
        return int(self.singular.sum())

    def to_csv(self) -> str:
        lines = ["x,y,value,member"]
        member = self.membership | self.singular
        for iy, yv in enumerate(self.y):
            ys = fmt(yv)
            for ix, xv in enumerate(self.x):
                lines.append(f"{fmt(xv)},{ys},{fmt(self.values[iy, ix])},{int(member[iy, ix])}")
        return "\n".join(lines) + "\n"


def region_grid(kind, box, nx: int, ny: int) -> RegionGrid:
    """Raster of the region indicator over ``box = (xmin, xmax, ymin, ymax)``."""
    kind = RegionKind.parse(kind)
    xmin, xmax, ymin, ymax = (float(v) for v in box)
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be at least 2")
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"empty box {box}")
    x = _centers(xmin, xmax, nx)
    y, symmetric = _y_centers(ymin, ymax, ny)
    if symmetric:
        k = ny // 2
        upper = _eval_rows(kind, x, y[k:])
        values = np.empty((ny, nx))
        values[k:] = upper
        values[:k] = upper[::-1][: k] if ny % 2 == 0 else upper[:0:-1][:k]
    else:
        values = _eval_rows(kind, x, y)
    return RegionGrid(kind, (xmin, xmax, ymin, ymax), nx, ny, x, y, values)


@dataclass(frozen=True)
class AreaEstimate:
    kind: RegionKind
    area: float
    uncertainty: float
    resolution: int

    def to_csv(self) -> str:
        return f"{self.kind.value.lower()},{fmt(self.area)},{fmt(self.uncertainty)},{self.resolution}\n"


def region_area(kind, resolution: int = 1000) -> AreaEstimate:
    """Pixel-counting area over ``[-R0, 0] x [-R0, R0]``, ``R0 = 1 + sqrt 5``.

    The uncertainty is half the area of the member pixels touching a
    non-member 4-neighbour (or the box edge).
    """
    kind = RegionKind.parse(kind)
    if resolution < 100:
        raise ValueError("resolution must be at least 100 pixels per unit")
    m = math.ceil(R0 * resolution)
    ext = m / resolution
    grid = region_grid(kind, (-ext, 0.0, -ext, ext), m, 2 * m)
    member = grid.membership | grid.singular
    px = 1.0 / resolution**2
    padded = np.pad(member, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    boundary = member & ~interior
    return AreaEstimate(kind, float(member.sum()) * px, 0.5 * float(boundary.sum()) * px,
                        int(resolution))


# Monte-Carlo verification -------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    kind: RegionKind
    z: complex
    drift: float
    ci_low: float
    ci_high: float
    closed_form_member: bool
    mc_member: Optional[bool]
    verdict: str
    decaying_fraction: float
    overflowed_paths: int

    def to_csv(self) -> str:
        mc = "" if self.mc_member is None else str(int(self.mc_member))
        head = "kind,a,b,drift,ci_low,ci_high,closed_form_member,mc_member,verdict,decaying_fraction,overflowed_paths"
        row = ",".join([self.kind.value.lower(), fmt(self.z.real), fmt(self.z.imag), fmt(self.drift),
                        fmt(self.ci_low), fmt(self.ci_high), str(int(self.closed_form_member)), mc,
                        self.verdict, fmt(self.decaying_fraction), str(self.overflowed_paths)])
        return head + "\n" + row + "\n"


_LOG_MAX = math.log(np.finfo(float).max)


def mc_verify(z, kind, k_max: int = 2000, reps: int = 200, seed: int = 0,
              z_crit: float = 3.89) -> Verdict:
    """Simulate ``reps`` products ``prod_j |p_j(z)|`` of length ``k_max`` and
    compare the estimated growth with the closed-form membership.

    AS/SP: the drift is the sample mean of ``ln|p_j(z)|`` with a normal
    interval whose variance comes from :func:`ln_moment2`. MS: the drift
    is ``ln`` of the sample mean of ``|p_j(z)|^2``, which estimates the
    per-step growth of ``E|V^k|^2`` without the heavy-tail bias of
    averaging whole paths. Mid is deterministic. Paths are kept in log
    space; a path whose modulus would overflow counts as divergent.
    """
    kind = RegionKind.parse(kind)
    if k_max < 1 or reps < 1:
        raise ValueError("k_max and reps must be positive")
    z = complex(z)
    a, b = z.real, z.imag
    member = in_region(z, kind)
    if kind is RegionKind.Mid:
        taus = np.full((reps, k_max), 0.5)
    else:
        taus = np.stack([RngStream(seed, i).uniform(k_max) for i in range(reps)])
    with np.errstate(divide="ignore"):
        sq = f_ab(a, b, taus)
        logs = 0.5 * np.log(sq)
    paths = np.cumsum(logs, axis=1)
    final = paths[:, -1]
    decaying = float(np.mean(final < 0.0))
    overflowed = int(np.sum(final > _LOG_MAX))
    N = taus.size

    if kind is RegionKind.Mid:
        drift = lo = hi = float(logs[0, 0])
    elif kind is RegionKind.MS:
        mean = float(sq.mean())
        half = z_crit * float(sq.std(ddof=1)) / math.sqrt(N) if N > 1 else 0.0
        drift = math.log(mean)
        lo = math.log(mean - half) if mean > half else -math.inf
        hi = math.log(mean + half)
    else:
        drift = float(logs.mean())
        var = 0.25 * ln_moment2(a, b) - F_value(a, b) ** 2
        half = z_crit * math.sqrt(max(var, 0.0) / N)
        lo, hi = drift - half, drift + half

    if hi < 0.0:
        mc_member = True
    elif lo > 0.0:
        mc_member = False
    else:
        mc_member = None
    if mc_member is None:
        verdict = "inconclusive"
    else:
        verdict = "agree" if mc_member == member else "disagree"
    return Verdict(kind, z, drift, lo, hi, member, mc_member, verdict, decaying, overflowed)
