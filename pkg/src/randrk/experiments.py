"""Monte-Carlo error estimation and convergence studies."""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._fmt import fmt
from .core import DomainError, IVProblem, RngStream
from .noise import NoiseSpec
from .solver import NOISE_SUBSTREAM, SCHEMES, integrate

__all__ = [
    "ErrorEstimate",
    "ConvergenceTable",
    "Reference",
    "reference",
    "reference_solution",
    "replicate_errors",
    "lp_error",
    "worst_case_error",
    "convergence_study",
    "coupled_maxdiff",
    "compute_rbar",
    "rbar_terms",
    "N_REF",
]

N_REF = 2**20
MODES = ("terminal", "uniform")
PROTOCOLS = ("const_pair", "random_reps")
DEFAULT_REPS = {"const_pair": 1000, "random_reps": 100}


@dataclass(frozen=True)
class ErrorEstimate:
    n: int
    h: float
    delta: float
    p: float
    mode: str
    value: float
    reps: int

    def __post_init__(self):
        if self.value < 0 or self.reps < 1:
            raise DomainError("error estimates need value >= 0 and reps >= 1")


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list
    slope: float
    intercept: float

    def to_csv(self) -> str:
        lines = ["n,h,delta,p,mode,error"]
        for r in self.rows:
            lines.append(",".join([fmt(r.n), fmt(r.h), fmt(r.delta), fmt(r.p), r.mode, fmt(r.value)]))
        lines.append(f"#slope={fmt(self.slope)}")
        lines.append(f"#intercept={fmt(self.intercept)}")
        return "\n".join(lines) + "\n"


# reference solutions ------------------------------------------------------

class Reference:
    """Classical RK4 on a fixed fine mesh with cubic Hermite dense output."""

    def __init__(self, problem: IVProblem, n_ref: int = N_REF):
        self.a, self.b, self.n = problem.a, problem.b, n_ref
        self.H = (problem.b - problem.a) / n_ref
        f, H, a = problem.rhs, self.H, problem.a
        ys = np.empty((n_ref + 1, problem.d))
        fs = np.empty_like(ys)
        y = problem.eta.astype(float)
        for i in range(n_ref):
            t = a + i * H
            k1 = f(t, y)
            k2 = f(t + 0.5 * H, y + 0.5 * H * k1)
            k3 = f(t + 0.5 * H, y + 0.5 * H * k2)
            k4 = f(t + H, y + H * k3)
            ys[i], fs[i] = y, k1
            y = y + H / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[n_ref], fs[n_ref] = y, f(problem.b, y)
        self.ys, self.fs = ys, fs

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.floor((t - self.a) / self.H).astype(np.int64), 0, self.n - 1)
        s = ((t - (self.a + i * self.H)) / self.H)[:, None]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out = (h00 * self.ys[i] + h10 * self.H * self.fs[i]
               + h01 * self.ys[i + 1] + h11 * self.H * self.fs[i + 1])
        # nodes exactly
        node = s[:, 0] == 0.0
        out[node] = self.ys[i[node]]
        return out[0] if scalar else out


class _Exact:
    def __init__(self, problem: IVProblem):
        self.fn = problem.exact_solution

    def __call__(self, t):
        if np.ndim(t) == 0:
            return np.asarray(self.fn(float(t)), dtype=float)
        return np.array([self.fn(float(x)) for x in np.asarray(t)], dtype=float)


_cache: dict = {}
_cache_lock = threading.Lock()


def reference(problem: IVProblem, n_ref: int = N_REF):
    """Callable ``t -> z(t)`` (vectorized over ``t``), cached per problem."""
    if problem.exact_solution is not None:
        return _Exact(problem)
    key = (problem.key, n_ref)
    with _cache_lock:
        ref = _cache.get(key)
        if ref is None:
            ref = _cache[key] = Reference(problem, n_ref)
    return ref


def reference_solution(problem: IVProblem, t: float, n_ref: int = N_REF) -> np.ndarray:
    if not problem.a <= t <= problem.b:
        raise DomainError(f"t={t} outside [{problem.a}, {problem.b}]")
    return reference(problem, n_ref)(t)


# error estimation ---------------------------------------------------------

def _check(scheme, mode, p, reps):
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    if not p >= 2:
        raise DomainError(f"p must be >= 2, got {p}")
    if reps < 1:
        raise DomainError("need at least one replicate")


def replicate_errors(problem: IVProblem, scheme: str, n: int, noise: NoiseSpec, M: int,
                     mode: str = "terminal", master_seed: int = 0, *, stream_offset: int = 0,
                     noise_substream: int = NOISE_SUBSTREAM, n_ref: int = N_REF) -> np.ndarray:
    """Per-replicate errors ``e_i`` (terminal or sup over mesh points and midpoints)."""
    _check(scheme, mode, 2, M)
    ref = reference(problem, n_ref)
    streams = [RngStream(master_seed, stream_offset + i) for i in range(M)]
    noise_streams = [s.child(noise_substream) for s in streams]
    observe = None
    if mode == "uniform":
        h = (problem.b - problem.a) / n
        t = problem.a + np.arange(n + 1) * h
        t[-1] = problem.b
        t_mid = 0.5 * (t[:-1] + t[1:])
        z_nodes, z_mid = ref(t), ref(t_mid)
        worst = np.zeros(M)
        prev = [None]

        def observe(j, v):
            np.maximum(worst, np.abs(z_nodes[j] - v).sum(axis=1), out=worst)
            if j > 0:
                v0 = prev[0]
                mid = (v - v0) / (t[j] - t[j - 1]) * (t_mid[j - 1] - t[j - 1]) + v0
                np.maximum(worst, np.abs(z_mid[j - 1] - mid).sum(axis=1), out=worst)
            prev[0] = v.copy()

    final, _ = integrate(problem, n, scheme, noise, streams, noise_streams=noise_streams,
                         observe=observe)
    if mode == "uniform":
        return worst
    return np.abs(ref(problem.b) - final).sum(axis=1)


def _lp(errors: np.ndarray, p: float) -> float:
    return float(np.mean(errors**p) ** (1.0 / p))


def lp_error(problem: IVProblem, scheme: str, n: int, noise: Optional[NoiseSpec] = None,
             p: float = 2.0, M: int = 1000, mode: str = "terminal", master_seed: int = 0,
             **kw) -> ErrorEstimate:
    """``(mean_i e_i^p)^(1/p)`` over ``M`` replicates; replicate ``i`` uses stream id ``i``."""
    noise = noise or NoiseSpec()
    _check(scheme, mode, p, M)
    e = replicate_errors(problem, scheme, n, noise, M, mode, master_seed, **kw)
    h = (problem.b - problem.a) / n
    return ErrorEstimate(int(n), h, noise.delta, float(p), mode, _lp(e, p), int(M))


def worst_case_error(problem: IVProblem, scheme: str, n: int, delta: float,
                     protocol: str = "const_pair", p: float = 2.0, M: Optional[int] = None,
                     mode: str = "terminal", master_seed: int = 0, *, realizations: int = 100,
                     **kw) -> ErrorEstimate:
    """Worst error over a family of noise oracles in K(delta).

    ``const_pair`` takes the larger of the ``+delta e_1`` and ``-delta e_1``
    oracles; ``random_reps`` the largest over ``realizations`` independent
    uniform-noise draws. Both share the step-point streams across oracles
    and leave the initial value exact.
    """
    if protocol not in PROTOCOLS:
        raise DomainError(f"unknown protocol {protocol!r}")
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    M = DEFAULT_REPS[protocol] if M is None else M
    if protocol == "const_pair":
        specs = [(NoiseSpec("const_plus", delta, initial=False), NOISE_SUBSTREAM),
                 (NoiseSpec("const_minus", delta, initial=False), NOISE_SUBSTREAM)]
    else:
        specs = [(NoiseSpec("uniform", delta, initial=False), NOISE_SUBSTREAM + r)
                 for r in range(realizations)]
    if delta == 0.0:
        specs = specs[:1]
    best = None
    for spec, sub in specs:
        est = lp_error(problem, scheme, n, spec, p, M, mode, master_seed,
                       noise_substream=sub, **kw)
        if best is None or est.value > best.value:
            best = est
    return best


def coupled_maxdiff(problem: IVProblem, scheme: str, n: int, noise: NoiseSpec,
                    master_seed: int = 0, stream_id: int = 0) -> float:
    """``max_j norm1(V^j - Vbar^j)`` for an exact and a noisy run on one step-point stream."""
    states = {}
    for key, spec in (("exact", NoiseSpec()), ("noisy", noise)):
        out = []
        # fresh stream object per run: both runs see the same draws
        integrate(problem, n, scheme, spec, [RngStream(master_seed, stream_id)],
                  observe=lambda j, v, out=out: out.append(v[0].copy()))
        states[key] = np.array(out)
    return float(np.abs(states["exact"] - states["noisy"]).sum(axis=1).max())


def _slope(rows) -> tuple:
    err = np.array([r.value for r in rows])
    if np.any(err <= 0):
        return math.nan, math.nan
    n = np.array([r.n for r in rows], dtype=float)
    slope, intercept = np.polyfit(np.log10(n), np.log10(err), 1)
    return float(slope), float(intercept)


def convergence_study(problem: IVProblem, scheme: str, n_list: Sequence[int], *,
                      delta: float = 0.0, delta_policy: Optional[tuple] = None,
                      noise: str = "none", p: float = 2.0, M: Optional[int] = None,
                      mode: str = "terminal", master_seed: int = 0, workers: int = 1,
                      **kw) -> ConvergenceTable:
    """Error for each ``n`` and the least-squares slope of ``log10 err`` on ``log10 n``.

    ``noise`` is a noise kind or one of the worst-case protocols. With
    ``delta_policy=(c, q)`` the noise level is ``c * h**q`` for each row.
    """
    n_list = [int(x) for x in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be strictly increasing with at least 3 entries")
    M = M if M is not None else DEFAULT_REPS.get(noise, 1000)

    def delta_for(n):
        if delta_policy is None:
            return delta
        c, q = delta_policy
        return min(1.0, c * ((problem.b - problem.a) / n) ** q)

    def row(n):
        dl = delta_for(n)
        if noise in PROTOCOLS:
            est = worst_case_error(problem, scheme, n, dl, noise, p, M, mode, master_seed, **kw)
        else:
            est = lp_error(problem, scheme, n, NoiseSpec(noise, dl), p, M, mode, master_seed, **kw)
        # record the policy level even when delta == 0 collapses the protocol
        return ErrorEstimate(est.n, est.h, dl, est.p, est.mode, est.value, est.reps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(row, n_list))
    else:
        rows = [row(n) for n in n_list]
    slope, intercept = _slope(rows)
    return ConvergenceTable(rows, slope, intercept)


def rbar_terms(a: float, b: float, K: float) -> tuple:
    """The two expressions whose maximum is the localization radius."""
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(K)):
        raise DomainError("a, b and K must be finite")
    if not a < b or not K > 0:
        raise DomainError("need a < b and K > 0")
    L = b - a
    first = K * (1 + L) * (1 + math.exp(K * L) * (1 + K * L))
    second = K + L * (1 + K) + (1 / K + 1) * (1 + K * L) * (math.exp(K * L * (1 + K * L)) * (1 + K) - 1)
    return first, second


def compute_rbar(a: float, b: float, K: float) -> float:
    """Localization radius bounding exact and discrete trajectories for class constant ``K``."""
    return max(rbar_terms(a, b, K))
