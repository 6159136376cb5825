"""Randomized two-stage Runge-Kutta scheme and deterministic baselines.

All schemes run through :func:`integrate`, which advances a batch of ``M``
replicates at once (state shape ``(M, d)``). Replicate ``i`` draws its step
points from ``streams[i]`` and its noise from ``noise_streams[i]``, so a
replicate computed alone is bitwise identical to the same replicate inside
a batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DomainError, IVProblem, Mesh, RngStream
from .noise import NoiseSpec, perturbation

__all__ = [
    "SCHEMES",
    "SolverOverflow",
    "Trajectory",
    "rrk2_step",
    "euler_step",
    "integrate",
    "trajectory",
    "rrk2_trajectory",
    "euler_trajectory",
    "midpoint_trajectory",
    "interpolate",
]

SCHEMES = ("rrk2", "euler", "midpoint")
_CALLS_PER_STEP = {"rrk2": 2, "euler": 1, "midpoint": 2}
NOISE_SUBSTREAM = 1
_CHUNK = 2048


class SolverOverflow(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True, eq=False)
class Trajectory:
    mesh: Mesh
    states: np.ndarray
    taus: np.ndarray
    scheme: str

    def __post_init__(self):
        if self.states.shape[0] != self.mesh.n + 1:
            raise DomainError("states must hold n + 1 mesh values")


def rrk2_step(v_prev, t_prev, h, tau, f_tilde):
    """One randomized step; returns ``(v_next, v_tau)``.

    ``tau`` may be a scalar or one value per replicate (leading axis of
    ``v_prev``).
    """
    tau = np.asarray(tau, dtype=float)
    v_tau = v_prev + h * tau[..., None] * f_tilde(t_prev, v_prev)
    v_next = v_prev + h * f_tilde(t_prev + tau * h, v_tau)
    return v_next, v_tau


def euler_step(v_prev, t_prev, h, f_tilde):
    return v_prev + h * f_tilde(t_prev, v_prev)


class _Draws:
    """Per-step blocks of uniform draws from a batch of streams.

    Draws are pulled in chunks but never beyond ``n_steps * width`` per
    stream, so stream positions end exactly where the run needs them.
    """

    def __init__(self, streams: Sequence[RngStream], width: int, n_steps: int):
        self.streams = streams
        self.width = width
        self.remaining = n_steps
        self._block = None
        self._i = 0

    def next(self) -> np.ndarray:
        if self._block is None or self._i == self._block.shape[1]:
            k = min(_CHUNK, self.remaining)
            self._block = np.stack([s.uniform((k, self.width)) for s in self.streams])
            self.remaining -= k
            self._i = 0
        out = self._block[:, self._i, :]
        self._i += 1
        return out


class _Oracle:
    """Noisy right-hand side for a batch; hands out noise draws call by call."""

    def __init__(self, rhs, spec: NoiseSpec, draws: Optional[_Draws], width: int):
        self.rhs = rhs
        self.spec = spec
        self.draws = draws
        self.width = width
        self._u = None
        self._k = 0
        self.calls = 0

    def begin_step(self):
        if self.draws is not None:
            self._u = self.draws.next()
            self._k = 0

    def __call__(self, t, y):
        self.calls += 1
        value = self.rhs(t, y)
        if self.spec.kind == "none" or self.spec.delta == 0.0:
            return value
        u = None
        if self._u is not None:
            u = self._u[:, self._k:self._k + self.width]
            self._k += self.width
        return value + perturbation(value, self.spec, u)


def integrate(
    problem: IVProblem,
    n: int,
    scheme: str,
    noise: NoiseSpec,
    streams: Sequence[RngStream],
    *,
    noise_streams: Optional[Sequence[RngStream]] = None,
    observe: Optional[Callable[[int, np.ndarray], None]] = None,
    record_taus: bool = False,
):
    """Advance ``len(streams)`` replicates over the uniform mesh with ``n`` steps.

    Returns ``(final_states, taus)``; ``taus`` is ``(M, n)`` when recorded
    and the scheme is ``rrk2``, else an empty ``(M, 0)`` array. ``observe``
    is called as ``observe(j, states)`` for ``j = 0 .. n``.

    Per step the draw order is fixed: the step point ``tau_j`` from the
    replicate stream, then the first-stage and second-stage noise from the
    noise stream.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    n = int(n)
    noise.check_dim(problem.d)
    if noise_streams is None:
        noise_streams = [s.child(NOISE_SUBSTREAM) for s in streams]
    m = len(streams)
    mesh = Mesh(problem.a, problem.b, n)
    h = mesh.h
    t = mesh.points

    eta = np.broadcast_to(problem.eta, (m, problem.d))
    width = noise.draws_per_call(problem.d)
    if noise.initial and noise.kind != "none":
        u0 = np.stack([s.uniform(width) for s in noise_streams]) if width else None
        v = eta + perturbation(eta, noise, u0)
    else:
        v = eta.copy()

    calls = _CALLS_PER_STEP[scheme]
    draws = _Draws(noise_streams, calls * width, n) if width else None
    oracle = _Oracle(problem.rhs, noise, draws, width)
    tau_draws = _Draws(streams, 1, n) if scheme == "rrk2" else None
    taus = np.empty((m, n)) if (record_taus and scheme == "rrk2") else np.empty((m, 0))
    half = np.full(m, 0.5)

    if observe is not None:
        observe(0, v)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n + 1):
            t_prev = t[j - 1]
            if scheme == "rrk2":
                tau = tau_draws.next()[:, 0]
                if record_taus:
                    taus[:, j - 1] = tau
                oracle.begin_step()
                v, _ = rrk2_step(v, t_prev, h, tau, oracle)
            elif scheme == "midpoint":
                oracle.begin_step()
                v, _ = rrk2_step(v, t_prev, h, half, oracle)
            else:
                oracle.begin_step()
                v = euler_step(v, t_prev, h, oracle)
            if not np.isfinite(v).all():
                raise SolverOverflow(j)
            if observe is not None:
                observe(j, v)
    return v, taus


def trajectory(problem: IVProblem, n: int, scheme: str, noise: Optional[NoiseSpec] = None,
               stream: Optional[RngStream] = None, *, noise_stream: Optional[RngStream] = None
               ) -> Trajectory:
    noise = noise or NoiseSpec()
    stream = stream if stream is not None else RngStream(0, 0)
    states = []
    _, taus = integrate(
        problem, n, scheme, noise, [stream],
        noise_streams=None if noise_stream is None else [noise_stream],
        observe=lambda j, v: states.append(v[0].copy()),
        record_taus=True,
    )
    return Trajectory(Mesh(problem.a, problem.b, int(n)), np.array(states), taus[0], scheme)


def rrk2_trajectory(problem, n, noise=None, stream=None, **kw) -> Trajectory:
    return trajectory(problem, n, "rrk2", noise, stream, **kw)


def euler_trajectory(problem, n, noise=None, stream=None, **kw) -> Trajectory:
    return trajectory(problem, n, "euler", noise, stream, **kw)


def midpoint_trajectory(problem, n, noise=None, stream=None, **kw) -> Trajectory:
    """Randomized scheme with every step point frozen at one half."""
    return trajectory(problem, n, "midpoint", noise, stream, **kw)


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Piecewise-linear interpolant of the trajectory at time ``t``."""
    mesh = traj.mesh
    pts = mesh.points
    if not mesh.a <= t <= mesh.b:
        raise DomainError(f"t={t} outside [{mesh.a}, {mesh.b}]")
    n = mesh.n
    j = min(max(int(np.floor((t - mesh.a) / mesh.h)), 0), n - 1)
    # floor can land one bracket off near mesh points
    if t >= pts[j + 1]:
        j += 1
    elif t < pts[j]:
        j -= 1
    if j == n or t == pts[j]:
        return traj.states[j].copy()
    v0, v1 = traj.states[j], traj.states[j + 1]
    return (v1 - v0) / (pts[j + 1] - pts[j]) * (t - pts[j]) + v0
