"""Problem definitions, uniform meshes, the 1-norm and seeded random streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "DomainError",
    "IVProblem",
    "Mesh",
    "RngStream",
    "norm1",
    "make_problem",
]

_U64 = (1 << 64) - 1


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


def norm1(v) -> float:
    """Sum of absolute values of the components of ``v``."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise DomainError("norm1 of an empty vector")
    return float(np.sum(np.abs(v)))


@dataclass(frozen=True, eq=False)
class IVProblem:
    """Initial-value problem ``z' = rhs(t, z)``, ``z(a) = eta`` on ``[a, b]``.

    ``rhs`` must broadcast: ``t`` is a scalar or an array matching
    ``y.shape[:-1]`` and ``y`` has trailing dimension ``d``.
    """

    a: float
    b: float
    eta: np.ndarray
    rhs: Callable[[Union[float, np.ndarray], np.ndarray], np.ndarray]
    holder_rho: Union[float, str] = "unknown"
    exact_solution: Optional[Callable[[float], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float)).copy()
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        if not self.a < self.b:
            raise DomainError(f"need a < b, got [{self.a}, {self.b}]")
        if eta.ndim != 1:
            raise DomainError("eta must be a vector")
        rho = self.holder_rho
        if rho != "unknown" and not 0.0 < rho <= 1.0:
            raise DomainError(f"holder_rho must lie in (0, 1], got {rho}")

    @property
    def d(self) -> int:
        return self.eta.shape[0]

    @property
    def key(self) -> tuple:
        """Hashable identity used for caching reference solutions."""
        return (self.name, self.a, self.b, tuple(self.eta), tuple(sorted(self.params.items())))


@dataclass(frozen=True)
class Mesh:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"mesh needs n >= 1, got {self.n}")
        if not self.a < self.b:
            raise DomainError(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def points(self) -> np.ndarray:
        t = self.a + np.arange(self.n + 1) * self.h
        t[-1] = self.b
        return t


class RngStream:
    """Counter-based uniform stream keyed by ``(master_seed, stream_id)``.

    Backed by Philox: the 128-bit key holds the two ids, so every replicate
    owns an independent sequence and draw ``k`` depends only on the key and
    ``k``. ``substream`` selects a disjoint counter range under the same key,
    used to keep noise draws apart from the step-point draws.
    """

    def __init__(self, master_seed: int, stream_id: int, substream: int = 0):
        self.master_seed = int(master_seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self.substream = int(substream) & _U64
        bitgen = np.random.Philox(
            key=np.array([self.master_seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, 0, self.substream], dtype=np.uint64),
        )
        self._gen = np.random.Generator(bitgen)
        self.position = 0

    def uniform(self, size=None):
        """Draw from U[0, 1); advances ``position`` by the number of draws."""
        out = self._gen.random(size)
        self.position += int(np.prod(size)) if size is not None else 1
        return out

    def child(self, substream: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, substream)

    def __repr__(self):
        return (f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, "
                f"substream={self.substream}, position={self.position})")


# built-in problems --------------------------------------------------------

def _example1(gamma: float) -> IVProblem:
    inv_gamma = 1.0 / gamma

    def rhs(t, y):
        z = y[..., 0]
        # theta may exceed b by one rounding step
        s = np.maximum(2.0 - np.asarray(t, dtype=float), 0.0) ** inv_gamma
        return (1.0 + z * np.cos(10.0 * s * np.abs(z) ** 1.5))[..., None]

    return IVProblem(0.0, 2.0, np.array([-1.0]), rhs, holder_rho=min(1.0, inv_gamma),
                     name="example1", params={"gamma": float(gamma)})


def _sir(beta: float, gamma: float, s0: float, i0: float, r0: float) -> IVProblem:
    def rhs(t, y):
        s, i = y[..., 0], y[..., 1]
        infect = beta * s * i
        recover = gamma * i
        out = np.empty(np.shape(y))
        out[..., 0] = -infect
        out[..., 1] = infect - recover
        out[..., 2] = recover
        return out

    return IVProblem(0.0, 30.0, np.array([s0, i0, r0]), rhs, holder_rho=1.0, name="sir",
                     params={"beta": beta, "gamma": gamma})


def _linear(lam: float, eta: float, a: float, b: float) -> IVProblem:
    def rhs(t, y):
        return lam * y

    def exact(t):
        return np.array([eta * np.exp(lam * (t - a))])

    return IVProblem(a, b, np.array([eta]), rhs, holder_rho=1.0, exact_solution=exact,
                     name="linear", params={"lam": lam})


def make_problem(name: str, **params) -> IVProblem:
    """Build one of the registered problems: ``example1``, ``sir`` or ``linear``.

    >>> make_problem("sir").eta
    array([50.,  1.,  0.])
    """
    if name == "example1":
        gamma = float(params.pop("gamma", 2.0))
        _no_extra(name, params)
        if not gamma > 0:
            raise DomainError(f"example1 needs gamma > 0, got {gamma}")
        return _example1(gamma)
    if name == "sir":
        beta = float(params.pop("beta", 1.0 / 768.0))
        gamma = float(params.pop("gamma", 1.0 / 120.0))
        s0, i0, r0 = (float(x) for x in params.pop("initial", (50.0, 1.0, 0.0)))
        _no_extra(name, params)
        return _sir(beta, gamma, s0, i0, r0)
    if name == "linear":
        if "lam" not in params:
            raise DomainError("linear problem needs lam")
        lam = params.pop("lam")
        if isinstance(lam, complex) or np.iscomplexobj(lam):
            raise DomainError("trajectories use real lam; complex lam belongs to the stability module")
        lam = float(lam)
        eta = float(params.pop("eta", 1.0))
        a = float(params.pop("a", 0.0))
        b = float(params.pop("b", 1.0))
        _no_extra(name, params)
        return _linear(lam, eta, a, b)
    raise DomainError(f"unknown problem {name!r}")


def _no_extra(name, params):
    if params:
        raise DomainError(f"unexpected parameters for {name}: {sorted(params)}")
