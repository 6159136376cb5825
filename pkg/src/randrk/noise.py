"""Inexact-information oracles: ``f~ = f + p`` with ``norm1(p) <= delta``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, RngStream

__all__ = ["NoiseSpec", "KINDS", "perturb", "perturb_initial", "perturbation"]

KINDS = ("none", "const_plus", "const_minus", "uniform", "relative")

# CLI spellings
ALIASES = {"const+": "const_plus", "const-": "const_minus"}


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbation model.

    ``initial`` controls whether trajectories also perturb the initial value;
    the worst-case protocols switch it off so that only ``f`` is corrupted.
    """

    kind: str = "none"
    delta: float = 0.0
    alpha_bound: float = 1.0
    initial: bool = True

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")
        if self.alpha_bound < 0:
            raise DomainError("alpha_bound must be non-negative")

    def draws_per_call(self, d: int) -> int:
        """Uniform draws consumed by one oracle evaluation in dimension ``d``."""
        if self.delta == 0.0:
            return 0
        if self.kind == "uniform":
            return d
        if self.kind == "relative":
            return 1
        return 0

    def check_dim(self, d: int):
        if self.kind == "relative" and d != 1:
            raise DomainError("relative noise is only defined for scalar problems")


def _half_width(delta: float, d: int) -> float:
    # shrink by a hair so any rounded sum of d terms of size <= w stays <= delta
    w = delta / d * (1.0 - 2.0**-40)
    while w * d > delta or sum([w] * d) > delta:
        w = np.nextafter(w, 0.0)
    return w


def perturbation(value: np.ndarray, spec: NoiseSpec, u) -> np.ndarray:
    """Perturbation for ``value`` (shape ``(..., d)``) given its uniform draws ``u``.

    ``u`` has shape ``(..., spec.draws_per_call(d))``; it is ignored for the
    constant kinds.
    """
    value = np.asarray(value, dtype=float)
    d = value.shape[-1]
    spec.check_dim(d)
    kind, delta = spec.kind, spec.delta
    if kind == "none" or delta == 0.0:
        return np.zeros_like(value)
    if kind in ("const_plus", "const_minus"):
        p = np.zeros_like(value)
        p[..., 0] = delta if kind == "const_plus" else -delta
        return p
    u = np.asarray(u, dtype=float)
    if kind == "uniform":
        return (2.0 * u - 1.0) * _half_width(delta, d)
    alpha = (2.0 * u - 1.0) * spec.alpha_bound
    return np.clip(delta * alpha * value, -delta, delta)


def perturb(value, spec: NoiseSpec, stream: RngStream) -> np.ndarray:
    """Return ``value + p`` with ``p`` drawn according to ``spec``."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.shape[-1] < 1:
        raise DomainError("value must have dimension >= 1")
    spec.check_dim(value.shape[-1])
    k = spec.draws_per_call(value.shape[-1])
    u = stream.uniform(value.shape[:-1] + (k,)) if k else None
    return value + perturbation(value, spec, u)


def perturb_initial(eta, spec: NoiseSpec, stream: RngStream) -> np.ndarray:
    """Noisy initial value; same kind semantics as :func:`perturb`."""
    return perturb(eta, spec, stream)
